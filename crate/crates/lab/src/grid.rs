//! Periodic windows, Fourier helpers and sampled fields.

use std::sync::Arc;

use mkdv_core::{breather_jet, soliton_jet, BreatherParams, SolitonParams, MAX_JET};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::LabError;

/// Half-width per unit decay length; `exp(-40)` keeps breather tails near `1e-17`.
pub const DECAY_LENGTHS: f64 = 40.0;

/// Values above this at a window edge raise the tail warning.
pub const TAIL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: f64,
    pub half_width: f64,
    pub n: usize,
}

impl Window {
    pub fn new(center: f64, half_width: f64, n: usize) -> Result<Self, LabError> {
        if !n.is_power_of_two() || n < 16 {
            return Err(LabError::Window(format!("n = {n} must be a power of two >= 16")));
        }
        if !(half_width > 0.0 && half_width.is_finite() && center.is_finite()) {
            return Err(LabError::Window(format!("bad extent {center} +- {half_width}")));
        }
        Ok(Self { center, half_width, n })
    }

    /// Window following the breather envelope at time `t`.
    pub fn for_breather(p: &BreatherParams, t: f64, n: usize) -> Result<Self, LabError> {
        Self::new(p.center(t), DECAY_LENGTHS / p.beta, n)
    }

    /// Smallest power of two giving spacing at most `h`.
    pub fn with_spacing(center: f64, half_width: f64, h: f64) -> Result<Self, LabError> {
        let n = ((2.0 * half_width / h).ceil() as usize).next_power_of_two().max(256);
        Self::new(center, half_width, n)
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.center - self.half_width + j as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Angular wavenumbers in FFT order; index `n/2` is the Nyquist mode.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = std::f64::consts::PI / self.half_width;
        (0..self.n)
            .map(|j| if j <= self.n / 2 { j as f64 } else { j as f64 - self.n as f64 } * dk)
            .collect()
    }

    /// Breather tails at the edges fall below `TAIL_TOL`-ish levels.
    pub fn covers(&self, p: &BreatherParams, t: f64) -> bool {
        let c = p.center(t);
        let left = (c - (self.center - self.half_width)).abs();
        let right = ((self.center + self.half_width) - c).abs();
        p.beta * left.min(right) >= 0.5 * DECAY_LENGTHS * (1.0 - 1e-12)
    }
}

/// FFT plans for one grid size.
#[derive(Clone)]
pub struct Fourier {
    pub window: Window,
    pub k: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("window", &self.window).finish()
    }
}

impl Fourier {
    pub fn new(window: Window) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            window,
            k: window.wavenumbers(),
            fwd: planner.plan_fft_forward(window.n),
            inv: planner.plan_fft_inverse(window.n),
        }
    }

    pub fn forward(&self, u: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    pub fn forward_complex(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
    }

    /// Inverse transform, normalized, real part.
    pub fn inverse_real(&self, spec: &[Complex64]) -> Vec<f64> {
        let mut buf = spec.to_vec();
        self.inv.process(&mut buf);
        let s = 1.0 / self.window.n as f64;
        buf.iter().map(|c| c.re * s).collect()
    }

    /// `(ik)^m`, with the Nyquist entry dropped for odd `m`.
    pub fn symbol(&self, m: usize) -> Vec<Complex64> {
        let n = self.window.n;
        self.k
            .iter()
            .enumerate()
            .map(|(j, &k)| {
                if m % 2 == 1 && j == n / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, k).powu(m as u32)
                }
            })
            .collect()
    }

    pub fn derivative(&self, u: &[f64], m: usize) -> Vec<f64> {
        let mut spec = self.forward(u);
        for (s, w) in spec.iter_mut().zip(self.symbol(m)) {
            *s *= w;
        }
        self.inverse_real(&spec)
    }

    /// Squared norm with weight `(1 + k^2)^s`; the discrete Parseval identity of the window.
    pub fn sobolev_sq(&self, u: &[f64], s: u32) -> f64 {
        let spec = self.forward(u);
        self.sobolev_sq_spec(&spec, s)
    }

    pub fn sobolev_sq_spec(&self, spec: &[Complex64], s: u32) -> f64 {
        let n = self.window.n as f64;
        let scale = self.window.dx() / n;
        spec.iter().zip(&self.k).map(|(c, k)| (1.0 + k * k).powi(s as i32) * c.norm_sqr()).sum::<f64>()
            * scale
    }

    /// `<u, v>` with weight `(1 + k^2)^s`.
    pub fn sobolev_inner(&self, u: &[f64], v: &[f64], s: u32) -> f64 {
        let (a, b) = (self.forward(u), self.forward(v));
        self.sobolev_inner_spec(&a, &b, s)
    }

    pub fn sobolev_inner_spec(&self, a: &[Complex64], b: &[Complex64], s: u32) -> f64 {
        let n = self.window.n as f64;
        let scale = self.window.dx() / n;
        a.iter()
            .zip(b)
            .zip(&self.k)
            .map(|((x, y), k)| (1.0 + k * k).powi(s as i32) * (x * y.conj()).re)
            .sum::<f64>()
            * scale
    }
}

/// Function values on a window, optionally with derivatives `derivs[k - 1] = d^k u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledField {
    pub window: Window,
    pub values: Vec<f64>,
    pub derivs: Vec<Vec<f64>>,
}

impl SampledField {
    pub fn new(window: Window, values: Vec<f64>, derivs: Vec<Vec<f64>>) -> Result<Self, LabError> {
        if values.len() != window.n || derivs.iter().any(|d| d.len() != window.n) {
            return Err(LabError::Window("array length differs from window size".into()));
        }
        Ok(Self { window, values, derivs })
    }

    /// Values only, no derivatives; `values.len()` must equal `window.n`.
    pub fn values_only(window: Window, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), window.n);
        Self { window, values, derivs: vec![] }
    }

    pub fn zeros(window: Window, m: usize) -> Self {
        Self { window, values: vec![0.0; window.n], derivs: vec![vec![0.0; window.n]; m] }
    }

    /// Exact breather jets up to derivative `m`.
    pub fn breather(p: &BreatherParams, t: f64, window: Window, m: usize) -> Result<Self, LabError> {
        let m = m.min(MAX_JET);
        let mut cols = vec![vec![0.0; window.n]; m + 1];
        for j in 0..window.n {
            let jet = breather_jet(p, t, window.x(j), m)?;
            for (k, c) in cols.iter_mut().enumerate() {
                c[j] = jet.dx(k);
            }
        }
        let values = cols.remove(0);
        Ok(Self { window, values, derivs: cols })
    }

    pub fn soliton(p: &SolitonParams, t: f64, window: Window, m: usize) -> Result<Self, LabError> {
        let m = m.min(MAX_JET);
        let mut cols = vec![vec![0.0; window.n]; m + 1];
        for j in 0..window.n {
            let jet = soliton_jet(p, t, window.x(j), m)?;
            for (k, c) in cols.iter_mut().enumerate() {
                c[j] = jet.dx(k);
            }
        }
        let values = cols.remove(0);
        Ok(Self { window, values, derivs: cols })
    }

    /// Values with spectrally computed derivatives up to `m`.
    pub fn spectral(fourier: &Fourier, values: Vec<f64>, m: usize) -> Self {
        let spec = fourier.forward(&values);
        let derivs = (1..=m)
            .map(|k| {
                let s: Vec<Complex64> = spec.iter().zip(fourier.symbol(k)).map(|(a, b)| a * b).collect();
                fourier.inverse_real(&s)
            })
            .collect();
        Self { window: fourier.window, values, derivs }
    }

    pub fn max_derivative(&self) -> usize {
        self.derivs.len()
    }

    /// `d^k u`, `k = 0` being the values.
    pub fn deriv(&self, k: usize) -> Option<&[f64]> {
        if k == 0 {
            Some(&self.values)
        } else {
            self.derivs.get(k - 1).map(|v| v.as_slice())
        }
    }

    /// `u, u_x, ..., u_{mx}` at grid point `j`.
    pub fn jet(&self, j: usize, out: &mut [f64]) {
        out[0] = self.values[j];
        for (k, o) in out.iter_mut().enumerate().skip(1) {
            *o = self.derivs[k - 1][j];
        }
    }

    pub fn edge_magnitude(&self) -> f64 {
        let n = self.values.len();
        self.values[0].abs().max(self.values[n - 1].abs())
    }

    pub fn tail_warning(&self) -> bool {
        self.edge_magnitude() > TAIL_TOL
    }

    /// Pointwise `self + c * other`, derivatives included where both have them.
    pub fn axpy(&self, c: f64, other: &SampledField) -> SampledField {
        let m = self.derivs.len().min(other.derivs.len());
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + c * y).collect::<Vec<_>>();
        SampledField {
            window: self.window,
            values: add(&self.values, &other.values),
            derivs: (0..m).map(|k| add(&self.derivs[k], &other.derivs[k])).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> SampledField {
        let s = |a: &Vec<f64>| a.iter().map(|x| c * x).collect::<Vec<_>>();
        SampledField { window: self.window, values: s(&self.values), derivs: self.derivs.iter().map(s).collect() }
    }
}
