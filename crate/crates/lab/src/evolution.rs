//! Pseudospectral evolution of the hierarchy equations `u_t + (u_{(n-1)x} + f_n(u))_x = 0`
//! on a periodic window, with modulation fitting against the breather family.
//!
//! The default integrator is the two-stage Gauss-Legendre collocation method solved by
//! Newton-GMRES, preconditioned per Fourier mode by the exact linear stage matrix. The
//! nonlinear flux of the 9th-order equation carries eight derivatives, which rules out
//! explicit treatment at usable step sizes; the exponential integrator is kept for
//! weakly nonlinear runs.

use std::sync::Arc;

use mkdv_core::{breather, flux, flux_gradient, phase_derivatives, BreatherParams, Order};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::functionals::{evaluate, Kind};
use crate::grid::{Fourier, SampledField, Window};
use crate::identities::ParamsRecord;
use crate::perturb::{perturbation, Shape};
use crate::LabError;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Gauss-Legendre nodes and Butcher matrix.
const C: [f64; 2] = [0.5 - SQRT3 / 6.0, 0.5 + SQRT3 / 6.0];
const A: [[f64; 2]; 2] = [[0.25, 0.25 - SQRT3 / 6.0], [0.25 + SQRT3 / 6.0, 0.25]];

const NEWTON_MAX: usize = 30;
const GMRES_RESTART: usize = 40;
const GMRES_MAX: usize = 400;

/// Spectrum above this fraction of the peak in the top third of wavenumbers flags lost resolution.
pub const RESOLUTION_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Gauss2,
    Etdrk4,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub order: Order,
    pub window: Window,
    /// Target step; the actual step divides `t_end` evenly.
    pub dt: f64,
    /// May be negative for backward runs.
    pub t_end: f64,
    pub dealias_pad: usize,
    /// Strength `s` of the filter `exp(-s (|k|/k_max)^36)` applied after each step.
    pub filter: Option<f64>,
    pub integrator: Integrator,
    /// Snapshot spacing in time; `None` keeps only the endpoints.
    pub snapshot_dt: Option<f64>,
    /// Newton stops once the stage update is below this, relative to the stage size.
    pub newton_tol: f64,
    /// Velocity of the computational frame. Output is always in the lab frame.
    pub frame_speed: f64,
}

/// Zero-padding factor that removes aliasing for a degree-`p` flux.
pub fn min_dealias_pad(order: Order) -> usize {
    (order.flux_degree() + 2) / 2
}

impl EvolutionConfig {
    pub fn new(order: Order, window: Window, dt: f64, t_end: f64) -> Self {
        Self {
            order,
            window,
            dt,
            t_end,
            dealias_pad: min_dealias_pad(order),
            filter: None,
            integrator: Integrator::Gauss2,
            snapshot_dt: None,
            newton_tol: 1e-13,
            frame_speed: 0.0,
        }
    }

    /// Breather run over `[0, t_end]` in the frame of the envelope, on a window holding the
    /// envelope throughout.
    pub fn for_breather(p: &BreatherParams, n: usize, dt: f64, t_end: f64) -> Result<Self, LabError> {
        let mut cfg = Self::new(p.order, breather_window(p, t_end, n)?, dt, t_end);
        cfg.frame_speed = -p.vel.gamma;
        Ok(cfg)
    }

    pub fn steps(&self) -> usize {
        ((self.t_end.abs() / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    /// Signed step actually taken.
    pub fn h(&self) -> f64 {
        if self.t_end == 0.0 {
            self.dt
        } else {
            self.t_end / self.steps() as f64
        }
    }

    fn validate(&self) -> Result<(), LabError> {
        if !(self.dt > 0.0 && self.dt.is_finite() && self.t_end.is_finite()) {
            return Err(LabError::Config(format!("dt = {} and t_end = {} must be finite, dt > 0", self.dt, self.t_end)));
        }
        if !self.frame_speed.is_finite() {
            return Err(LabError::Config("frame_speed must be finite".into()));
        }
        if self.dealias_pad == 0 {
            return Err(LabError::Config("dealias_pad must be at least 1".into()));
        }
        if matches!(self.snapshot_dt, Some(s) if s.is_nan() || s <= 0.0) {
            return Err(LabError::Config("snapshot_dt must be positive".into()));
        }
        Ok(())
    }
}

/// Per-mode Kassam-Trefethen coefficients.
struct Etd {
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

impl Etd {
    fn new(lin: &[Complex64], h: f64) -> Self {
        const M: usize = 32;
        let roots: Vec<Complex64> = (1..=M)
            .map(|j| Complex64::from_polar(1.0, std::f64::consts::PI * (j as f64 - 0.5) / M as f64))
            .collect();
        let mut out = Etd { e: vec![], e2: vec![], q: vec![], f1: vec![], f2: vec![], f3: vec![] };
        for &l in lin {
            let c = l * h;
            let (mut q, mut f1, mut f2, mut f3) = (Complex64::default(), Complex64::default(), Complex64::default(), Complex64::default());
            for &z in &roots {
                let r = c + z;
                let er = r.exp();
                let r3 = r * r * r;
                q += ((r * 0.5).exp() - 1.0) / r;
                f1 += (-4.0 - r + er * (4.0 - 3.0 * r + r * r)) / r3;
                f2 += (2.0 + r + er * (r - 2.0)) / r3;
                f3 += (-4.0 - 3.0 * r - r * r + er * (4.0 - r)) / r3;
            }
            let s = h / M as f64;
            out.e.push(c.exp());
            out.e2.push((c * 0.5).exp());
            out.q.push(q * s);
            out.f1.push(f1 * s);
            out.f2.push(f2 * s);
            out.f3.push(f3 * s);
        }
        out
    }
}

/// Stage values from the previous step, used to extrapolate the next guess.
struct History {
    u0: Vec<Complex64>,
    y: [Vec<Complex64>; 2],
    u1: Vec<Complex64>,
}

pub struct Solver {
    cfg: EvolutionConfig,
    h: f64,
    fourier: Fourier,
    /// `(ik)^j` with the Nyquist mode removed, `j = 0..=jets`.
    ikp: Vec<Vec<Complex64>>,
    lin: Vec<Complex64>,
    /// Flux arguments `u, u_x, ..., u_{(n-3)x}`.
    jets: usize,
    m: usize,
    slot: Vec<Option<usize>>,
    pad_fwd: Arc<dyn Fft<f64>>,
    pad_inv: Arc<dyn Fft<f64>>,
    /// Inverse of `I - h A lambda_k` per mode.
    precond: Vec<[[Complex64; 2]; 2]>,
    etd: Option<Etd>,
    filter: Option<Vec<f64>>,
    history: Option<History>,
    pub newton_iterations: usize,
    pub gmres_iterations: usize,
}

impl Solver {
    pub fn new(cfg: EvolutionConfig) -> Result<Self, LabError> {
        cfg.validate()?;
        let n = cfg.window.n;
        let fourier = Fourier::new(cfg.window);
        let h = cfg.h();
        let order = cfg.order.n();
        let jets = cfg.order.flux_derivatives() + 1;
        let ik: Vec<Complex64> =
            fourier.k.iter().enumerate().map(|(j, &k)| Complex64::new(0.0, if j == n / 2 { 0.0 } else { k })).collect();
        let ikp: Vec<Vec<Complex64>> = (0..=jets).map(|j| ik.iter().map(|z| z.powu(j as u32)).collect()).collect();
        // u(x, t) = w(x - c t, t) turns the linear part into L + c d_x for w
        let lin: Vec<Complex64> = ik.iter().map(|z| -z.powu(order) + z * cfg.frame_speed).collect();
        let m = cfg.dealias_pad * n;
        let slot = (0..n)
            .map(|k| match k.cmp(&(n / 2)) {
                std::cmp::Ordering::Less => Some(k),
                std::cmp::Ordering::Equal => None,
                std::cmp::Ordering::Greater => Some(m - (n - k)),
            })
            .collect();
        let mut planner = FftPlanner::new();
        let precond = lin
            .iter()
            .map(|&l| {
                let z = l * h;
                let (a, b) = (Complex64::new(1.0, 0.0) - z * A[0][0], -z * A[0][1]);
                let (c, d) = (-z * A[1][0], Complex64::new(1.0, 0.0) - z * A[1][1]);
                let det = a * d - b * c;
                [[d / det, -b / det], [-c / det, a / det]]
            })
            .collect();
        let etd = (cfg.integrator == Integrator::Etdrk4).then(|| Etd::new(&lin, h));
        let filter = cfg.filter.map(|s| {
            let kmax = fourier.k[n / 2].abs();
            fourier.k.iter().map(|k| (-s * (k.abs() / kmax).powi(36)).exp()).collect()
        });
        Ok(Self {
            cfg,
            h,
            ikp,
            lin,
            jets,
            m,
            slot,
            pad_fwd: planner.plan_fft_forward(m),
            pad_inv: planner.plan_fft_inverse(m),
            precond,
            etd,
            filter,
            history: None,
            fourier,
            newton_iterations: 0,
            gmres_iterations: 0,
        })
    }

    pub fn fourier(&self) -> &Fourier {
        &self.fourier
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `d^j u` for `j < count` on the padded grid, two derivatives per complex transform.
    fn padded_jets(&self, spec: &[Complex64], count: usize) -> Vec<Vec<f64>> {
        let scale = 1.0 / self.cfg.window.n as f64;
        let mut out = Vec::with_capacity(count);
        let mut buf = vec![Complex64::default(); self.m];
        for j in (0..count).step_by(2) {
            buf.iter_mut().for_each(|z| *z = Complex64::default());
            for (k, s) in self.slot.iter().enumerate() {
                if let Some(s) = *s {
                    let a = spec[k] * self.ikp[j][k];
                    let b = if j + 1 < count { spec[k] * self.ikp[j + 1][k] } else { Complex64::default() };
                    buf[s] = a + Complex64::i() * b;
                }
            }
            self.pad_inv.process(&mut buf);
            out.push(buf.iter().map(|z| z.re * scale).collect());
            if j + 1 < count {
                out.push(buf.iter().map(|z| z.im * scale).collect());
            }
        }
        out
    }

    /// `-ik` times the truncated transform of padded-grid values.
    fn minus_dx_truncated(&self, vals: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.pad_fwd.process(&mut buf);
        let scale = self.cfg.window.n as f64 / self.m as f64;
        self.slot
            .iter()
            .enumerate()
            .map(|(k, s)| match s {
                Some(s) => -buf[*s] * self.ikp[1][k] * scale,
                None => Complex64::default(),
            })
            .collect()
    }

    fn nonlinear(&self, spec: &[Complex64]) -> Result<Vec<Complex64>, LabError> {
        let d = self.padded_jets(spec, self.jets);
        let mut args = vec![0.0; self.jets];
        let mut f = vec![0.0; self.m];
        for (p, fp) in f.iter_mut().enumerate() {
            for (a, dj) in args.iter_mut().zip(&d) {
                *a = dj[p];
            }
            *fp = flux(self.cfg.order, &args)?;
        }
        Ok(self.minus_dx_truncated(&f))
    }

    /// Right-hand side together with `df/du_j` on the padded grid.
    fn rhs_and_gradient(&self, spec: &[Complex64]) -> Result<(Vec<Complex64>, Vec<Vec<f64>>), LabError> {
        let d = self.padded_jets(spec, self.jets);
        let mut g = vec![vec![0.0; self.m]; self.jets];
        let mut f = vec![0.0; self.m];
        let mut args = vec![0.0; self.jets];
        let mut grad = vec![0.0; self.jets];
        for (p, fp) in f.iter_mut().enumerate() {
            for (a, dj) in args.iter_mut().zip(&d) {
                *a = dj[p];
            }
            *fp = flux_gradient(self.cfg.order, &args, &mut grad)?;
            for (gj, v) in g.iter_mut().zip(&grad) {
                gj[p] = *v;
            }
        }
        let mut out = self.minus_dx_truncated(&f);
        for ((o, l), s) in out.iter_mut().zip(&self.lin).zip(spec) {
            *o += l * s;
        }
        Ok((out, g))
    }

    /// Linearized right-hand side at the state whose flux gradient is `g`.
    fn jvp(&self, g: &[Vec<f64>], v: &[Complex64]) -> Vec<Complex64> {
        let d = self.padded_jets(v, self.jets);
        let mut s = vec![0.0; self.m];
        for (gj, dj) in g.iter().zip(&d) {
            for ((sp, a), b) in s.iter_mut().zip(gj).zip(dj) {
                *sp += a * b;
            }
        }
        let mut out = self.minus_dx_truncated(&s);
        for ((o, l), x) in out.iter_mut().zip(&self.lin).zip(v) {
            *o += l * x;
        }
        out
    }

    fn precondition(&self, v: [&[Complex64]; 2]) -> [Vec<Complex64>; 2] {
        let n = self.cfg.window.n;
        let (mut a, mut b) = (vec![Complex64::default(); n], vec![Complex64::default(); n]);
        for k in 0..n {
            let p = &self.precond[k];
            a[k] = p[0][0] * v[0][k] + p[0][1] * v[1][k];
            b[k] = p[1][0] * v[0][k] + p[1][1] * v[1][k];
        }
        [a, b]
    }

    fn to_phys(&self, spec: &[Complex64]) -> Vec<f64> {
        self.fourier.inverse_real(spec)
    }

    fn to_spec(&self, v: &[f64]) -> Vec<Complex64> {
        let mut s = self.fourier.forward(v);
        s[self.cfg.window.n / 2] = Complex64::default();
        s
    }

    /// Lab-frame transform of the frame state after time `t`.
    fn to_lab(&self, w: &[Complex64], t: f64) -> Vec<Complex64> {
        let shift = -self.cfg.frame_speed * t;
        if shift == 0.0 {
            return w.to_vec();
        }
        w.iter().zip(&self.ikp[1]).map(|(z, ik)| z * (ik * shift).exp()).collect()
    }

    fn guess(&self, u: &[Complex64]) -> [Vec<Complex64>; 2] {
        match &self.history {
            Some(hist) => {
                let nodes = [0.0, C[0], C[1], 1.0];
                let vals = [&hist.u0, &hist.y[0], &hist.y[1], &hist.u1];
                let at = |tau: f64| -> Vec<Complex64> {
                    let w: Vec<f64> = (0..4)
                        .map(|i| {
                            (0..4).filter(|&j| j != i).map(|j| (tau - nodes[j]) / (nodes[i] - nodes[j])).product()
                        })
                        .collect();
                    (0..u.len()).map(|k| (0..4).map(|i| vals[i][k] * w[i]).sum()).collect()
                };
                [at(1.0 + C[0]), at(1.0 + C[1])]
            }
            // the linear propagator alone is a poor guess: it nearly cancels the flux
            None => [u.to_vec(), u.to_vec()],
        }
    }

    fn gauss_step(&mut self, u: &[Complex64]) -> Result<Vec<Complex64>, LabError> {
        let n = self.cfg.window.n;
        let h = self.h;
        let mut y = self.guess(u);
        y.iter_mut().for_each(|s| hermitian(s));
        let norm = |s: &[Complex64]| (s.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64).sqrt();
        let mut last = f64::INFINITY;
        for it in 0..NEWTON_MAX {
            let (f0, g0) = self.rhs_and_gradient(&y[0])?;
            let (f1, g1) = self.rhs_and_gradient(&y[1])?;
            let (f, grads) = ([f0, f1], [g0, g1]);
            let mut g: [Vec<Complex64>; 2] = [vec![Complex64::default(); n], vec![Complex64::default(); n]];
            for i in 0..2 {
                for k in 0..n {
                    g[i][k] = y[i][k] - u[k] - (f[0][k] * A[i][0] + f[1][k] * A[i][1]) * h;
                }
            }
            let mut rhs = self.to_phys(&g[0]);
            rhs.extend(self.to_phys(&g[1]));
            rhs.iter_mut().for_each(|v| *v = -*v);
            let apply = |v: &[f64]| -> Vec<f64> {
                let w = self.precondition([&self.to_spec(&v[..n]), &self.to_spec(&v[n..])]);
                let k = [self.jvp(&grads[0], &w[0]), self.jvp(&grads[1], &w[1])];
                let mut out = Vec::with_capacity(2 * n);
                for i in 0..2 {
                    let o: Vec<Complex64> =
                        (0..n).map(|m| w[i][m] - (k[0][m] * A[i][0] + k[1][m] * A[i][1]) * h).collect();
                    out.extend(self.to_phys(&o));
                }
                out
            };
            let (sol, iters, _) = gmres(apply, &rhs, 1e-6, GMRES_RESTART, GMRES_MAX)?;
            self.gmres_iterations += iters;
            let delta = self.precondition([&self.to_spec(&sol[..n]), &self.to_spec(&sol[n..])]);
            for i in 0..2 {
                for k in 0..n {
                    y[i][k] += delta[i][k];
                }
                hermitian(&mut y[i]);
            }
            self.newton_iterations += 1;
            let step = norm(&delta[0]).max(norm(&delta[1]));
            let size = norm(&y[0]).max(norm(&y[1]));
            if !step.is_finite() {
                return Err(LabError::NonFinite("evolution state"));
            }
            let stalled = it >= 3 && step >= 0.5 * last;
            if stalled && step > 1e-8 * size {
                return Err(LabError::Convergence { what: "newton", iterations: it + 1, residual: step / size });
            }
            if step <= self.cfg.newton_tol * size || step == 0.0 || stalled {
                let u1: Vec<Complex64> = (0..n).map(|k| u[k] + (y[1][k] - y[0][k]) * SQRT3).collect();
                self.history = Some(History { u0: u.to_vec(), y, u1: u1.clone() });
                return Ok(u1);
            }
            last = step;
        }
        Err(LabError::Convergence { what: "newton", iterations: NEWTON_MAX, residual: last })
    }

    fn etd_step(&self, v: &[Complex64]) -> Result<Vec<Complex64>, LabError> {
        let c = self.etd.as_ref().expect("etd coefficients");
        let n = v.len();
        let nv = self.nonlinear(v)?;
        let a: Vec<Complex64> = (0..n).map(|k| c.e2[k] * v[k] + c.q[k] * nv[k]).collect();
        let na = self.nonlinear(&a)?;
        let b: Vec<Complex64> = (0..n).map(|k| c.e2[k] * v[k] + c.q[k] * na[k]).collect();
        let nb = self.nonlinear(&b)?;
        let cc: Vec<Complex64> = (0..n).map(|k| c.e2[k] * a[k] + c.q[k] * (nb[k] * 2.0 - nv[k])).collect();
        let nc = self.nonlinear(&cc)?;
        Ok((0..n)
            .map(|k| c.e[k] * v[k] + nv[k] * c.f1[k] + (na[k] + nb[k]) * c.f2[k] * 2.0 + nc[k] * c.f3[k])
            .collect())
    }

    pub fn step_spec(&mut self, u: &[Complex64]) -> Result<Vec<Complex64>, LabError> {
        let mut u = u.to_vec();
        hermitian(&mut u);
        let u = &u[..];
        let mut out = match self.cfg.integrator {
            Integrator::Gauss2 => self.gauss_step(u)?,
            Integrator::Etdrk4 => self.etd_step(u)?,
        };
        if let Some(f) = &self.filter {
            out.iter_mut().zip(f).for_each(|(z, s)| *z *= s);
        }
        hermitian(&mut out);
        if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LabError::NonFinite("evolution state"));
        }
        Ok(out)
    }

    /// One step of size `h()`.
    pub fn step(&mut self, state: &SampledField) -> Result<SampledField, LabError> {
        check_window(state, &self.cfg)?;
        let u = self.to_spec(&state.values);
        let out = self.step_spec(&u)?;
        if let Some(hist) = self.history.take() {
            let h = self.h;
            self.history = Some(History {
                u0: self.to_lab(&hist.u0, h),
                y: [self.to_lab(&hist.y[0], h), self.to_lab(&hist.y[1], h)],
                u1: self.to_lab(&hist.u1, h),
            });
        }
        Ok(SampledField::values_only(self.cfg.window, self.to_phys(&self.to_lab(&out, self.h))))
    }
}

/// Project onto spectra of real fields. Rounding breaks the symmetry slowly, and the
/// packed two-derivatives-per-transform evaluation turns the broken part into a
/// non-conservative flux.
fn hermitian(s: &mut [Complex64]) {
    let n = s.len();
    s[0].im = 0.0;
    s[n / 2] = Complex64::default();
    for k in 1..n / 2 {
        let a = (s[k] + s[n - k].conj()) * 0.5;
        s[k] = a;
        s[n - k] = a.conj();
    }
}

fn check_window(state: &SampledField, cfg: &EvolutionConfig) -> Result<(), LabError> {
    if state.window != cfg.window {
        return Err(LabError::Window(format!("state on {:?}, config on {:?}", state.window, cfg.window)));
    }
    if state.values.iter().any(|v| !v.is_finite()) {
        return Err(LabError::NonFinite("initial state"));
    }
    Ok(())
}

/// Largest spectral amplitude in the top third of wavenumbers relative to the peak.
pub fn spectral_tail(spec: &[Complex64]) -> f64 {
    let n = spec.len();
    let peak = spec.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    spec.iter()
        .enumerate()
        .filter(|(k, _)| 3 * (*k).min(n - *k) >= n)
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max)
        / peak
}

/// Advance `state` by one step of `cfg`.
pub fn step(state: &SampledField, cfg: EvolutionConfig) -> Result<SampledField, LabError> {
    Solver::new(cfg)?.step(state)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub field: SampledField,
    pub functionals: Vec<(Kind, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    /// `max_t |F(t) - F(0)| / |F(0)|` per monitored functional.
    pub drifts: Vec<(Kind, f64)>,
    pub steps: usize,
    pub newton_iterations: usize,
    pub gmres_iterations: usize,
    pub max_spectral_tail: f64,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn last(&self) -> &SampledField {
        &self.snapshots.last().expect("at least one snapshot").field
    }

    pub fn drift(&self, kind: Kind) -> Option<f64> {
        self.drifts.iter().find(|(k, _)| *k == kind).map(|(_, d)| *d)
    }
}

/// Energies that make sense as monitors for an evolution of `order`.
pub fn default_monitors(order: Order) -> Vec<Kind> {
    let mut m = vec![Kind::M, Kind::E];
    match order.n() {
        5 => m.push(Kind::E5),
        7 => m.push(Kind::E7),
        9 => m.push(Kind::E9),
        _ => {}
    }
    m
}

fn monitor(fourier: &Fourier, values: &[f64], monitors: &[Kind]) -> Result<Vec<(Kind, f64)>, LabError> {
    if monitors.is_empty() {
        return Ok(vec![]);
    }
    let f = SampledField::spectral(fourier, values.to_vec(), 4);
    monitors.iter().map(|&k| Ok((k, evaluate(&f, k, 0.0, 0.0, 0.0)?.value))).collect()
}

/// Run `cfg` from `u0`, recording snapshots and monitored functionals.
pub fn evolve(u0: &SampledField, cfg: EvolutionConfig, monitors: &[Kind]) -> Result<Trajectory, LabError> {
    check_window(u0, &cfg)?;
    let mut solver = Solver::new(cfg)?;
    let steps = if cfg.t_end == 0.0 { 0 } else { cfg.steps() };
    let h = solver.h();
    let every = cfg.snapshot_dt.map_or(steps.max(1), |s| ((s / h.abs()).round() as usize).max(1));
    let mut warnings = Vec::new();
    if cfg.dealias_pad < min_dealias_pad(cfg.order) {
        warnings.push(format!(
            "dealias_pad {} below {} for a degree-{} flux: aliased",
            cfg.dealias_pad,
            min_dealias_pad(cfg.order),
            cfg.order.flux_degree()
        ));
    }
    let mut u = solver.to_spec(&u0.values);
    let mut tail = spectral_tail(&u);
    let record = |solver: &Solver, t: f64, u: &[Complex64]| -> Result<Snapshot, LabError> {
        let values = solver.to_phys(&solver.to_lab(u, t));
        let functionals = monitor(solver.fourier(), &values, monitors)?;
        Ok(Snapshot { t, field: SampledField::values_only(cfg.window, values), functionals })
    };
    let mut snapshots = vec![record(&solver, 0.0, &u)?];
    for s in 1..=steps {
        u = solver.step_spec(&u)?;
        tail = tail.max(spectral_tail(&u));
        if s % every == 0 || s == steps {
            snapshots.push(record(&solver, s as f64 * h, &u)?);
        }
    }
    if tail > RESOLUTION_TOL {
        warnings.push(format!("spectral tail {tail:e} exceeds {RESOLUTION_TOL:e}: resolution lost"));
    }
    let drifts = monitors
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let f0 = snapshots[0].functionals[i].1;
            let d = snapshots.iter().map(|s| (s.functionals[i].1 - f0).abs()).fold(0.0, f64::max);
            (k, if f0 != 0.0 { d / f0.abs() } else { d })
        })
        .collect();
    Ok(Trajectory {
        snapshots,
        drifts,
        steps,
        newton_iterations: solver.newton_iterations,
        gmres_iterations: solver.gmres_iterations,
        max_spectral_tail: tail,
        warnings,
    })
}

/// Restarted GMRES with Givens rotations. Returns the last iterate, the iteration count and
/// the relative residual, which may exceed `rtol` once `max_iter` is spent.
pub fn gmres(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    b: &[f64],
    rtol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, f64), LabError> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let target = rtol * bnorm;
    let mut total = 0;
    let mut resid = bnorm;
    while total < max_iter {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = dot(&r, &r).sqrt();
        resid = beta;
        if beta <= target {
            return Ok((x, total, beta / bnorm));
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut hmat = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..restart {
            let mut w = apply(&v[j]);
            for i in 0..=j {
                let hij = dot(&w, &v[i]);
                hmat[i][j] = hij;
                w.iter_mut().zip(&v[i]).for_each(|(a, b)| *a -= hij * b);
            }
            let hn = dot(&w, &w).sqrt();
            hmat[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * hmat[i][j] + sn[i] * hmat[i + 1][j];
                hmat[i + 1][j] = -sn[i] * hmat[i][j] + cs[i] * hmat[i + 1][j];
                hmat[i][j] = t;
            }
            let d = hmat[j][j].hypot(hmat[j + 1][j]);
            if d == 0.0 {
                used = j;
                break;
            }
            cs[j] = hmat[j][j] / d;
            sn[j] = hmat[j + 1][j] / d;
            hmat[j][j] = d;
            hmat[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            total += 1;
            used = j + 1;
            resid = g[j + 1].abs();
            if resid <= target || hn == 0.0 || total >= max_iter {
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }
        let mut yv = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|k| hmat[i][k] * yv[k]).sum();
            yv[i] = (g[i] - s) / hmat[i][i];
        }
        for (i, yi) in yv.iter().enumerate() {
            x.iter_mut().zip(&v[i]).for_each(|(a, b)| *a += yi * b);
        }
        if resid <= target || used == 0 {
            break;
        }
    }
    if !resid.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(LabError::NonFinite("gmres iterate"));
    }
    Ok((x, total, resid / bnorm))
}

/// Which breather the fit compares against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    /// `B(t; x1, x2)`: the phases only absorb deviations from the exact motion.
    Moving,
    /// `B(0; x1, x2)`: the phases also carry the breather's own drift.
    Frozen,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationFit {
    pub x1: f64,
    pub x2: f64,
    pub distance: f64,
    pub gradient: f64,
    pub iterations: usize,
}

pub const FIT_MAX_ITERATIONS: usize = 50;
pub const FIT_GRADIENT_TOL: f64 = 1e-10;
/// Fits ending farther than this are not near the breather family.
pub const FIT_MAX_DISTANCE: f64 = 0.5;

struct FitEval {
    r: Vec<Complex64>,
    b1: Vec<Complex64>,
    b2: Vec<Complex64>,
    dist_sq: f64,
}

fn fit_eval(fourier: &Fourier, u: &[f64], p: &BreatherParams, t: f64, x1: f64, x2: f64) -> FitEval {
    let q = p.with_phases(x1, x2);
    let xs = fourier.window.points();
    let r: Vec<f64> = xs.iter().zip(u).map(|(&x, &v)| v - breather(&q, t, x)).collect();
    let (b1, b2): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .map(|&x| {
            let d = phase_derivatives(&q, t, x);
            (d.b1, d.b2)
        })
        .unzip();
    let r = fourier.forward(&r);
    let dist_sq = fourier.sobolev_sq_spec(&r, 2);
    FitEval { r, b1: fourier.forward(&b1), b2: fourier.forward(&b2), dist_sq }
}

/// Gauss-Newton fit of the translation phases in `H^2`, moving template.
pub fn fit_modulation(
    u: &SampledField,
    p: &BreatherParams,
    t: f64,
    seed: (f64, f64),
) -> Result<ModulationFit, LabError> {
    fit_modulation_with(&Fourier::new(u.window), u, p, t, seed, Template::Moving)
}

pub fn fit_modulation_with(
    fourier: &Fourier,
    u: &SampledField,
    p: &BreatherParams,
    t: f64,
    seed: (f64, f64),
    template: Template,
) -> Result<ModulationFit, LabError> {
    if u.values.iter().any(|v| !v.is_finite()) {
        return Err(LabError::NonFinite("fitted field"));
    }
    let tt = match template {
        Template::Moving => t,
        Template::Frozen => 0.0,
    };
    let (mut x1, mut x2) = seed;
    let mut e = fit_eval(fourier, &u.values, p, tt, x1, x2);
    let max_step = 1.0 / p.beta.min(p.alpha);
    for it in 0..FIT_MAX_ITERATIONS {
        let ip = |a: &[Complex64], b: &[Complex64]| fourier.sobolev_inner_spec(a, b, 2);
        let (m11, m12, m22) = (ip(&e.b1, &e.b1), ip(&e.b1, &e.b2), ip(&e.b2, &e.b2));
        let (g1, g2) = (ip(&e.b1, &e.r), ip(&e.b2, &e.r));
        let gradient = 2.0 * g1.hypot(g2);
        let det = m11 * m22 - m12 * m12;
        let (mut d1, mut d2) = ((m22 * g1 - m12 * g2) / det, (m11 * g2 - m12 * g1) / det);
        let len = d1.hypot(d2);
        if !len.is_finite() {
            return Err(LabError::NonFinite("modulation step"));
        }
        if len > max_step {
            d1 *= max_step / len;
            d2 *= max_step / len;
        }
        // H^2 weights lift the template's rounding noise to about 1e-9 in the gradient on fine
        // grids; a step this small means the fit sits on that floor
        let tiny = 1e-10 * (1.0 + x1.abs() + x2.abs());
        if d1.hypot(d2) <= tiny || gradient <= FIT_GRADIENT_TOL {
            let distance = e.dist_sq.sqrt();
            if distance > FIT_MAX_DISTANCE {
                return Err(LabError::Convergence { what: "modulation fit (far minimum)", iterations: it, residual: distance });
            }
            let period = 2.0 * std::f64::consts::PI / p.alpha;
            let x1 = x1 - ((x1 - seed.0) / period).round() * period;
            return Ok(ModulationFit { x1, x2, distance, gradient, iterations: it });
        }
        // backtrack until the distance does not increase
        let mut lam = 1.0;
        loop {
            let trial = fit_eval(fourier, &u.values, p, tt, x1 + lam * d1, x2 + lam * d2);
            if trial.dist_sq <= e.dist_sq * (1.0 + 1e-14) || lam < 1e-6 {
                x1 += lam * d1;
                x2 += lam * d2;
                e = trial;
                break;
            }
            lam *= 0.5;
        }
    }
    Err(LabError::Convergence { what: "modulation fit", iterations: FIT_MAX_ITERATIONS, residual: e.dist_sq.sqrt() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityConfig {
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_dt: f64,
    pub seed: u64,
    pub dealias_pad: Option<usize>,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self { n: 2048, dt: 2e-3, t_end: 5.0, snapshot_dt: 0.05, seed: 0, dealias_pad: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub params: ParamsRecord,
    pub shape: Shape,
    pub eta: f64,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub drifts: Vec<(Kind, f64)>,
    pub sup_distance: f64,
    /// `max_k (|x1(t_{k+1}) - x1(t_k)| + |x2(t_{k+1}) - x2(t_k)|) / (t_{k+1} - t_k)`.
    pub max_phase_rate: f64,
    pub warnings: Vec<String>,
}

/// Window holding the breather over `[0, t_end]` with `DECAY_LENGTHS / beta` of margin.
pub fn breather_window(p: &BreatherParams, t_end: f64, n: usize) -> Result<Window, LabError> {
    let drift = (p.vel.gamma * t_end).abs() / 2.0;
    Window::new(p.center(t_end / 2.0), crate::grid::DECAY_LENGTHS / p.beta + drift, n)
}

/// Perturb `B(0)` by `eta` along `shape`, evolve and track the modulated distance.
pub fn stability_experiment(
    p: &BreatherParams,
    eta: f64,
    shape: Shape,
    cfg: &StabilityConfig,
) -> Result<StabilityReport, LabError> {
    if !(0.0..=0.1).contains(&eta) {
        return Err(LabError::Config(format!("eta = {eta} outside [0, 0.1]")));
    }
    let mut ecfg = EvolutionConfig::for_breather(p, cfg.n, cfg.dt, cfg.t_end)?;
    let window = ecfg.window;
    let fourier = Fourier::new(window);
    let b0 = SampledField::breather(p, 0.0, window, 0)?;
    let u0 = if eta > 0.0 { b0.axpy(1.0, &perturbation(&fourier, shape, p, 0.0, cfg.seed, eta, 0)?) } else { b0 };
    ecfg.snapshot_dt = Some(cfg.snapshot_dt);
    if let Some(pad) = cfg.dealias_pad {
        ecfg.dealias_pad = pad;
    }
    let traj = evolve(&u0, ecfg, &default_monitors(p.order))?;
    let mut seed = (p.x1, p.x2);
    let (mut times, mut distances, mut x1, mut x2) = (vec![], vec![], vec![], vec![]);
    for s in &traj.snapshots {
        let fit = fit_modulation_with(&fourier, &s.field, p, s.t, seed, Template::Moving)?;
        seed = (fit.x1, fit.x2);
        times.push(s.t);
        distances.push(fit.distance);
        x1.push(fit.x1);
        x2.push(fit.x2);
    }
    let max_phase_rate = (1..times.len())
        .map(|k| ((x1[k] - x1[k - 1]).abs() + (x2[k] - x2[k - 1]).abs()) / (times[k] - times[k - 1]))
        .fold(0.0, f64::max);
    Ok(StabilityReport {
        params: ParamsRecord::breather(p, 0.0),
        shape,
        eta,
        sup_distance: distances.iter().copied().fold(0.0, f64::max),
        times,
        distances,
        x1,
        x2,
        drifts: traj.drifts,
        max_phase_rate,
        warnings: traj.warnings,
    })
}
