//! Fourier-collocation discretization of the linearized operator around a breather.
//!
//! The operator is assembled in divergence form,
//! `D^4 - 2s D^2 + c0 + D (10 B^2) D + V`, with `V = 10 B_x^2 + 20 B B_xx + 30 B^4 - 12 s B^2`,
//! so that the matrix is symmetric up to rounding.

use std::io::Write;
use std::path::Path;

use mkdv_core::{breather_jet, phase_derivatives, wronskian, BreatherParams};
use nalgebra::{DMatrix, SymmetricEigen};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::{Fourier, SampledField, Window};
use crate::identities::{ParamsRecord, ResidualReport, VERBATIM};
use crate::LabError;

/// Matrix-free linearized operator on one window.
#[derive(Clone, Debug)]
pub struct Linearized {
    pub params: BreatherParams,
    pub t: f64,
    pub fourier: Fourier,
    /// `10 B^2`.
    pub diffusion: Vec<f64>,
    pub potential: Vec<f64>,
    pub breather: Vec<f64>,
}

impl Linearized {
    pub fn new(p: &BreatherParams, t: f64, window: Window) -> Result<Self, LabError> {
        let s = p.beta * p.beta - p.alpha * p.alpha;
        let n = window.n;
        let (mut diffusion, mut potential, mut breather) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for j in 0..n {
            let jet = breather_jet(p, t, window.x(j), 2)?;
            let (b, bx, bxx) = (jet.dx(0), jet.dx(1), jet.dx(2));
            let b2 = b * b;
            breather[j] = b;
            diffusion[j] = 10.0 * b2;
            potential[j] = 10.0 * bx * bx + 20.0 * b * bxx + 30.0 * b2 * b2 - 12.0 * s * b2;
        }
        Ok(Self { params: *p, t, fourier: Fourier::new(window), diffusion, potential, breather })
    }

    /// The constant-coefficient operator obtained by dropping the breather.
    pub fn free(p: &BreatherParams, window: Window) -> Self {
        let n = window.n;
        Self {
            params: *p,
            t: 0.0,
            fourier: Fourier::new(window),
            diffusion: vec![0.0; n],
            potential: vec![0.0; n],
            breather: vec![0.0; n],
        }
    }

    pub fn window(&self) -> Window {
        self.fourier.window
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let f = &self.fourier;
        let p = &self.params;
        let s = p.beta * p.beta - p.alpha * p.alpha;
        let c0 = p.c0();
        let spec = f.forward(z);
        let (s1, s2, s4) = (f.symbol(1), f.symbol(2), f.symbol(4));
        let lin: Vec<Complex64> =
            spec.iter().zip(s2.iter().zip(&s4)).map(|(u, (k2, k4))| u * (k4 - 2.0 * s * k2 + c0)).collect();
        let mut out = f.inverse_real(&lin);
        let zx = f.inverse_real(&spec.iter().zip(&s1).map(|(u, k)| u * k).collect::<Vec<_>>());
        let w: Vec<f64> = zx.iter().zip(&self.diffusion).map(|(a, b)| a * b).collect();
        let ws = f.forward(&w);
        let wx = f.inverse_real(&ws.iter().zip(&s1).map(|(u, k)| u * k).collect::<Vec<_>>());
        for j in 0..out.len() {
            out[j] += wx[j] + self.potential[j] * z[j];
        }
        out
    }

    /// `int u L[v]` by the trapezoid rule.
    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        dot(u, &self.apply(v)) * self.window().dx()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub op: Linearized,
    pub matrix: DMatrix<f64>,
    /// `max |A - A^T| / max |A|` before symmetrization.
    pub asymmetry: f64,
}

/// Half-width of the eigenproblem window in units of `1 / beta`; tails sit near `exp(-20)`.
pub const SPECTRAL_DECAY_LENGTHS: f64 = 20.0;

pub fn spectral_window(p: &BreatherParams, t: f64, n: usize) -> Result<Window, LabError> {
    Window::new(p.center(t), SPECTRAL_DECAY_LENGTHS / p.beta, n)
}

pub fn build_operator(p: &BreatherParams, t: f64, w: Window) -> Result<DiscreteOperator, LabError> {
    if !w.covers(p, t) {
        return Err(LabError::Window(format!("window {w:?} does not cover the breather at t = {t}")));
    }
    Ok(assemble(Linearized::new(p, t, w)?))
}

/// Dense matrix of a matrix-free operator, column by column.
pub fn assemble(op: Linearized) -> DiscreteOperator {
    let n = op.window().n;
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = op.apply(&e);
        e[j] = 0.0;
        m.column_mut(j).copy_from_slice(&col);
    }
    let amax = m.amax();
    let asymmetry = (&m - m.transpose()).amax() / amax;
    let matrix = (&m + m.transpose()) * 0.5;
    DiscreteOperator { op, matrix, asymmetry }
}

/// Translation and scaling directions sampled on a window.
#[derive(Clone, Debug)]
pub struct DirectionVectors {
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub lambda_alpha: Vec<f64>,
    pub lambda_beta: Vec<f64>,
    pub b0: Vec<f64>,
}

fn sample(p: &BreatherParams, t: f64, w: Window) -> Vec<f64> {
    (0..w.n).map(|j| mkdv_core::breather(p, t, w.x(j))).collect()
}

/// Central difference in one parameter with one Richardson step.
fn parameter_derivative(
    h: f64,
    at: impl Fn(f64) -> Result<Vec<f64>, LabError>,
) -> Result<Vec<f64>, LabError> {
    let diff = |h: f64| -> Result<Vec<f64>, LabError> {
        let (a, b) = (at(h)?, at(-h)?);
        Ok(a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect())
    };
    let (d1, d2) = (diff(h)?, diff(0.5 * h)?);
    Ok(d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect())
}

/// Step used for the parameter differences.
pub fn parameter_step(x: f64) -> f64 {
    1e-3 * x.max(1.0)
}

pub fn directions(p: &BreatherParams, t: f64, w: Window) -> Result<DirectionVectors, LabError> {
    let (mut b1, mut b2) = (vec![0.0; w.n], vec![0.0; w.n]);
    for j in 0..w.n {
        let d = phase_derivatives(p, t, w.x(j));
        b1[j] = d.b1;
        b2[j] = d.b2;
    }
    let lambda_alpha =
        parameter_derivative(parameter_step(p.alpha), |h| Ok(sample(&p.with_alpha(p.alpha + h)?, t, w)))?;
    let lambda_beta =
        parameter_derivative(parameter_step(p.beta), |h| Ok(sample(&p.with_beta(p.beta + h)?, t, w)))?;
    let (a, b) = (p.alpha, p.beta);
    let norm = 8.0 * a * b * (a * a + b * b);
    let b0 = lambda_beta.iter().zip(&lambda_alpha).map(|(lb, la)| (a * lb + b * la) / norm).collect();
    Ok(DirectionVectors { b1, b2, lambda_alpha, lambda_beta, b0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingForms {
    /// `int Lambda_alpha B L[Lambda_alpha B]`, expected `16 a^2 b`.
    pub alpha: f64,
    /// `int Lambda_beta B L[Lambda_beta B]`, expected `-16 a^2 b`.
    pub beta: f64,
    pub expected: f64,
}

pub fn scaling_forms(op: &Linearized, dirs: &DirectionVectors) -> ScalingForms {
    let p = &op.params;
    ScalingForms {
        alpha: op.form(&dirs.lambda_alpha, &dirs.lambda_alpha),
        beta: op.form(&dirs.lambda_beta, &dirs.lambda_beta),
        expected: 16.0 * p.alpha * p.alpha * p.beta,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct B0Relations {
    /// `int B0 B`, expected `1 / (4 b (a^2 + b^2))`.
    pub mass: f64,
    /// `(1/2) int B0 L[B0]`, expected `-1 / (8 b (a^2 + b^2))`.
    pub form: f64,
    /// `|L[B0] + B| / |B|` in `L^2`.
    pub residual: f64,
    pub expected_mass: f64,
    pub expected_form: f64,
}

pub fn b0_relations(op: &Linearized, dirs: &DirectionVectors) -> B0Relations {
    let p = &op.params;
    let dx = op.window().dx();
    let lb0 = op.apply(&dirs.b0);
    let r: Vec<f64> = lb0.iter().zip(&op.breather).map(|(a, b)| a + b).collect();
    let k = p.beta * (p.alpha * p.alpha + p.beta * p.beta);
    B0Relations {
        mass: dot(&dirs.b0, &op.breather) * dx,
        form: 0.5 * dot(&dirs.b0, &lb0) * dx,
        residual: l2(&r) / l2(&op.breather),
        expected_mass: 1.0 / (4.0 * k),
        expected_form: -1.0 / (8.0 * k),
    }
}

/// Numerical `B1 B2_x - B2 B1_x` against its closed form at the points `xs`.
pub fn wronskian_check(p: &BreatherParams, t: f64, xs: &[f64]) -> ResidualReport {
    let (mut sup, mut scale) = (0.0f64, 0.0f64);
    for &x in xs {
        let d = phase_derivatives(p, t, x);
        let (u, v) = (d.b1 * d.b2_x, d.b2 * d.b1_x);
        sup = sup.max((u - v - wronskian(p, t, x)).abs());
        scale = scale.max(u.abs()).max(v.abs());
    }
    ResidualReport {
        identity_id: "wronskian".into(),
        variant: VERBATIM.into(),
        params: ParamsRecord::breather(p, t),
        sample_spec: format!("{} points in [{}, {}]", xs.len(), xs.first().unwrap_or(&0.0), xs.last().unwrap_or(&0.0)),
        samples: xs.len(),
        sup_residual: sup,
        rel_scale: scale,
    }
}

/// Bottom of the essential spectrum: `(a^2 + b^2)^2` if `b >= a`, else `4 a^2 b^2`.
pub fn continuum_edge(alpha: f64, beta: f64) -> f64 {
    if beta >= alpha {
        let s = alpha * alpha + beta * beta;
        s * s
    } else {
        4.0 * alpha * alpha * beta * beta
    }
}

pub fn kernel_tol(alpha: f64, beta: f64) -> f64 {
    let s = alpha * alpha + beta * beta;
    1e-6 * s * s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub params: ParamsRecord,
    pub n_points: usize,
    pub half_width: f64,
    pub negative_eigenvalues: Vec<f64>,
    pub kernel_eigenvalues: Vec<f64>,
    pub kernel_tol: f64,
    pub continuum_edge_estimate: f64,
    pub continuum_edge: f64,
    pub lambda0_sq: f64,
    pub lowest: Vec<f64>,
    pub asymmetry: f64,
}

impl SpectrumSummary {
    pub fn kernel_dimension(&self) -> usize {
        self.kernel_eigenvalues.len()
    }
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    pub summary: SpectrumSummary,
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn negative_eigenvector(&self) -> Option<Vec<f64>> {
        (self.values[0] < -self.summary.kernel_tol).then(|| self.vectors.column(0).iter().copied().collect())
    }
}

/// Share of the `L^2` mass at distance more than `10 / beta` from the envelope.
fn far_fraction(v: &[f64], w: Window, center: f64, beta: f64) -> f64 {
    let total = dot(v, v);
    let far: f64 = (0..w.n).filter(|&j| (w.x(j) - center).abs() > 10.0 / beta).map(|j| v[j] * v[j]).sum();
    far / total
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), idx.len(), |r, c| eig.eigenvectors[(r, idx[c])]);
    (values, vectors)
}

pub fn spectrum(opr: &DiscreteOperator) -> Result<Spectrum, LabError> {
    if opr.matrix.iter().any(|v| !v.is_finite()) {
        return Err(LabError::NonFinite("operator matrix"));
    }
    let (values, vectors) = sorted_eigen(opr.matrix.clone());
    let p = &opr.op.params;
    let w = opr.op.window();
    let tol = kernel_tol(p.alpha, p.beta);
    let center = p.center(opr.op.t);
    let edge_estimate = (0..values.len())
        .filter(|&i| values[i] > tol)
        .find(|&i| far_fraction(vectors.column(i).as_slice(), w, center, p.beta) > 0.5)
        .map(|i| values[i])
        .unwrap_or(f64::NAN);
    let negative: Vec<f64> = values.iter().copied().filter(|&v| v < -tol).collect();
    let summary = SpectrumSummary {
        params: ParamsRecord::breather(p, opr.op.t),
        n_points: w.n,
        half_width: w.half_width,
        lambda0_sq: negative.first().map(|v| -v).unwrap_or(0.0),
        negative_eigenvalues: negative,
        kernel_eigenvalues: values.iter().copied().filter(|v| v.abs() <= tol).collect(),
        kernel_tol: tol,
        continuum_edge_estimate: edge_estimate,
        continuum_edge: continuum_edge(p.alpha, p.beta),
        lowest: values.iter().take(8).copied().collect(),
        asymmetry: opr.asymmetry,
    };
    Ok(Spectrum { summary, values, vectors })
}

/// Multiply every column by the circulant with the given real Fourier symbol.
fn circulant_columns(f: &Fourier, symbol: &[f64], m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut spec = f.forward(col.as_slice());
        for (c, s) in spec.iter_mut().zip(symbol) {
            *c *= s;
        }
        col.copy_from_slice(&f.inverse_real(&spec));
    }
}

/// Minimum of `Q[z] / |z|_{H^2}^2` over `z` that are `L^2`-orthogonal to `constraints`.
pub fn coercivity_with(opr: &DiscreteOperator, constraints: &[&[f64]]) -> Result<f64, LabError> {
    let f = &opr.op.fourier;
    let n = f.window.n;
    // S^{-1/2} has symbol 1 / (1 + k^2); the H^2 Gram matrix is S.
    let symbol: Vec<f64> = f.k.iter().map(|k| 1.0 / (1.0 + k * k)).collect();
    let mut reduced = opr.matrix.clone();
    circulant_columns(f, &symbol, &mut reduced);
    reduced.transpose_mut();
    circulant_columns(f, &symbol, &mut reduced);
    let mut q = DMatrix::zeros(n, constraints.len());
    for (i, c) in constraints.iter().enumerate() {
        let mut v = DMatrix::from_column_slice(n, 1, c);
        circulant_columns(f, &symbol, &mut v);
        let scale = v.norm();
        for j in 0..i {
            let proj = q.column(j).dot(&v.column(0));
            v.column_mut(0).axpy(-proj, &q.column(j), 1.0);
        }
        let r = v.norm();
        if r <= 1e-8 * scale {
            return Err(LabError::Config("constraint set is rank deficient".into()));
        }
        q.set_column(i, &(v.column(0) / r));
    }
    // P A P + shift Q Q^T with P = I - Q Q^T, expanded to rank-k updates
    let aq = &reduced * &q;
    let qaq = q.transpose() * &aq;
    let shift = 10.0 * (1.0 + reduced.amax());
    let mut restricted = reduced - &aq * q.transpose() - &q * aq.transpose()
        + &q * (qaq + DMatrix::identity(q.ncols(), q.ncols()) * shift) * q.transpose();
    restricted = (&restricted + restricted.transpose()) * 0.5;
    let eig = SymmetricEigen::new(restricted);
    Ok(eig.eigenvalues.min())
}

/// `nu0` with the negative eigenvector and both translation directions removed.
pub fn coercivity(opr: &DiscreteOperator, dirs: &DirectionVectors, negative: &[f64]) -> Result<f64, LabError> {
    coercivity_with(opr, &[negative, &dirs.b1, &dirs.b2])
}

/// Row-major little-endian `f64` dump behind a header of three `i64`: `n, n, 1`.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<(), LabError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for h in [m.nrows() as i64, m.ncols() as i64, 1] {
        out.write_all(&h.to_le_bytes())?;
    }
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Breather values as a sampled field, for callers that want the profile with the operator.
pub fn breather_field(op: &Linearized) -> SampledField {
    SampledField { window: op.window(), values: op.breather.clone(), derivs: Vec::new() }
}
