//! Conserved quantities, Lyapunov functionals and Sobolev norms by trapezoid quadrature.
//!
//! On a periodic window the trapezoid rule is spectrally accurate for smooth,
//! rapidly decaying integrands.

use mkdv_core::{partial_mass_t, velocities, BreatherParams, Density, Order};
use serde::{Deserialize, Serialize};

use crate::grid::{Fourier, SampledField};
use crate::LabError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    M,
    E,
    E5,
    E7,
    E9,
    H0,
    H5,
    H7,
    H9,
    H,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub kind: Kind,
    pub value: f64,
    pub tail_warning: bool,
}

fn integrate(f: &SampledField, d: Density) -> Result<f64, LabError> {
    let need = d.derivatives();
    if f.max_derivative() < need {
        return Err(LabError::MissingDerivatives { need, have: f.max_derivative() });
    }
    let mut jet = vec![0.0; need + 1];
    let mut s = 0.0;
    for j in 0..f.window.n {
        f.jet(j, &mut jet);
        s += d.eval(&jet);
    }
    Ok(s * f.window.dx())
}

fn value(kind: Kind, f: &SampledField, v: f64) -> FunctionalValue {
    FunctionalValue { kind, value: v, tail_warning: f.tail_warning() }
}

/// `(1/2) int u^2`.
pub fn mass(f: &SampledField) -> FunctionalValue {
    value(Kind::M, f, integrate(f, Density::Mass).expect("values always present"))
}

/// `(1/2) int (u_x^2 - u^4)`.
pub fn energy(f: &SampledField) -> Result<FunctionalValue, LabError> {
    Ok(value(Kind::E, f, integrate(f, Density::Energy)?))
}

pub fn higher_energy(f: &SampledField, kind: Kind) -> Result<FunctionalValue, LabError> {
    let d = match kind {
        Kind::E5 => Density::E5,
        Kind::E7 => Density::E7,
        Kind::E9 => Density::E9,
        _ => return Err(LabError::Config(format!("{kind:?} is not a higher energy"))),
    };
    Ok(value(kind, f, integrate(f, d)?))
}

pub fn density_integral(f: &SampledField, d: Density) -> Result<f64, LabError> {
    integrate(f, d)
}

/// Soliton Lyapunov functionals `E_n +- c^k M` for the scaling `c`.
pub fn lyapunov_soliton(f: &SampledField, c: f64, kind: Kind) -> Result<FunctionalValue, LabError> {
    let m = mass(f).value;
    let v = match kind {
        Kind::H0 => energy(f)?.value + c * m,
        Kind::H5 => higher_energy(f, Kind::E5)?.value - c * c * m,
        Kind::H7 => higher_energy(f, Kind::E7)?.value + c * c * c * m,
        Kind::H9 => higher_energy(f, Kind::E9)?.value - c * c * c * c * m,
        _ => return Err(LabError::Config(format!("{kind:?} is not a soliton functional"))),
    };
    Ok(value(kind, f, v))
}

/// `E5 + 2(b^2 - a^2) E + (a^2 + b^2)^2 M`, the breather Lyapunov functional.
pub fn lyapunov(f: &SampledField, alpha: f64, beta: f64) -> Result<FunctionalValue, LabError> {
    let (a2, b2) = (alpha * alpha, beta * beta);
    let v = higher_energy(f, Kind::E5)?.value
        + 2.0 * (b2 - a2) * energy(f)?.value
        + (a2 + b2) * (a2 + b2) * mass(f).value;
    Ok(value(Kind::H, f, v))
}

/// Any functional by kind; `c` is the soliton scaling for `H0..H9`, `(alpha, beta)` feed `H`.
pub fn evaluate(f: &SampledField, kind: Kind, c: f64, alpha: f64, beta: f64) -> Result<FunctionalValue, LabError> {
    match kind {
        Kind::M => Ok(mass(f)),
        Kind::E => energy(f),
        Kind::E5 | Kind::E7 | Kind::E9 => higher_energy(f, kind),
        Kind::H0 | Kind::H5 | Kind::H7 | Kind::H9 => lyapunov_soliton(f, c, kind),
        Kind::H => lyapunov(f, alpha, beta),
    }
}

/// `H^s` norm, `s <= 2`, with Fourier weight `(1 + k^2)^s` on the window.
pub fn sobolev_norm(f: &SampledField, s: u32) -> f64 {
    Fourier::new(f.window).sobolev_sq(&f.values, s).sqrt()
}

/// Breather mass `2b`.
pub fn breather_mass(beta: f64) -> f64 {
    2.0 * beta
}

/// Breather energy `(2/3) b (3a^2 - b^2)`, the same for every order.
pub fn breather_energy(alpha: f64, beta: f64) -> f64 {
    2.0 / 3.0 * beta * (3.0 * alpha * alpha - beta * beta)
}

/// `E_n[B] = (-1)^(k+1) (2b/n) gamma_n` for `n = 2k + 1`, with the tabulated envelope speed.
pub fn breather_higher_energy(order: Order, alpha: f64, beta: f64) -> f64 {
    let k = order.half();
    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
    sign * 2.0 * beta / order.n() as f64 * velocities(order, alpha, beta).gamma
}

/// The conjectured closed form with its own alternating binomial sum for `gamma`.
pub fn conjectured_energy(order: Order, alpha: f64, beta: f64) -> f64 {
    let n = order.n() as u64;
    let k = order.half() as u64;
    let binom = |a: u64, b: u64| (0..b).fold(1.0, |acc, i| acc * (a - i) as f64 / (i + 1) as f64);
    let gamma: f64 = (0..=k)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            s * binom(n, 2 * j) * alpha.powi(2 * j as i32) * beta.powi(2 * (k - j) as i32)
        })
        .sum();
    let sign = if (k + 1) % 2 == 0 { 1.0 } else { -1.0 };
    sign * 2.0 * beta / n as f64 * gamma
}

/// `int d_t M(t, x) dx` by quadrature of the closed-form density.
pub fn mass_flux_integral(p: &BreatherParams, t: f64, f_window: crate::grid::Window) -> f64 {
    (0..f_window.n).map(|j| partial_mass_t(p, t, f_window.x(j))).sum::<f64>() * f_window.dx()
}

/// `2 b gamma_n`, the value of `int d_t M` over the line.
pub fn mass_flux_closed_form(p: &BreatherParams) -> f64 {
    2.0 * p.beta * p.vel.gamma
}

/// Coefficient `r` in `E_n[B] = r int d_t M`: `-1/5`, `+1/7`, `-1/9` (sign alternates with the energy).
pub fn reduction_coefficient(order: Order) -> Option<f64> {
    match order {
        Order::Five => Some(-1.0 / 5.0),
        Order::Seven => Some(1.0 / 7.0),
        Order::Nine => Some(-1.0 / 9.0),
        _ => None,
    }
}

/// Coefficients as typeset: `-1/5`, `+1/7`, `+1/9`.
pub fn reduction_coefficient_printed(order: Order) -> Option<f64> {
    match order {
        Order::Five => Some(-1.0 / 5.0),
        Order::Seven => Some(1.0 / 7.0),
        Order::Nine => Some(1.0 / 9.0),
        _ => None,
    }
}

/// The quadratic form of the linearized operator in its integrated-by-parts layout.
pub fn quadratic_form(p: &BreatherParams, t: f64, z: &SampledField) -> Result<f64, LabError> {
    if z.max_derivative() < 2 {
        return Err(LabError::MissingDerivatives { need: 2, have: z.max_derivative() });
    }
    let b = SampledField::breather(p, t, z.window, 1)?;
    let (a2, b2) = (p.alpha * p.alpha, p.beta * p.beta);
    let s = b2 - a2;
    let c0 = p.c0();
    let mut acc = 0.0;
    for j in 0..z.window.n {
        let (z0, z1, z2) = (z.values[j], z.derivs[0][j], z.derivs[1][j]);
        let (u, ux) = (b.values[j], b.derivs[0][j]);
        let u2 = u * u;
        acc += z2 * z2 + 2.0 * s * z1 * z1 + c0 * z0 * z0 - 10.0 * u2 * z1 * z1 - 10.0 * ux * ux * z0 * z0
            - 40.0 * u * ux * z0 * z1
            + 30.0 * u2 * u2 * z0 * z0
            - 12.0 * s * u2 * z0 * z0;
    }
    Ok(acc * z.window.dx())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    /// Half the quadratic form.
    pub quadratic: f64,
    /// `H[B + z] - H[B] - Q[z] / 2`.
    pub remainder: f64,
}

/// Largest `H^2` size of `z` for which the cubic bound is tested.
pub const EXPANSION_MAX_NORM: f64 = 0.1;

pub fn expansion_remainder(p: &BreatherParams, z: &SampledField, t: f64) -> Result<Expansion, LabError> {
    let norm = sobolev_norm(z, 2);
    if norm > EXPANSION_MAX_NORM {
        return Err(LabError::TooLarge(norm));
    }
    if z.max_derivative() < 2 {
        return Err(LabError::MissingDerivatives { need: 2, have: z.max_derivative() });
    }
    let b = SampledField::breather(p, t, z.window, 2)?;
    let (a2, b2) = (p.alpha * p.alpha, p.beta * p.beta);
    let (ce, cm) = (2.0 * (b2 - a2), p.c0());
    let h = |u: &[f64]| Density::E5.eval(u) + ce * Density::Energy.eval(u) + cm * Density::Mass.eval(u);
    let (mut ub, mut uz) = ([0.0; 3], [0.0; 3]);
    let mut diff = 0.0;
    for j in 0..z.window.n {
        b.jet(j, &mut ub);
        z.jet(j, &mut uz);
        let sum = [ub[0] + uz[0], ub[1] + uz[1], ub[2] + uz[2]];
        diff += h(&sum) - h(&ub);
    }
    diff *= z.window.dx();
    let quadratic = 0.5 * quadratic_form(p, t, z)?;
    Ok(Expansion { quadratic, remainder: diff - quadratic })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Window;
    use approx::assert_relative_eq;
    use mkdv_core::SolitonParams;

    #[test]
    fn soliton_mass_and_energy() {
        let p = SolitonParams::new(Order::Five, 1.0).unwrap();
        let w = Window::new(0.0, 40.0, 2048).unwrap();
        let f = SampledField::soliton(&p, 0.0, w, 2).unwrap();
        assert_relative_eq!(mass(&f).value, 1.0, epsilon = 1e-12);
        assert_relative_eq!(energy(&f).unwrap().value, -1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_field_gives_zero() {
        let w = Window::new(0.0, 10.0, 256).unwrap();
        let f = SampledField::zeros(w, 4);
        for k in [Kind::M, Kind::E, Kind::E5, Kind::E7, Kind::E9, Kind::H0, Kind::H5, Kind::H7, Kind::H9, Kind::H] {
            assert_eq!(evaluate(&f, k, 1.0, 1.0, 1.0).unwrap().value, 0.0);
        }
        assert_eq!(sobolev_norm(&f, 2), 0.0);
        let e = expansion_remainder(&BreatherParams::centered(Order::Five, 1.0, 1.0).unwrap(), &f, 0.0).unwrap();
        assert_eq!((e.quadratic, e.remainder), (0.0, 0.0));
    }

    #[test]
    fn missing_derivatives_are_reported() {
        let w = Window::new(0.0, 10.0, 256).unwrap();
        let f = SampledField::zeros(w, 2);
        assert!(matches!(higher_energy(&f, Kind::E9), Err(LabError::MissingDerivatives { need: 4, .. })));
    }

    #[test]
    fn closed_form_values() {
        assert_relative_eq!(breather_energy(1.0, 1.0), 4.0 / 3.0);
        assert_relative_eq!(breather_higher_energy(Order::Five, 1.0, 1.0), -8.0 / 5.0);
        assert_relative_eq!(breather_higher_energy(Order::Seven, 1.0, 1.0), -16.0 / 7.0);
        assert_relative_eq!(breather_higher_energy(Order::Three, 1.3, 0.4), breather_energy(1.3, 0.4), epsilon = 1e-14);
    }

    #[test]
    fn conjecture_is_the_negative_of_the_closed_forms() {
        for order in [Order::Three, Order::Five, Order::Seven, Order::Nine] {
            let (a, b) = (0.8, 1.7);
            assert_relative_eq!(conjectured_energy(order, a, b), -breather_higher_energy(order, a, b), max_relative = 1e-13);
        }
    }

    #[test]
    fn tail_warning_flags_truncated_fields() {
        let p = BreatherParams::centered(Order::Five, 1.0, 1.0).unwrap();
        let w = Window::new(0.0, 5.0, 256).unwrap();
        let f = SampledField::breather(&p, 0.0, w, 2).unwrap();
        assert!(mass(&f).tail_warning);
    }
}
