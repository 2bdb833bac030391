//! Exact pointwise evaluation of breathers, solitons and their x-derivatives.

use crate::order::{soliton_speed, velocities, Order, Velocities};
use crate::series::{factorial, Series, LEN};
use crate::Error;

/// Highest x-derivative a jet can carry. The order-11 evolution identity needs `u_{10x}`.
pub const MAX_JET: usize = LEN - 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BreatherParams {
    pub order: Order,
    pub alpha: f64,
    pub beta: f64,
    pub x1: f64,
    pub x2: f64,
    pub vel: Velocities,
}

impl BreatherParams {
    pub fn new(order: Order, alpha: f64, beta: f64, x1: f64, x2: f64) -> Result<Self, Error> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter("alpha must be positive and finite"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter("beta must be positive and finite"));
        }
        if !(x1.is_finite() && x2.is_finite()) {
            return Err(Error::InvalidParameter("phases must be finite"));
        }
        Ok(Self { order, alpha, beta, x1, x2, vel: velocities(order, alpha, beta) })
    }

    pub fn centered(order: Order, alpha: f64, beta: f64) -> Result<Self, Error> {
        Self::new(order, alpha, beta, 0.0, 0.0)
    }

    pub fn with_phases(mut self, x1: f64, x2: f64) -> Self {
        self.x1 = x1;
        self.x2 = x2;
        self
    }

    /// Replace the velocities, e.g. to test an alternative reading of a speed polynomial.
    pub fn with_velocities(mut self, vel: Velocities) -> Self {
        self.vel = vel;
        self
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self, Error> {
        Self::new(self.order, alpha, self.beta, self.x1, self.x2)
    }

    pub fn with_beta(self, beta: f64) -> Result<Self, Error> {
        Self::new(self.order, self.alpha, beta, self.x1, self.x2)
    }

    pub fn y(&self, t: f64, x: f64) -> (f64, f64) {
        (x + self.vel.delta * t + self.x1, x + self.vel.gamma * t + self.x2)
    }

    /// Envelope centre at time `t`.
    pub fn center(&self, t: f64) -> f64 {
        -self.vel.gamma * t - self.x2
    }

    /// `(a^2 + b^2)^2`.
    pub fn c0(&self) -> f64 {
        let s = self.alpha * self.alpha + self.beta * self.beta;
        s * s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolitonParams {
    pub order: Order,
    pub c: f64,
}

impl SolitonParams {
    pub fn new(order: Order, c: f64) -> Result<Self, Error> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter("c must be positive and finite"));
        }
        Ok(Self { order, c })
    }

    pub fn speed(&self) -> f64 {
        soliton_speed(self.order, self.c)
    }
}

/// Value and x-derivatives of a solution at one point, plus the time derivative
/// of its antiderivative profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    d: [f64; MAX_JET + 1],
    m: usize,
    pub dt_tilde: f64,
}

impl Jet {
    /// Build from `u, u_x, ..., u_{mx}`.
    pub fn from_derivatives(ders: &[f64], dt_tilde: f64) -> Result<Self, Error> {
        if ders.is_empty() || ders.len() > MAX_JET + 1 {
            return Err(Error::JetOrder { requested: ders.len().saturating_sub(1), max: MAX_JET });
        }
        let mut d = [0.0; MAX_JET + 1];
        d[..ders.len()].copy_from_slice(ders);
        Ok(Self { d, m: ders.len() - 1, dt_tilde })
    }

    pub fn value(&self) -> f64 {
        self.d[0]
    }

    /// `k`-th x-derivative, `k <= order()`.
    pub fn dx(&self, k: usize) -> f64 {
        assert!(k <= self.m, "derivative {k} beyond jet order {}", self.m);
        self.d[k]
    }

    pub fn order(&self) -> usize {
        self.m
    }

    /// `u, u_x, ..., u_{mx}`.
    pub fn as_slice(&self) -> &[f64] {
        &self.d[..=self.m]
    }

    pub fn neg(&self) -> Self {
        let mut out = *self;
        for v in out.d.iter_mut() {
            *v = -*v;
        }
        out.dt_tilde = -out.dt_tilde;
        out
    }
}

fn check_order(m: usize) -> Result<(), Error> {
    if m > MAX_JET {
        return Err(Error::JetOrder { requested: m, max: MAX_JET });
    }
    Ok(())
}

/// `2 atan(G/F)` expanded along the direction `(a, b)` in the `(y1, y2)` plane.
fn phi_series(alpha: f64, beta: f64, y1: f64, y2: f64, a: f64, b: f64) -> Series {
    let sech = 1.0 / libm::cosh(beta * y2);
    let g = Series::sin_shift(alpha * a, alpha * y1).scale(beta / alpha * sech);
    let f = Series::cosh_ratio(beta * b, libm::tanh(beta * y2));
    g.div(f).atan().scale(2.0)
}

fn tilde_t(p: &BreatherParams, y1: f64, y2: f64) -> f64 {
    let (a, b) = (p.alpha, p.beta);
    let sech = 1.0 / libm::cosh(b * y2);
    let g = b / a * libm::sin(a * y1) * sech;
    2.0 * b * (p.vel.delta * libm::cos(a * y1) * sech - p.vel.gamma * g * libm::tanh(b * y2))
        / (1.0 + g * g)
}

/// Breather value, x-derivatives up to `m` and time derivative of the arctan profile.
pub fn breather_jet(p: &BreatherParams, t: f64, x: f64, m: usize) -> Result<Jet, Error> {
    check_order(m)?;
    let (y1, y2) = p.y(t, x);
    let s = phi_series(p.alpha, p.beta, y1, y2, 1.0, 1.0);
    let mut d = [0.0; MAX_JET + 1];
    for (j, v) in d.iter_mut().enumerate().take(m + 1) {
        *v = s.derivative(j + 1);
    }
    Ok(Jet { d, m, dt_tilde: tilde_t(p, y1, y2) })
}

pub fn breather(p: &BreatherParams, t: f64, x: f64) -> f64 {
    let (y1, y2) = p.y(t, x);
    let (a, b) = (p.alpha, p.beta);
    let sech = 1.0 / libm::cosh(b * y2);
    let g = b / a * libm::sin(a * y1) * sech;
    // B = 2 (G' F - G F') / (F^2 + G^2), scaled by sech^2
    let gp = b * libm::cos(a * y1) * sech;
    let fp = b * libm::tanh(b * y2);
    2.0 * (gp - g * fp) / (1.0 + g * g)
}

/// `2 atan(G/F)` itself.
pub fn breather_tilde(p: &BreatherParams, t: f64, x: f64) -> f64 {
    let (y1, y2) = p.y(t, x);
    let g = p.beta / p.alpha * libm::sin(p.alpha * y1) / libm::cosh(p.beta * y2);
    2.0 * libm::atan(g)
}

/// Closed-form partial mass `(1/2) int_{-inf}^x B^2`.
pub fn partial_mass(p: &BreatherParams, t: f64, x: f64) -> f64 {
    let (y1, y2) = p.y(t, x);
    let (a, b) = (p.alpha, p.beta);
    let sech = 1.0 / libm::cosh(b * y2);
    let g = b / a * libm::sin(a * y1) * sech;
    b + b * (g * libm::cos(a * y1) * sech + libm::tanh(b * y2)) / (1.0 + g * g)
}

/// Time derivative of the partial mass, `(1/2) d_x d_t log(G^2 + F^2)`.
pub fn partial_mass_t(p: &BreatherParams, t: f64, x: f64) -> f64 {
    let (y1, y2) = p.y(t, x);
    let (a, b) = (p.alpha, p.beta);
    let sech = 1.0 / libm::cosh(b * y2);
    let th = libm::tanh(b * y2);
    let g = Series::sin_shift(a, a * y1).scale(b / a * sech);
    let f = Series::cosh_ratio(b, th);
    let num = (g * Series::cos_shift(a, a * y1)).scale(p.vel.delta * sech)
        + (f * Series::sinh_ratio(b, th)).scale(p.vel.gamma);
    let s = num.div(g * g + f * f).scale(2.0 * b);
    0.5 * s.derivative(1)
}

/// Translation directions `dB/dx1`, `dB/dx2` and their x-derivatives at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseDerivatives {
    pub b1: f64,
    pub b1_x: f64,
    pub b2: f64,
    pub b2_x: f64,
}

/// Mixed derivatives via polarization of directional series of `2 atan(G/F)`.
pub fn phase_derivatives(p: &BreatherParams, t: f64, x: f64) -> PhaseDerivatives {
    let (y1, y2) = p.y(t, x);
    let dir = |a: f64, b: f64, k: usize| phi_series(p.alpha, p.beta, y1, y2, a, b).0[k] * factorial(k);
    // D_u D_v = (D^2_{v+u} - D^2_{v-u}) / 4 and D_v^2 D_u = (D^3_{v+u} - D^3_{v-u} - 2 D^3_u) / 6
    let b1 = 0.25 * (dir(2.0, 1.0, 2) - dir(0.0, 1.0, 2));
    let b2 = 0.25 * (dir(1.0, 2.0, 2) - dir(1.0, 0.0, 2));
    let b1_x = (dir(2.0, 1.0, 3) - dir(0.0, 1.0, 3) - 2.0 * dir(1.0, 0.0, 3)) / 6.0;
    let b2_x = (dir(1.0, 2.0, 3) - dir(1.0, 0.0, 3) - 2.0 * dir(0.0, 1.0, 3)) / 6.0;
    PhaseDerivatives { b1, b1_x, b2, b2_x }
}

/// Closed form of `det [[B1, B2], [B1_x, B2_x]]`.
pub fn wronskian(p: &BreatherParams, t: f64, x: f64) -> f64 {
    let (y1, y2) = p.y(t, x);
    let (a, b) = (p.alpha, p.beta);
    let (a2, b2) = (a * a, b * b);
    // divide numerator and denominator by cosh^2(2 b y2) to stay finite
    let c = libm::cosh(2.0 * b * y2);
    let num = a * libm::tanh(2.0 * b * y2) - b * libm::sin(2.0 * a * y1) / c;
    let den = (a2 + b2) / c + a2 - b2 * libm::cos(2.0 * a * y1) / c;
    -8.0 * a2 * a * b2 * b * (a2 + b2) * num / (den * den) / c
}

/// Soliton value and derivatives; `dt_tilde` is `-v Q`, the time derivative of its antiderivative.
pub fn soliton_jet(p: &SolitonParams, t: f64, x: f64, m: usize) -> Result<Jet, Error> {
    check_order(m)?;
    let sc = libm::sqrt(p.c);
    let v = p.speed();
    let z = sc * (x - v * t);
    let s = Series::cosh_ratio(sc, libm::tanh(z)).recip().scale(sc / libm::cosh(z));
    let mut d = [0.0; MAX_JET + 1];
    for (j, val) in d.iter_mut().enumerate().take(m + 1) {
        *val = s.derivative(j);
    }
    Ok(Jet { d, m, dt_tilde: -v * d[0] })
}

pub fn soliton(p: &SolitonParams, t: f64, x: f64) -> f64 {
    let sc = libm::sqrt(p.c);
    sc / libm::cosh(sc * (x - p.speed() * t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bp(order: Order, a: f64, b: f64, x1: f64, x2: f64) -> BreatherParams {
        BreatherParams::new(order, a, b, x1, x2).unwrap()
    }

    // Closed form H/N with H = 2(b a^2 cosh cos - b^2 a sinh sin), N = a^2 cosh^2 + b^2 sin^2.
    fn h_over_n(p: &BreatherParams, t: f64, x: f64) -> f64 {
        let (y1, y2) = p.y(t, x);
        let (a, b) = (p.alpha, p.beta);
        let (ch, sh) = (libm::cosh(b * y2), libm::sinh(b * y2));
        let (c, s) = (libm::cos(a * y1), libm::sin(a * y1));
        2.0 * (b * a * a * ch * c - b * b * a * sh * s) / (a * a * ch * ch + b * b * s * s)
    }

    fn fd1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn origin_value() {
        let p = bp(Order::Three, 1.0, 1.0, 0.0, 0.0);
        assert_relative_eq!(breather_jet(&p, 0.0, 0.0, 0).unwrap().value(), 2.0, epsilon = 1e-15);
        let h = 1e-4;
        let fd = (breather_tilde(&p, 0.0, h) - breather_tilde(&p, 0.0, -h)) / (2.0 * h);
        assert_relative_eq!(fd, 2.0, epsilon = 1e-7);
    }

    #[test]
    fn parity_at_zero_phase() {
        // the arctan profile is odd, so its derivative B is even
        let p = bp(Order::Five, 1.3, 0.7, 0.0, 0.0);
        for x in [0.3, 1.1, 4.0] {
            assert_relative_eq!(breather_tilde(&p, 0.0, -x), -breather_tilde(&p, 0.0, x), epsilon = 1e-14);
            assert_relative_eq!(breather(&p, 0.0, -x), breather(&p, 0.0, x), epsilon = 1e-14);
        }
    }

    #[test]
    fn first_derivative_matches_finite_differences() {
        let p = bp(Order::Seven, 0.8, 1.2, 0.3, -0.4);
        for x in [-1.7, 0.2, 2.9] {
            let j = breather_jet(&p, 0.1, x, 1).unwrap();
            let fd = fd1(|s| breather(&p, 0.1, s), x, 1e-3);
            assert!((j.dx(1) - fd).abs() <= 1e-8 * j.dx(1).abs().max(1.0));
        }
    }

    #[test]
    fn tilde_t_matches_time_differences() {
        let p = bp(Order::Nine, 0.9, 1.1, 0.2, 0.5);
        for x in [-0.9, 0.4, 1.5] {
            let j = breather_jet(&p, 0.05, x, 0).unwrap();
            let fd = fd1(|s| breather_tilde(&p, s, x), 0.05, 1e-5);
            assert!((j.dt_tilde - fd).abs() <= 1e-6 * j.dt_tilde.abs().max(1.0));
        }
    }

    #[test]
    fn partial_mass_time_derivative_matches_differences() {
        let p = bp(Order::Five, 1.0, 0.8, 0.1, 0.0);
        for x in [-1.0, 0.0, 0.7] {
            let fd = fd1(|s| partial_mass(&p, s, x), 0.2, 1e-4);
            assert_relative_eq!(partial_mass_t(&p, 0.2, x), fd, epsilon = 1e-8, max_relative = 1e-8);
        }
    }

    #[test]
    fn partial_mass_limits() {
        let p = bp(Order::Three, 1.0, 2.0, 0.0, 0.0);
        assert!(partial_mass(&p, 0.0, -60.0).abs() < 1e-15);
        assert_relative_eq!(partial_mass(&p, 0.0, 60.0), 4.0, epsilon = 1e-14);
        // d/dx of the partial mass is B^2 / 2
        for x in [-0.5, 0.3] {
            let fd = fd1(|s| partial_mass(&p, 0.0, s), x, 1e-3);
            assert_relative_eq!(fd, 0.5 * breather(&p, 0.0, x).powi(2), epsilon = 1e-9);
        }
    }

    #[test]
    fn far_tails_stay_finite() {
        let p = bp(Order::Eleven, 2.0, 2.0, 0.0, 0.0);
        for x in [-500.0, 500.0] {
            let j = breather_jet(&p, 0.0, x, MAX_JET).unwrap();
            assert!(j.as_slice().iter().all(|v| v.is_finite()));
            assert!(j.dt_tilde.is_finite());
            assert!(wronskian(&p, 0.0, x).is_finite());
            assert!(partial_mass_t(&p, 0.0, x).is_finite());
        }
    }

    #[test]
    fn jet_order_is_bounded() {
        let p = bp(Order::Five, 1.0, 1.0, 0.0, 0.0);
        assert!(breather_jet(&p, 0.0, 0.0, MAX_JET + 1).is_err());
        let s = SolitonParams::new(Order::Five, 1.0).unwrap();
        assert!(soliton_jet(&s, 0.0, 0.0, MAX_JET + 1).is_err());
    }

    #[test]
    fn soliton_values() {
        let s = SolitonParams::new(Order::Three, 1.0).unwrap();
        assert_eq!(soliton_jet(&s, 0.0, 0.0, 2).unwrap().value(), 1.0);
        let s = SolitonParams::new(Order::Three, 4.0).unwrap();
        assert_eq!(soliton_jet(&s, 0.0, 0.0, 2).unwrap().value(), 2.0);
        let s = SolitonParams::new(Order::Five, 1.0).unwrap();
        let a = soliton_jet(&s, 1.0, 1.0, 4).unwrap();
        let b = soliton_jet(&s, 0.0, 0.0, 4).unwrap();
        assert_relative_eq!(a.value(), b.value(), epsilon = 1e-15);
        assert!(SolitonParams::new(Order::Five, 0.0).is_err());
    }

    #[test]
    fn soliton_second_derivative_closed_form() {
        // Q'' = c Q - 2 Q^3 for the sech profile
        let s = SolitonParams::new(Order::Seven, 2.5).unwrap();
        let j = soliton_jet(&s, 0.0, 0.37, 2).unwrap();
        let q = j.value();
        assert_relative_eq!(j.dx(2), 2.5 * q - 2.0 * q * q * q, epsilon = 1e-13);
    }

    #[test]
    fn wronskian_origin_and_parity() {
        let p = bp(Order::Five, 1.0, 1.0, 0.0, 0.0);
        assert_eq!(wronskian(&p, 0.0, 0.0), 0.0);
        for x in [0.4, 1.3] {
            assert_relative_eq!(wronskian(&p, 0.0, -x), -wronskian(&p, 0.0, x), epsilon = 1e-14);
        }
    }

    #[test]
    fn phase_derivatives_match_finite_differences() {
        let p = bp(Order::Five, 0.9, 1.4, 0.2, -0.3);
        let (t, x, h) = (0.1, 0.35, 1e-4);
        let d = phase_derivatives(&p, t, x);
        let b1 = fd1(|s| breather(&p.with_phases(s, p.x2), t, x), p.x1, h);
        let b2 = fd1(|s| breather(&p.with_phases(p.x1, s), t, x), p.x2, h);
        assert_relative_eq!(d.b1, b1, epsilon = 1e-9);
        assert_relative_eq!(d.b2, b2, epsilon = 1e-9);
        let b1x = fd1(|s| breather_jet(&p.with_phases(s, p.x2), t, x, 1).unwrap().dx(1), p.x1, h);
        assert_relative_eq!(d.b1_x, b1x, epsilon = 1e-8);
    }

    proptest! {
        #[test]
        fn value_matches_closed_form(a in 0.3f64..2.5, b in 0.3f64..2.5, x1 in -2.0f64..2.0,
                                     x2 in -2.0f64..2.0, t in -0.5f64..0.5, x in -6.0f64..6.0) {
            let p = bp(Order::Seven, a, b, x1, x2);
            let (_, y2) = p.y(t, x);
            prop_assume!((b * y2).abs() < 300.0);
            let j = breather_jet(&p, t, x, 0).unwrap();
            let r = h_over_n(&p, t, x);
            prop_assert!((j.value() - r).abs() <= 1e-12 * (1.0 + r.abs()));
            prop_assert!((breather(&p, t, x) - r).abs() <= 1e-12 * (1.0 + r.abs()));
        }

        #[test]
        fn derivatives_chain(a in 0.4f64..2.0, b in 0.4f64..2.0, x1 in -1.0f64..1.0,
                             x2 in -1.0f64..1.0, t in -0.2f64..0.2, x in -3.0f64..3.0,
                             k in 1usize..MAX_JET) {
            let p = bp(Order::Nine, a, b, x1, x2);
            let h = 2e-3;
            let j = breather_jet(&p, t, x, k).unwrap();
            // sixth-order central difference of dx[k-1]
            let f = |s: f64| breather_jet(&p, t, s, k - 1).unwrap().dx(k - 1);
            let fd = (f(x + 3.0 * h) - 9.0 * f(x + 2.0 * h) + 45.0 * f(x + h)
                - 45.0 * f(x - h) + 9.0 * f(x - 2.0 * h) - f(x - 3.0 * h)) / (60.0 * h);
            let scale = (0..=k).map(|i| j.dx(i).abs()).fold(1.0, f64::max);
            prop_assert!((j.dx(k) - fd).abs() <= 1e-7 * scale, "k={} jet={} fd={}", k, j.dx(k), fd);
        }

        #[test]
        fn translation_covariance(s in -3.0f64..3.0, x in -4.0f64..4.0, t in -0.3f64..0.3) {
            let p = bp(Order::Five, 1.1, 0.9, 0.2, -0.1);
            let shifted = p.with_phases(p.x1 + s, p.x2 + s);
            let a = breather_jet(&shifted, t, x, 4).unwrap();
            let b = breather_jet(&p, t, x + s, 4).unwrap();
            for i in 0..=4 {
                prop_assert!((a.dx(i) - b.dx(i)).abs() <= 1e-11 * (1.0 + b.dx(i).abs()));
            }
        }

        #[test]
        fn wronskian_closed_form(a in 0.4f64..2.0, b in 0.4f64..2.0, t in -0.5f64..0.5,
                                 x in -4.0f64..4.0) {
            let p = bp(Order::Seven, a, b, 0.1, -0.2);
            let (_, y2) = p.y(t, x);
            prop_assume!((b * y2).abs() < 150.0);
            let d = phase_derivatives(&p, t, x);
            let w = d.b1 * d.b2_x - d.b2 * d.b1_x;
            let c = wronskian(&p, t, x);
            let scale = (d.b1 * d.b2_x).abs().max((d.b2 * d.b1_x).abs()).max(1e-300);
            prop_assert!((w - c).abs() <= 1e-10 * scale, "{} vs {}", w, c);
        }
    }
}
