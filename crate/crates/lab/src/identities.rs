//! Pointwise residuals of the breather and soliton identities on Chebyshev samples.

use mkdv_core::{
    breather_jet, flux, partial_mass_t, soliton_jet, BreatherParams, Delta9Reading, Factor, Identity,
    IdentityId, Order, Point, SolitonParams, Substitution, Velocities, MAX_JET,
};
use serde::{Deserialize, Serialize};

use crate::LabError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamsRecord {
    Breather { order: u32, alpha: f64, beta: f64, x1: f64, x2: f64, delta: f64, gamma: f64, t: f64 },
    Soliton { order: u32, c: f64 },
}

impl ParamsRecord {
    pub fn breather(p: &BreatherParams, t: f64) -> Self {
        ParamsRecord::Breather {
            order: p.order.n(),
            alpha: p.alpha,
            beta: p.beta,
            x1: p.x1,
            x2: p.x2,
            delta: p.vel.delta,
            gamma: p.vel.gamma,
            t,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub identity_id: String,
    pub variant: String,
    pub params: ParamsRecord,
    pub sample_spec: String,
    pub samples: usize,
    pub sup_residual: f64,
    pub rel_scale: f64,
}

impl ResidualReport {
    pub fn normalized(&self) -> f64 {
        self.sup_residual / self.rel_scale
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.normalized() <= tol
    }
}

/// Named set of term substitutions.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityVariant {
    pub name: String,
    pub substitutions: Vec<Substitution>,
}

pub const VERBATIM: &str = "verbatim";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sampling {
    /// Chebyshev points over the decay window.
    pub core: usize,
    /// Chebyshev points over the envelope peak.
    pub peak: usize,
    /// Half-width of the decay window in units of `1/beta`.
    pub decay_lengths: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self { core: 256, peak: 64, decay_lengths: 20.0 }
    }
}

impl Sampling {
    pub fn doubled(self) -> Self {
        Self { core: 2 * self.core, peak: 2 * self.peak, decay_lengths: 2.0 * self.decay_lengths }
    }

    /// Sorted sample abscissae around `center` for decay rate `beta`.
    pub fn points(&self, center: f64, beta: f64) -> Vec<f64> {
        let cheb = |m: usize, half: f64| {
            (0..m).map(move |i| {
                center + half * (std::f64::consts::PI * (i as f64 + 0.5) / m as f64).cos()
            })
        };
        let mut xs: Vec<f64> =
            cheb(self.core, self.decay_lengths / beta).chain(cheb(self.peak, 2.0 / beta)).collect();
        xs.sort_by(f64::total_cmp);
        xs
    }

    fn describe(&self, center: f64, beta: f64) -> String {
        format!(
            "{} chebyshev on {center:.6} +- {:.6}, {} chebyshev on {center:.6} +- {:.6}",
            self.core,
            self.decay_lengths / beta,
            self.peak,
            2.0 / beta
        )
    }
}

// Five-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

fn flux9_density(p: &BreatherParams, t: f64, x: f64) -> f64 {
    let j = breather_jet(p, t, x, 6).expect("jet order within bounds");
    -2.0 * flux(Order::Nine, &j.as_slice()[..7]).expect("seven entries") * j.dx(1)
}

/// `-2 int_{-inf}^x f_9(B) B_s ds` at sorted points, by composite Gauss-Legendre panels from
/// forty decay lengths to the left of the envelope.
pub fn flux_cumulative(p: &BreatherParams, t: f64, xs: &[f64]) -> Vec<f64> {
    let hmax = 0.05 / p.alpha.max(p.beta);
    let mut left = p.center(t) - 40.0 / p.beta;
    let mut acc = 0.0;
    xs.iter()
        .map(|&x| {
            if x > left {
                let panels = ((x - left) / hmax).ceil().max(1.0) as usize;
                let h = (x - left) / panels as f64;
                for k in 0..panels {
                    let mid = left + (k as f64 + 0.5) * h;
                    for (z, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
                        acc += 0.5 * h * w * flux9_density(p, t, mid + 0.5 * h * z);
                    }
                }
                left = x;
            }
            acc
        })
        .collect()
}

fn sup(identity: &Identity, points: impl Iterator<Item = Point>) -> (f64, f64, usize) {
    let (mut r, mut s, mut m) = (0.0f64, 0.0f64, 0);
    for pt in points {
        let e = identity.eval(&pt);
        r = r.max(e.residual.abs());
        s = s.max(e.scale);
        m += 1;
    }
    (r, s, m)
}

/// Sup residual of a breather identity at time `t`.
pub fn breather_residual(
    identity: &Identity,
    p: &BreatherParams,
    t: f64,
    sampling: Sampling,
    variant: &str,
) -> Result<ResidualReport, LabError> {
    let center = p.center(t);
    let xs = sampling.points(center, p.beta);
    let m = identity.max_derivative().min(MAX_JET);
    let cum = if identity.uses(Factor::FluxCum) { flux_cumulative(p, t, &xs) } else { vec![0.0; xs.len()] };
    let with_mass = identity.uses(Factor::MassT);
    let mut pts = Vec::with_capacity(xs.len());
    for (&x, &fc) in xs.iter().zip(&cum) {
        let j = breather_jet(p, t, x, m)?;
        let mut d = [0.0; MAX_JET + 1];
        d[..=m].copy_from_slice(j.as_slice());
        let mass_t = if with_mass { partial_mass_t(p, t, x) } else { 0.0 };
        pts.push(Point { d, tilde_t: j.dt_tilde, mass_t, flux_cum: fc });
    }
    let (sup_residual, rel_scale, samples) = sup(identity, pts.into_iter());
    Ok(ResidualReport {
        identity_id: identity.id.label(),
        variant: variant.to_string(),
        params: ParamsRecord::breather(p, t),
        sample_spec: format!("t = {t}; {}", sampling.describe(center, p.beta)),
        samples,
        sup_residual,
        rel_scale,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdeLevel {
    /// `Q'' - cQ + 2Q^3 = 0`.
    Second,
    /// The stationary equation of the soliton's own order.
    High,
}

pub fn soliton_ode_residual(p: &SolitonParams, level: OdeLevel) -> ResidualReport {
    let order = match level {
        OdeLevel::Second => Order::Three,
        OdeLevel::High => p.order,
    };
    let identity = Identity::soliton(order, p.c);
    let sampling = Sampling::default();
    let sc = p.c.sqrt();
    let m = identity.max_derivative();
    let pts = sampling.points(0.0, sc).into_iter().map(|x| {
        let j = soliton_jet(p, 0.0, x, m).expect("jet order within bounds");
        let mut d = [0.0; MAX_JET + 1];
        d[..=m].copy_from_slice(j.as_slice());
        Point { d, tilde_t: 0.0, mass_t: 0.0, flux_cum: 0.0 }
    });
    let (sup_residual, rel_scale, samples) = sup(&identity, pts);
    ResidualReport {
        identity_id: identity.id.label(),
        variant: VERBATIM.into(),
        params: ParamsRecord::Soliton { order: p.order.n(), c: p.c },
        sample_spec: format!("t = 0; {}", sampling.describe(0.0, sc)),
        samples,
        sup_residual,
        rel_scale,
    }
}

/// `G[B] = 0`, the fourth-order stationary equation.
pub fn breather_ode_residual(p: &BreatherParams, t: f64) -> Result<ResidualReport, LabError> {
    let id = Identity::breather(IdentityId::Stationary, p.alpha, p.beta)?;
    breather_residual(&id, p, t, Sampling::default(), VERBATIM)
}

/// `B~_t + B_{(n-1)x} + f_n(B) = 0` for the breather's own order.
pub fn evolution_identity_residual(p: &BreatherParams, t: f64) -> Result<ResidualReport, LabError> {
    let id = Identity::breather(IdentityId::Evolution(p.order), p.alpha, p.beta)?;
    breather_residual(&id, p, t, Sampling::default(), VERBATIM)
}

/// The first integral of the order-5, 7 or 9 evolution identity, as printed.
pub fn first_integral_residual(p: &BreatherParams, t: f64) -> Result<ResidualReport, LabError> {
    let id = Identity::breather(IdentityId::FirstIntegral(p.order), p.alpha, p.beta)?;
    breather_residual(&id, p, t, Sampling::default(), VERBATIM)
}

/// `B~_t` against its order-5 polynomial expression.
pub fn tilde_t_residual(p: &BreatherParams, t: f64) -> Result<ResidualReport, LabError> {
    if p.order != Order::Five {
        return Err(mkdv_core::Error::WrongOrder(p.order.n()).into());
    }
    let id = Identity::breather(IdentityId::TildeT(Order::Five), p.alpha, p.beta)?;
    breather_residual(&id, p, t, Sampling::default(), VERBATIM)
}

/// `B~_t` against its order-7 or order-9 polynomial expression.
pub fn tilde_t_polynomial_residual(p: &BreatherParams, t: f64) -> Result<ResidualReport, LabError> {
    if !matches!(p.order, Order::Seven | Order::Nine) {
        return Err(mkdv_core::Error::WrongOrder(p.order.n()).into());
    }
    let id = Identity::breather(IdentityId::TildeT(p.order), p.alpha, p.beta)?;
    breather_residual(&id, p, t, Sampling::default(), VERBATIM)
}

/// The verbatim identity followed by one report per variant, in order.
pub fn run_variants(
    base: IdentityId,
    p: &BreatherParams,
    t: f64,
    variants: &[IdentityVariant],
) -> Result<Vec<ResidualReport>, LabError> {
    let id = Identity::breather(base, p.alpha, p.beta)?;
    let sampling = Sampling::default();
    let mut out = vec![breather_residual(&id, p, t, sampling, VERBATIM)?];
    for v in variants {
        let applied = id.apply(&v.substitutions)?;
        let q = v.substitutions.iter().fold(*p, |q, s| match s {
            Substitution::Velocities(vel) => q.with_velocities(*vel),
            _ => q,
        });
        out.push(breather_residual(&applied, &q, t, sampling, &v.name)?);
    }
    Ok(out)
}

/// Alternative readings of the `-2 B_xx^2 B_4x` and `7 B_x^4` terms of the order-7 first integral.
pub fn first_integral_7_variants() -> Vec<IdentityVariant> {
    use Factor::D;
    let single = Substitution::Monomial { index: 5, factors: vec![D(2), D(4)] };
    vec![
        IdentityVariant { name: "-2B_xxB_4x".into(), substitutions: vec![single.clone()] },
        IdentityVariant {
            name: "-2B_xxB_4x, 21B_x^4".into(),
            substitutions: vec![single, Substitution::Coefficient { index: 9, coef: 21.0 }],
        },
    ]
}

/// Order-9 breather carrying the typeset phase speed, and the two alternative readings.
pub fn delta9_question(alpha: f64, beta: f64) -> Result<(BreatherParams, Vec<IdentityVariant>), LabError> {
    let p = BreatherParams::centered(Order::Nine, alpha, beta)?;
    let gamma = p.vel.gamma;
    let printed = p.with_velocities(Velocities { delta: Delta9Reading::Printed.delta(alpha, beta), gamma });
    let variants = [Delta9Reading::EvenPower, Delta9Reading::Mirrored]
        .into_iter()
        .map(|r| IdentityVariant {
            name: format!("delta9 {}", r.label()),
            substitutions: vec![Substitution::Velocities(Velocities { delta: r.delta(alpha, beta), gamma })],
        })
        .collect();
    Ok((printed, variants))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_are_sorted_and_counted() {
        let xs = Sampling::default().points(1.0, 2.0);
        assert_eq!(xs.len(), 320);
        assert!(xs.windows(2).all(|w| w[0] <= w[1]));
        assert!(xs[0] > 1.0 - 10.0 && xs[319] < 1.0 + 10.0);
    }

    #[test]
    fn gauss_weights_integrate_polynomials() {
        let s: f64 = GL_WEIGHTS.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let q8: f64 = GL_NODES.iter().zip(GL_WEIGHTS).map(|(x, w)| w * x.powi(8)).sum();
        assert!((q8 - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn soliton_second_order() {
        let r = soliton_ode_residual(&SolitonParams::new(Order::Five, 1.0).unwrap(), OdeLevel::Second);
        assert!(r.sup_residual <= 1e-12, "{r:?}");
    }

    #[test]
    fn tilde_t_wrong_order_is_rejected() {
        let p = BreatherParams::centered(Order::Seven, 1.0, 1.0).unwrap();
        assert!(tilde_t_residual(&p, 0.0).is_err());
        let p = BreatherParams::centered(Order::Five, 1.0, 1.0).unwrap();
        assert!(tilde_t_polynomial_residual(&p, 0.0).is_err());
    }

    #[test]
    fn empty_and_duplicate_variant_lists() {
        let p = BreatherParams::centered(Order::Five, 1.0, 1.0).unwrap();
        let base = IdentityId::TildeT(Order::Five);
        assert_eq!(run_variants(base, &p, 0.0, &[]).unwrap().len(), 1);
        let v = IdentityVariant { name: "same".into(), substitutions: vec![] };
        let r = run_variants(base, &p, 0.0, &[v.clone(), v]).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[1].sup_residual, r[2].sup_residual);
        assert_eq!(r[0].sup_residual, r[1].sup_residual);
    }

    #[test]
    fn malformed_substitution_is_rejected() {
        let p = BreatherParams::centered(Order::Five, 1.0, 1.0).unwrap();
        let v = IdentityVariant { name: "bad".into(), substitutions: vec![Substitution::Coefficient { index: 99, coef: 1.0 }] };
        assert!(run_variants(IdentityId::Stationary, &p, 0.0, &[v]).is_err());
    }

    #[test]
    fn flux_cumulative_vanishes_on_the_far_right() {
        // f_9(B) B_x is an exact derivative, so the integral over the line is zero.
        let p = BreatherParams::centered(Order::Nine, 1.0, 0.8).unwrap();
        let f = flux_cumulative(&p, 0.0, &[-5.0, 0.0, 60.0]);
        assert!(f[2].abs() < 1e-10, "{f:?}");
        assert!(f[1].abs() > 1e-3);
    }
}
