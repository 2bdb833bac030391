//! Pointwise polynomial identities satisfied by breathers and solitons, as term lists.
//!
//! Every identity is a sum of terms `coef * prod(factors)` that should vanish.
//! Terms are kept separate so that alternative readings of individual terms can
//! be evaluated side by side.

use alloc::vec::Vec;

use crate::flux;
use crate::jets::MAX_JET;
use crate::order::{Order, Velocities};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Factor {
    /// `B_{(k)x}`
    D(u8),
    /// Time derivative of the arctan profile.
    TildeT,
    /// Time derivative of the partial mass.
    MassT,
    /// `-2 int_{-inf}^x f_9(B) B_x`
    FluxCum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coef: f64,
    /// Scaling weight of the coefficient, counting `alpha`, `beta` and `sqrt(c)` as 1.
    pub coef_weight: u32,
    pub factors: Vec<Factor>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IdentityId {
    /// Fourth-order stationary equation `G[B] = 0`.
    Stationary,
    /// `B~_t + B_{(n-1)x} + f_n(B) = 0`.
    Evolution(Order),
    /// The evolution identity multiplied by `B_x` and integrated (orders 5, 7, 9).
    FirstIntegral(Order),
    /// `B~_t` as a polynomial in `B` and its derivatives (orders 5, 7, 9).
    TildeT(Order),
    /// `Q^{(n-1)} - c^k Q + f_n(Q) = 0`.
    SolitonOde(Order),
}

impl IdentityId {
    pub fn label(self) -> alloc::string::String {
        use alloc::format;
        match self {
            IdentityId::Stationary => "stationary".into(),
            IdentityId::Evolution(o) => format!("evolution-{o}"),
            IdentityId::FirstIntegral(o) => format!("first-integral-{o}"),
            IdentityId::TildeT(o) => format!("tilde-t-{o}"),
            IdentityId::SolitonOde(o) => format!("soliton-ode-{o}"),
        }
    }
}

/// Values at one point that the factors read.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub d: [f64; MAX_JET + 1],
    pub tilde_t: f64,
    pub mass_t: f64,
    pub flux_cum: f64,
}

/// Residual and the largest single term at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub residual: f64,
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Substitution {
    Coefficient { index: usize, coef: f64 },
    Monomial { index: usize, factors: Vec<Factor> },
    /// Evaluate with these velocities instead of the tabulated ones.
    Velocities(Velocities),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Identity {
    pub id: IdentityId,
    /// Common scaling weight every term should carry.
    pub weight: u32,
    /// Weight of one time derivative.
    pub time_weight: u32,
    pub terms: Vec<Term>,
}

use Factor::{FluxCum, MassT, TildeT, D};

fn term(coef: f64, coef_weight: u32, factors: &[Factor]) -> Term {
    Term { coef, coef_weight, factors: factors.to_vec() }
}

fn flux_terms(order: Order) -> impl Iterator<Item = Term> {
    flux::table(order)
        .iter()
        .map(|&(c, ds)| Term { coef: c, coef_weight: 0, factors: ds.iter().map(|&k| D(k)).collect() })
}

fn b(k: usize) -> Vec<Factor> {
    alloc::vec![D(0); k]
}

fn with(mut base: Vec<Factor>, extra: &[Factor]) -> Vec<Factor> {
    base.extend_from_slice(extra);
    base
}

impl Identity {
    /// Breather identity for parameters `alpha`, `beta`.
    pub fn breather(id: IdentityId, alpha: f64, beta: f64) -> Result<Self, Error> {
        let (a2, b2) = (alpha * alpha, beta * beta);
        let s = b2 - a2;
        let c0 = (a2 + b2) * (a2 + b2);
        let t = |coef, w, f: Vec<Factor>| Term { coef, coef_weight: w, factors: f };
        let (weight, time_weight, terms): (u32, u32, Vec<Term>) = match id {
            IdentityId::Stationary => (
                5,
                0,
                alloc::vec![
                    term(1.0, 0, &[D(4)]),
                    term(10.0, 0, &[D(0), D(1), D(1)]),
                    term(10.0, 0, &[D(0), D(0), D(2)]),
                    t(6.0, 0, b(5)),
                    term(-2.0 * s, 2, &[D(2)]),
                    t(-4.0 * s, 2, b(3)),
                    term(c0, 4, &[D(0)]),
                ],
            ),
            IdentityId::Evolution(order) => {
                let n = order.n();
                let mut v = alloc::vec![term(1.0, 0, &[TildeT]), term(1.0, 0, &[D(n as u8 - 1)])];
                v.extend(flux_terms(order));
                (n, n, v)
            }
            IdentityId::FirstIntegral(Order::Five) => (
                6,
                5,
                alloc::vec![
                    term(1.0, 0, &[D(2), D(2)]),
                    term(-2.0, 0, &[D(0), TildeT]),
                    term(2.0, 0, &[MassT]),
                    t(-2.0, 0, b(6)),
                    term(-2.0, 0, &[D(1), D(3)]),
                    term(-10.0, 0, &[D(0), D(0), D(1), D(1)]),
                ],
            ),
            IdentityId::FirstIntegral(Order::Seven) => (
                8,
                7,
                alloc::vec![
                    term(1.0, 0, &[D(3), D(3)]),
                    term(2.0, 0, &[D(0), TildeT]),
                    term(-2.0, 0, &[MassT]),
                    t(5.0, 0, b(8)),
                    term(2.0, 0, &[D(1), D(5)]),
                    term(-2.0, 0, &[D(2), D(2), D(4)]),
                    term(28.0, 0, &[D(0), D(0), D(1), D(3)]),
                    term(-14.0, 0, &[D(0), D(0), D(2), D(2)]),
                    term(56.0, 0, &[D(0), D(1), D(1), D(2)]),
                    term(7.0, 0, &[D(1), D(1), D(1), D(1)]),
                    t(70.0, 0, with(b(4), &[D(1), D(1)])),
                ],
            ),
            IdentityId::FirstIntegral(Order::Nine) => (
                10,
                9,
                alloc::vec![
                    term(1.0, 0, &[D(4), D(4)]),
                    term(-2.0, 0, &[D(0), TildeT]),
                    term(2.0, 0, &[MassT]),
                    term(-2.0, 0, &[D(7), D(1)]),
                    term(2.0, 0, &[D(6), D(2)]),
                    term(-2.0, 0, &[D(5), D(3)]),
                    term(1.0, 0, &[FluxCum]),
                ],
            ),
            IdentityId::TildeT(Order::Five) => (
                5,
                5,
                alloc::vec![
                    term(1.0, 0, &[TildeT]),
                    term(-c0, 4, &[D(0)]),
                    term(2.0 * s, 2, &[D(2)]),
                    t(4.0 * s, 2, b(3)),
                ],
            ),
            IdentityId::TildeT(Order::Seven) => (
                7,
                7,
                alloc::vec![
                    term(1.0, 0, &[TildeT]),
                    term(-2.0 * s * c0, 6, &[D(0)]),
                    t(4.0 * (a2 * a2 - 6.0 * a2 * b2 + b2 * b2), 4, b(3)),
                    t(4.0 * s, 2, b(5)),
                    t(-4.0, 0, b(7)),
                    term(3.0 * a2 * a2 - 10.0 * a2 * b2 + 3.0 * b2 * b2, 4, &[D(2)]),
                    term(4.0 * s, 2, &[D(0), D(1), D(1)]),
                    t(-20.0, 0, with(b(3), &[D(1), D(1)])),
                    term(2.0, 0, &[D(0), D(2), D(2)]),
                    term(-4.0, 0, &[D(0), D(1), D(3)]),
                ],
            ),
            IdentityId::TildeT(Order::Nine) => {
                let a0 = -c0 * (3.0 * a2 * a2 - 10.0 * a2 * b2 + 3.0 * b2 * b2);
                let a1 = -4.0 * (a2 - b2) * (a2 * a2 - 14.0 * a2 * b2 + b2 * b2);
                let a2c = -2.0 * (a2 * a2 + 18.0 * a2 * b2 + b2 * b2);
                let a3 = 2.0 * (5.0 * a2 * a2 - 6.0 * a2 * b2 + 5.0 * b2 * b2);
                let a4 = -4.0 * (a2 - b2) * (a2 * a2 - 6.0 * a2 * b2 + b2 * b2);
                let x2 = [D(1), D(1)];
                (
                    9,
                    9,
                    alloc::vec![
                        term(1.0, 0, &[TildeT]),
                        term(a0, 8, &[D(0)]),
                        t(a1, 6, b(3)),
                        t(a2c, 4, b(5)),
                        t(16.0 * s, 2, b(7)),
                        t(-26.0, 0, b(9)),
                        t(a3, 4, with(b(1), &x2)),
                        t(-32.0 * s, 2, with(b(3), &x2)),
                        t(-100.0, 0, with(b(5), &x2)),
                        term(-2.0, 0, &[D(1), D(1), D(1), D(1), D(0)]),
                        term(a4, 6, &[D(2)]),
                        t(-6.0 * c0, 4, with(b(2), &[D(2)])),
                        t(20.0 * s, 2, with(b(4), &[D(2)])),
                        t(-28.0, 0, with(b(6), &[D(2)])),
                        term(4.0 * s, 2, &[D(1), D(1), D(2)]),
                        t(-12.0, 0, with(b(2), &[D(1), D(1), D(2)])),
                        term(8.0 * s, 2, &[D(2), D(2), D(0)]),
                        t(-4.0, 0, with(b(3), &[D(2), D(2)])),
                        term(2.0, 0, &[D(2), D(2), D(2)]),
                        term(-8.0 * s, 2, &[D(1), D(3), D(0)]),
                        t(-32.0, 0, with(b(3), &[D(1), D(3)])),
                        term(-4.0, 0, &[D(1), D(2), D(3)]),
                        term(-2.0, 0, &[D(3), D(3), D(0)]),
                    ],
                )
            }
            IdentityId::FirstIntegral(o) | IdentityId::TildeT(o) => return Err(Error::WrongOrder(o.n())),
            IdentityId::SolitonOde(_) => {
                return Err(Error::InvalidParameter("soliton identities take a scaling c"))
            }
        };
        Ok(Self { id, weight, time_weight, terms })
    }

    /// `Q^{(n-1)} - c^k Q + f_n(Q)` for the soliton of scaling `c`.
    pub fn soliton(order: Order, c: f64) -> Self {
        let k = order.half();
        let mut terms = alloc::vec![
            term(1.0, 0, &[D(2 * k as u8)]),
            term(-libm::pow(c, k as f64), 2 * k, &[D(0)]),
        ];
        terms.extend(flux_terms(order));
        Self { id: IdentityId::SolitonOde(order), weight: order.n(), time_weight: 0, terms }
    }

    pub fn factor_weight(&self, f: Factor) -> u32 {
        match f {
            D(k) => k as u32 + 1,
            TildeT => self.time_weight,
            MassT | FluxCum => self.time_weight + 1,
        }
    }

    pub fn term_weight(&self, t: &Term) -> u32 {
        t.coef_weight + t.factors.iter().map(|&f| self.factor_weight(f)).sum::<u32>()
    }

    /// Indices of terms whose scaling weight differs from the identity's.
    pub fn weight_defects(&self) -> Vec<usize> {
        (0..self.terms.len()).filter(|&i| self.term_weight(&self.terms[i]) != self.weight).collect()
    }

    pub fn max_derivative(&self) -> usize {
        self.terms
            .iter()
            .flat_map(|t| t.factors.iter())
            .filter_map(|f| match f {
                D(k) => Some(*k as usize),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn uses(&self, f: Factor) -> bool {
        self.terms.iter().any(|t| t.factors.contains(&f))
    }

    /// Apply term substitutions; velocity overrides are left to the caller.
    pub fn apply(&self, subs: &[Substitution]) -> Result<Self, Error> {
        let mut out = self.clone();
        for s in subs {
            match s {
                Substitution::Coefficient { index, coef } => {
                    let t = out.terms.get_mut(*index).ok_or(Error::MalformedSubstitution(*index))?;
                    if !coef.is_finite() {
                        return Err(Error::MalformedSubstitution(*index));
                    }
                    t.coef = *coef;
                }
                Substitution::Monomial { index, factors } => {
                    if factors.is_empty()
                        || factors.iter().any(|f| matches!(f, D(k) if *k as usize > MAX_JET))
                    {
                        return Err(Error::MalformedSubstitution(*index));
                    }
                    let mut t =
                        out.terms.get(*index).cloned().ok_or(Error::MalformedSubstitution(*index))?;
                    t.factors = factors.clone();
                    let found = out.term_weight(&t);
                    if found != out.weight {
                        return Err(Error::WeightMismatch { index: *index, expected: out.weight, found });
                    }
                    out.terms[*index] = t;
                }
                Substitution::Velocities(_) => {}
            }
        }
        Ok(out)
    }

    pub fn eval(&self, p: &Point) -> Evaluation {
        let mut residual = 0.0;
        let mut scale = 0.0f64;
        for t in &self.terms {
            let mut v = t.coef;
            for f in &t.factors {
                v *= match *f {
                    D(k) => p.d[k as usize],
                    TildeT => p.tilde_t,
                    MassT => p.mass_t,
                    FluxCum => p.flux_cum,
                };
            }
            residual += v;
            scale = scale.max(v.abs());
        }
        Evaluation { residual, scale }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::{breather_jet, partial_mass_t, BreatherParams};

    fn point(p: &BreatherParams, t: f64, x: f64) -> Point {
        let j = breather_jet(p, t, x, MAX_JET).unwrap();
        let mut d = [0.0; MAX_JET + 1];
        d.copy_from_slice(j.as_slice());
        Point { d, tilde_t: j.dt_tilde, mass_t: partial_mass_t(p, t, x), flux_cum: 0.0 }
    }

    #[test]
    fn weights_are_uniform_except_the_flagged_term() {
        let ids = [
            IdentityId::Stationary,
            IdentityId::Evolution(Order::Nine),
            IdentityId::Evolution(Order::Eleven),
            IdentityId::FirstIntegral(Order::Five),
            IdentityId::FirstIntegral(Order::Nine),
            IdentityId::TildeT(Order::Five),
            IdentityId::TildeT(Order::Seven),
            IdentityId::TildeT(Order::Nine),
        ];
        for id in ids {
            let i = Identity::breather(id, 0.7, 1.3).unwrap();
            assert!(i.weight_defects().is_empty(), "{id:?}");
        }
        let seven = Identity::breather(IdentityId::FirstIntegral(Order::Seven), 1.0, 1.0).unwrap();
        assert_eq!(seven.weight_defects(), alloc::vec![5]);
        assert!(Identity::soliton(Order::Nine, 2.0).weight_defects().is_empty());
    }

    #[test]
    fn wrong_orders_are_rejected() {
        assert!(Identity::breather(IdentityId::TildeT(Order::Three), 1.0, 1.0).is_err());
        assert!(Identity::breather(IdentityId::FirstIntegral(Order::Eleven), 1.0, 1.0).is_err());
    }

    #[test]
    fn substitutions_are_validated() {
        let base = Identity::breather(IdentityId::FirstIntegral(Order::Seven), 1.0, 1.0).unwrap();
        let fixed = base
            .apply(&[Substitution::Monomial { index: 5, factors: alloc::vec![D(2), D(4)] }])
            .unwrap();
        assert!(fixed.weight_defects().is_empty());
        let bad = base.apply(&[Substitution::Monomial { index: 4, factors: alloc::vec![D(2)] }]);
        assert!(matches!(bad, Err(Error::WeightMismatch { index: 4, .. })));
        let oob = base.apply(&[Substitution::Coefficient { index: 40, coef: 1.0 }]);
        assert!(matches!(oob, Err(Error::MalformedSubstitution(40))));
    }

    #[test]
    fn stationary_equation_vanishes_at_a_point() {
        let p = BreatherParams::new(Order::Seven, 0.7, 1.3, 0.1, -0.2).unwrap();
        let id = Identity::breather(IdentityId::Stationary, p.alpha, p.beta).unwrap();
        let e = id.eval(&point(&p, 0.37, 0.41));
        assert!(e.residual.abs() <= 1e-12 * e.scale, "{e:?}");
    }

    #[test]
    fn perturbed_coefficient_breaks_the_identity() {
        let p = BreatherParams::new(Order::Nine, 0.7, 1.3, 0.0, 0.0).unwrap();
        let id = Identity::breather(IdentityId::TildeT(Order::Nine), p.alpha, p.beta).unwrap();
        let pt = point(&p, 0.2, 0.3);
        let e = id.eval(&pt);
        assert!(e.residual.abs() <= 1e-10 * e.scale);
        let coef = id.terms[1].coef * 1.01;
        let moved = id.apply(&[Substitution::Coefficient { index: 1, coef }]).unwrap().eval(&pt);
        let shift = 0.01 * id.terms[1].coef * pt.d[0];
        assert!((moved.residual - e.residual - shift).abs() <= 1e-12 * e.scale);
    }
}
