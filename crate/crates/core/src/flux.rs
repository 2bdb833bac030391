//! Nonlinear fluxes `f_n` of the hierarchy, `u_t + (u_{(n-1)x} + f_n(u))_x = 0`.
//!
//! The fluxes are generic over [`Scalar`] so the same polynomial yields
//! Jacobian-vector products through [`Dual`].

use core::ops::{Add, Mul, Neg, Sub};

use crate::order::Order;
use crate::Error;

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + Neg<Output = Self>
{
    fn sq(self) -> Self {
        self * self
    }
}

impl Scalar for f64 {}

/// First-order forward-mode number `re + eps * du`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Dual {
    pub re: f64,
    pub du: f64,
}

impl Dual {
    pub fn new(re: f64, du: f64) -> Self {
        Self { re, du }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, b: Dual) -> Dual {
        Dual::new(self.re + b.re, self.du + b.du)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, b: Dual) -> Dual {
        Dual::new(self.re - b.re, self.du - b.du)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, b: Dual) -> Dual {
        Dual::new(self.re * b.re, self.re * b.du + self.du * b.re)
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, c: f64) -> Dual {
        Dual::new(self.re * c, self.du * c)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.re, -self.du)
    }
}

impl Scalar for Dual {}

/// `coef * prod_k u_{(d_k)x}` over the listed derivative orders `d_k`.
pub type Monomial = (f64, &'static [u8]);

pub const F3: &[Monomial] = &[(2.0, &[0, 0, 0])];

pub const F5: &[Monomial] = &[(10.0, &[0, 1, 1]), (10.0, &[0, 0, 2]), (6.0, &[0, 0, 0, 0, 0])];

pub const F7: &[Monomial] = &[
    (14.0, &[0, 0, 4]),
    (56.0, &[0, 1, 3]),
    (42.0, &[0, 2, 2]),
    (70.0, &[1, 1, 2]),
    (70.0, &[0, 0, 0, 0, 2]),
    (140.0, &[0, 0, 0, 1, 1]),
    (20.0, &[0, 0, 0, 0, 0, 0, 0]),
];

pub const F9: &[Monomial] = &[
    (18.0, &[0, 0, 6]),
    (108.0, &[0, 1, 5]),
    (228.0, &[0, 2, 4]),
    (210.0, &[1, 1, 4]),
    (126.0, &[0, 0, 0, 0, 4]),
    (138.0, &[0, 3, 3]),
    (756.0, &[1, 2, 3]),
    (1008.0, &[0, 0, 0, 1, 3]),
    (182.0, &[2, 2, 2]),
    (756.0, &[0, 0, 0, 2, 2]),
    (3108.0, &[0, 0, 1, 1, 2]),
    (420.0, &[0, 0, 0, 0, 0, 0, 2]),
    (798.0, &[0, 1, 1, 1, 1]),
    (1260.0, &[0, 0, 0, 0, 0, 1, 1]),
    (70.0, &[0, 0, 0, 0, 0, 0, 0, 0, 0]),
];

pub const F11: &[Monomial] = &[
    (22.0, &[0, 0, 8]),
    (198.0, &[0, 0, 0, 0, 6]),
    (924.0, &[0, 0, 0, 0, 0, 0, 4]),
    (506.0, &[0, 4, 4]),
    (3036.0, &[0, 0, 0, 3, 3]),
    (2310.0, &[0, 0, 0, 0, 0, 0, 0, 0, 2]),
    (8316.0, &[0, 0, 0, 0, 0, 2, 2]),
    (9372.0, &[0, 0, 2, 2, 2]),
    (9240.0, &[0, 0, 0, 0, 0, 0, 0, 1, 1]),
    (26796.0, &[0, 0, 0, 1, 1, 1, 1]),
    (176.0, &[0, 1, 7]),
    (484.0, &[0, 2, 6]),
    (462.0, &[1, 1, 6]),
    (836.0, &[0, 3, 5]),
    (2376.0, &[0, 0, 0, 1, 5]),
    (5016.0, &[0, 0, 0, 2, 4]),
    (2706.0, &[2, 2, 4]),
    (11220.0, &[0, 0, 1, 1, 4]),
    (3498.0, &[2, 3, 3]),
    (11088.0, &[0, 0, 0, 0, 0, 1, 3]),
    (21120.0, &[0, 1, 1, 1, 3]),
    (54516.0, &[0, 0, 0, 0, 1, 1, 2]),
    (44748.0, &[0, 1, 1, 2, 2]),
    (13398.0, &[1, 1, 1, 1, 2]),
    (2376.0, &[1, 2, 5]),
    (3696.0, &[1, 3, 4]),
    (39336.0, &[0, 0, 1, 2, 3]),
    (252.0, &[0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
];

pub fn table(order: Order) -> &'static [Monomial] {
    match order {
        Order::Three => F3,
        Order::Five => F5,
        Order::Seven => F7,
        Order::Nine => F9,
        Order::Eleven => F11,
    }
}

/// `f_n(u)` from `u = [u, u_x, u_xx, ...]`; needs `n - 2` entries.
pub fn flux<S: Scalar>(order: Order, u: &[S]) -> Result<S, Error> {
    let need = order.flux_derivatives() + 1;
    if u.len() < need {
        return Err(Error::InsufficientJet { needed: need - 1, have: u.len().saturating_sub(1) });
    }
    Ok(eval_table(table(order), u))
}

/// Evaluate a monomial table; `u` must cover every listed derivative.
pub fn eval_table<S: Scalar>(t: &[Monomial], u: &[S]) -> S {
    let mut acc: Option<S> = None;
    for &(c, ds) in t {
        let mut m = u[ds[0] as usize];
        for &d in &ds[1..] {
            m = m * u[d as usize];
        }
        let term = m * c;
        acc = Some(match acc {
            Some(a) => a + term,
            None => term,
        });
    }
    acc.expect("empty monomial table")
}

/// `f_n(u)` and `grad[j] = df_n / du_j` for `j < n - 2`.
pub fn flux_gradient(order: Order, u: &[f64], grad: &mut [f64]) -> Result<f64, Error> {
    let need = order.flux_derivatives() + 1;
    if u.len() < need || grad.len() < need {
        return Err(Error::InsufficientJet { needed: need - 1, have: u.len().min(grad.len()).saturating_sub(1) });
    }
    grad[..need].iter_mut().for_each(|g| *g = 0.0);
    let mut value = 0.0;
    let mut prefix = [0.0; 12];
    for &(c, ds) in table(order) {
        // prefix[i] = prod of the first i factors; suffix accumulated right to left
        prefix[0] = c;
        for (i, &d) in ds.iter().enumerate() {
            prefix[i + 1] = prefix[i] * u[d as usize];
        }
        value += prefix[ds.len()];
        let mut suffix = 1.0;
        for (i, &d) in ds.iter().enumerate().rev() {
            grad[d as usize] += prefix[i] * suffix;
            suffix *= u[d as usize];
        }
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_state_values() {
        let mut u = [0.0; 11];
        u[0] = 1.0;
        assert_eq!(flux(Order::Three, &u).unwrap(), 2.0);
        assert_eq!(flux(Order::Five, &u).unwrap(), 6.0);
        assert_eq!(flux(Order::Seven, &u).unwrap(), 20.0);
        assert_eq!(flux(Order::Nine, &u).unwrap(), 70.0);
        assert_eq!(flux(Order::Eleven, &u).unwrap(), 252.0);
    }

    #[test]
    fn gradient_matches_dual_numbers() {
        let u = [0.7, -1.3, 0.4, 2.1, -0.6, 0.9, 1.7, -0.2, 0.3];
        for order in Order::ALL {
            let need = order.flux_derivatives() + 1;
            let mut g = [0.0; 9];
            let v = flux_gradient(order, &u, &mut g).unwrap();
            assert!((v - flux(order, &u).unwrap()).abs() <= 1e-12 * v.abs());
            for j in 0..need {
                let mut d = [Dual::default(); 9];
                for i in 0..need {
                    d[i] = Dual::new(u[i], if i == j { 1.0 } else { 0.0 });
                }
                let e = flux(order, &d[..need]).unwrap().du;
                assert!((g[j] - e).abs() <= 1e-12 * e.abs().max(1.0), "{order:?} {j}");
            }
        }
    }

    #[test]
    fn short_jets_are_rejected() {
        assert!(flux(Order::Nine, &[1.0; 6]).is_err());
        assert!(flux(Order::Eleven, &[1.0; 8]).is_err());
        assert!(flux(Order::Nine, &[1.0; 7]).is_ok());
    }

    // Hand expansion of the order-9 flux, kept independent of the table.
    fn f9_direct(u: &[f64]) -> f64 {
        let (u0, u1, u2, u3, u4, u5, u6) = (u[0], u[1], u[2], u[3], u[4], u[5], u[6]);
        18.0 * u0 * u0 * u6 + 108.0 * u0 * u1 * u5 + 228.0 * u0 * u2 * u4 + 210.0 * u1 * u1 * u4
            + 126.0 * u0.powi(4) * u4 + 138.0 * u0 * u3 * u3 + 756.0 * u1 * u2 * u3
            + 1008.0 * u0.powi(3) * u1 * u3 + 182.0 * u2.powi(3) + 756.0 * u0.powi(3) * u2 * u2
            + 3108.0 * u0 * u0 * u1 * u1 * u2 + 420.0 * u0.powi(6) * u2 + 798.0 * u0 * u1.powi(4)
            + 1260.0 * u0.powi(5) * u1 * u1 + 70.0 * u0.powi(9)
    }

    #[test]
    fn tables_have_uniform_weight() {
        // each u_{kx} carries weight k + 1 and the flux of order n has weight n
        for order in Order::ALL {
            for &(_, ds) in table(order) {
                let w: u32 = ds.iter().map(|&d| d as u32 + 1).sum();
                assert_eq!(w, order.n(), "order {order} monomial {ds:?}");
                assert!(ds.iter().all(|&d| (d as usize) <= order.flux_derivatives()));
            }
        }
    }

    #[test]
    fn order_nine_table_matches_direct_expansion() {
        let u = [0.3, -1.1, 0.7, 1.9, -0.4, 0.25, -2.2];
        let a = flux(Order::Nine, &u).unwrap();
        assert!((a - f9_direct(&u)).abs() <= 1e-12 * a.abs());
    }

    fn jet() -> impl Strategy<Value = [f64; 9]> {
        proptest::array::uniform9(-2.0f64..2.0)
    }

    proptest! {
        #[test]
        fn fluxes_are_odd(u in jet(), i in 0usize..5) {
            let order = Order::ALL[i];
            let neg: [f64; 9] = core::array::from_fn(|k| -u[k]);
            let a = flux(order, &u).unwrap();
            let b = flux(order, &neg).unwrap();
            prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn dual_part_is_directional_derivative(u in jet(), v in jet(), i in 1usize..5) {
            let order = Order::ALL[i];
            let d: [Dual; 9] = core::array::from_fn(|k| Dual::new(u[k], v[k]));
            let out = flux(order, &d).unwrap();
            let h = 1e-6;
            let p: [f64; 9] = core::array::from_fn(|k| u[k] + h * v[k]);
            let m: [f64; 9] = core::array::from_fn(|k| u[k] - h * v[k]);
            let fd = (flux(order, &p).unwrap() - flux(order, &m).unwrap()) / (2.0 * h);
            prop_assert!((out.re - flux(order, &u).unwrap()).abs() <= 1e-12 * (1.0 + out.re.abs()));
            prop_assert!((out.du - fd).abs() <= 1e-5 * (1.0 + fd.abs()), "{} {}", out.du, fd);
        }
    }
}
