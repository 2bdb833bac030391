//! Truncated power series in one variable, the engine behind every jet.
//!
//! A `Series` holds the Taylor coefficients `c[k]` of `f(x0 + h)` so that the
//! k-th derivative at `x0` is `k! * c[k]`.

use core::ops::{Add, Mul, Neg, Sub};

/// Number of stored coefficients (degrees `0..LEN`).
pub const LEN: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Series(pub [f64; LEN]);

impl Series {
    pub const ZERO: Series = Series([0.0; LEN]);

    pub fn constant(c: f64) -> Self {
        let mut s = Self::ZERO;
        s.0[0] = c;
        s
    }

    /// `x0 + h`.
    pub fn variable(x0: f64) -> Self {
        let mut s = Self::constant(x0);
        s.0[1] = 1.0;
        s
    }

    pub fn scale(self, c: f64) -> Self {
        let mut out = self;
        for v in out.0.iter_mut() {
            *v *= c;
        }
        out
    }

    pub fn recip(self) -> Self {
        Self::constant(1.0).div(self)
    }

    pub fn div(self, b: Self) -> Self {
        let mut c = [0.0; LEN];
        for k in 0..LEN {
            let mut s = self.0[k];
            for i in 0..k {
                s -= c[i] * b.0[k - i];
            }
            c[k] = s / b.0[0];
        }
        Series(c)
    }

    pub fn deriv(self) -> Self {
        let mut c = [0.0; LEN];
        for k in 0..LEN - 1 {
            c[k] = self.0[k + 1] * (k + 1) as f64;
        }
        Series(c)
    }

    /// Antiderivative with constant term `c0`; the top coefficient of `self` is dropped.
    pub fn integ(self, c0: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = c0;
        for k in 1..LEN {
            c[k] = self.0[k - 1] / k as f64;
        }
        Series(c)
    }

    pub fn atan(self) -> Self {
        let den = Self::constant(1.0) + self * self;
        self.deriv().div(den).integ(libm::atan(self.0[0]))
    }

    /// `sin(phase + w h)`.
    pub fn sin_shift(w: f64, phase: f64) -> Self {
        let (s, c) = (libm::sin(phase), libm::cos(phase));
        let cyc = [s, c, -s, -c];
        let mut out = [0.0; LEN];
        let mut p = 1.0;
        for (k, v) in out.iter_mut().enumerate() {
            *v = p * cyc[k % 4];
            p *= w / (k + 1) as f64;
        }
        Series(out)
    }

    /// `cos(phase + w h)`.
    pub fn cos_shift(w: f64, phase: f64) -> Self {
        Self::sin_shift(w, phase + core::f64::consts::FRAC_PI_2)
    }

    /// `cosh(p + w h) / cosh(p)` given `tanh(p)`; stays finite for any `p`.
    pub fn cosh_ratio(w: f64, tanh_p: f64) -> Self {
        Self::hyp(w, 1.0, tanh_p)
    }

    /// `sinh(p + w h) / cosh(p)` given `tanh(p)`.
    pub fn sinh_ratio(w: f64, tanh_p: f64) -> Self {
        Self::hyp(w, tanh_p, 1.0)
    }

    fn hyp(w: f64, even: f64, odd: f64) -> Self {
        let mut out = [0.0; LEN];
        let mut p = 1.0;
        for (k, v) in out.iter_mut().enumerate() {
            *v = p * if k % 2 == 0 { even } else { odd };
            p *= w / (k + 1) as f64;
        }
        Series(out)
    }

    /// k-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        self.0[k] * factorial(k)
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

impl Add for Series {
    type Output = Series;
    fn add(self, b: Series) -> Series {
        let mut c = self.0;
        for (x, y) in c.iter_mut().zip(b.0) {
            *x += y;
        }
        Series(c)
    }
}

impl Sub for Series {
    type Output = Series;
    fn sub(self, b: Series) -> Series {
        self + (-b)
    }
}

impl Neg for Series {
    type Output = Series;
    fn neg(self) -> Series {
        self.scale(-1.0)
    }
}

impl Mul for Series {
    type Output = Series;
    fn mul(self, b: Series) -> Series {
        let mut c = [0.0; LEN];
        for k in 0..LEN {
            let mut s = 0.0;
            for i in 0..=k {
                s += self.0[i] * b.0[k - i];
            }
            c[k] = s;
        }
        Series(c)
    }
}
