//! Hierarchy members and breather velocities.

use crate::Error;

/// Member of the focusing mKdV hierarchy, named by its highest derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Order {
    Three,
    Five,
    Seven,
    Nine,
    Eleven,
}

impl Order {
    pub const ALL: [Order; 5] = [Order::Three, Order::Five, Order::Seven, Order::Nine, Order::Eleven];

    pub fn new(n: u32) -> Result<Self, Error> {
        match n {
            3 => Ok(Order::Three),
            5 => Ok(Order::Five),
            7 => Ok(Order::Seven),
            9 => Ok(Order::Nine),
            11 => Ok(Order::Eleven),
            _ => Err(Error::UnsupportedOrder(n)),
        }
    }

    pub fn n(self) -> u32 {
        match self {
            Order::Three => 3,
            Order::Five => 5,
            Order::Seven => 7,
            Order::Nine => 9,
            Order::Eleven => 11,
        }
    }

    /// `k` in `2k + 1 = n`; the stationary ODE has derivative order `2k`.
    pub fn half(self) -> u32 {
        (self.n() - 1) / 2
    }

    /// Highest derivative of `u` appearing in the flux.
    pub fn flux_derivatives(self) -> usize {
        self.n() as usize - 3
    }

    /// Polynomial degree of the flux.
    pub fn flux_degree(self) -> usize {
        self.n() as usize
    }
}

impl core::fmt::Display for Order {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.n())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Velocities {
    /// Speed entering `y1 = x + delta t + x1`.
    pub delta: f64,
    /// Speed entering `y2 = x + gamma t + x2`.
    pub gamma: f64,
}

pub fn velocities(order: Order, alpha: f64, beta: f64) -> Velocities {
    let a2 = alpha * alpha;
    let b2 = beta * beta;
    let (a4, b4) = (a2 * a2, b2 * b2);
    let (a6, b6) = (a4 * a2, b4 * b2);
    let (a8, b8) = (a4 * a4, b4 * b4);
    let (delta, gamma) = match order {
        Order::Three => (a2 - 3.0 * b2, 3.0 * a2 - b2),
        Order::Five => (
            -a4 + 10.0 * a2 * b2 - 5.0 * b4,
            -b4 + 10.0 * a2 * b2 - 5.0 * a4,
        ),
        Order::Seven => (
            a6 - 21.0 * a4 * b2 + 35.0 * a2 * b4 - 7.0 * b6,
            -b6 + 21.0 * a2 * b4 - 35.0 * a4 * b2 + 7.0 * a6,
        ),
        Order::Nine => (
            -a8 + 36.0 * a6 * b2 - 126.0 * a4 * b4 + 84.0 * a2 * b6 - 9.0 * b8,
            -b8 + 36.0 * a2 * b6 - 126.0 * a4 * b4 + 84.0 * a6 * b2 - 9.0 * a8,
        ),
        Order::Eleven => {
            let (a10, b10) = (a8 * a2, b8 * b2);
            (
                a10 - 55.0 * a8 * b2 + 330.0 * a6 * b4 - 462.0 * a4 * b6 + 165.0 * a2 * b8
                    - 11.0 * b10,
                11.0 * a10 - 165.0 * a8 * b2 + 462.0 * a6 * b4 - 330.0 * a4 * b6
                    + 55.0 * a2 * b8
                    - b10,
            )
        }
    };
    Velocities { delta, gamma }
}

/// Alternative readings of the `84 ...` term of the order-9 phase speed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delta9Reading {
    /// `84 a^2 b^6`, the even-power pattern.
    EvenPower,
    /// `84 a^3 b^6`, as typeset.
    Printed,
    /// `84 a^6 b^2`, copied from the envelope speed.
    Mirrored,
}

impl Delta9Reading {
    pub const ALL: [Delta9Reading; 3] =
        [Delta9Reading::EvenPower, Delta9Reading::Printed, Delta9Reading::Mirrored];

    pub fn label(self) -> &'static str {
        match self {
            Delta9Reading::EvenPower => "84a^2b^6",
            Delta9Reading::Printed => "84a^3b^6",
            Delta9Reading::Mirrored => "84a^6b^2",
        }
    }

    pub fn delta(self, alpha: f64, beta: f64) -> f64 {
        let a2 = alpha * alpha;
        let b2 = beta * beta;
        let odd = match self {
            Delta9Reading::EvenPower => a2 * b2 * b2 * b2,
            Delta9Reading::Printed => a2 * alpha * b2 * b2 * b2,
            Delta9Reading::Mirrored => a2 * a2 * a2 * b2,
        };
        -a2 * a2 * a2 * a2 + 36.0 * a2 * a2 * a2 * b2 - 126.0 * a2 * a2 * b2 * b2 + 84.0 * odd
            - 9.0 * b2 * b2 * b2 * b2
    }
}

/// Speed of the soliton `sqrt(c) sech(sqrt(c)(x - v t))`: `c^k` with `n = 2k + 1`.
pub fn soliton_speed(order: Order, c: f64) -> f64 {
    libm::pow(c, order.half() as f64)
}
