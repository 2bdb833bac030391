//! Densities of the conserved quantities.

/// Conserved quantity selected by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Density {
    /// `u^2 / 2`
    Mass,
    /// `(u_x^2 - u^4) / 2`
    Energy,
    E5,
    E7,
    E9,
}

impl Density {
    pub const ALL: [Density; 5] = [Density::Mass, Density::Energy, Density::E5, Density::E7, Density::E9];

    /// Highest derivative the density reads.
    pub fn derivatives(self) -> usize {
        match self {
            Density::Mass => 0,
            Density::Energy => 1,
            Density::E5 => 2,
            Density::E7 => 3,
            Density::E9 => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Density::Mass => "M",
            Density::Energy => "E",
            Density::E5 => "E5",
            Density::E7 => "E7",
            Density::E9 => "E9",
        }
    }

    /// Evaluate at `u = [u, u_x, ...]`; panics if too few derivatives are supplied.
    pub fn eval(self, u: &[f64]) -> f64 {
        let u0 = u[0];
        let u02 = u0 * u0;
        match self {
            Density::Mass => 0.5 * u02,
            Density::Energy => 0.5 * (u[1] * u[1] - u02 * u02),
            Density::E5 => {
                let (u1, u2) = (u[1], u[2]);
                0.5 * u2 * u2 - 5.0 * u02 * u1 * u1 + u02 * u02 * u02
            }
            Density::E7 => {
                let (u1, u2, u3) = (u[1], u[2], u[3]);
                let u12 = u1 * u1;
                let u04 = u02 * u02;
                0.5 * u3 * u3 + 3.5 * u12 * u12 - 7.0 * u02 * u2 * u2 + 35.0 * u04 * u12
                    - 2.5 * u04 * u04
            }
            Density::E9 => {
                let (u1, u2, u3, u4) = (u[1], u[2], u[3], u[4]);
                let (u12, u22) = (u1 * u1, u2 * u2);
                let u04 = u02 * u02;
                0.5 * u4 * u4 - 9.0 * u02 * u3 * u3 + 20.0 * u0 * u22 * u2 + 51.0 * u12 * u22
                    + 63.0 * u04 * u22
                    - 133.0 * u02 * u12 * u12
                    - 210.0 * u04 * u02 * u12
                    + 7.0 * u04 * u04 * u02
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_states() {
        let u = [1.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(Density::Mass.eval(&u), 0.5);
        assert_eq!(Density::Energy.eval(&u), -0.5);
        assert_eq!(Density::E5.eval(&u), 1.0);
        assert_eq!(Density::E7.eval(&u), -2.5);
        assert_eq!(Density::E9.eval(&u), 7.0);
    }

    #[test]
    fn zero_state_is_zero() {
        for d in Density::ALL {
            assert_eq!(d.eval(&[0.0; 5]), 0.0);
        }
    }

    #[test]
    fn densities_are_even() {
        let u = [0.4, -1.2, 0.9, 2.1, -0.3];
        let n: [f64; 5] = core::array::from_fn(|k| -u[k]);
        for d in Density::ALL {
            assert_eq!(d.eval(&u), d.eval(&n));
        }
    }
}
