//! Localized perturbation shapes normalized in `H^2`.

use mkdv_core::{breather, phase_derivatives, BreatherParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::functionals::sobolev_norm;
use crate::grid::{Fourier, SampledField};
use crate::spectral::parameter_step;
use crate::LabError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// Gaussian bump one decay length right of the envelope centre.
    Gaussian,
    /// Translation direction `B1`.
    Kernel,
    /// `d B / d beta`, the direction on which the quadratic form is negative.
    ScalingBeta,
    /// Oscillating wave packet left of the centre.
    Packet,
    /// Eight bumps with seeded random signs, positions and widths.
    Random,
}

impl Shape {
    pub const ALL: [Shape; 5] = [Shape::Gaussian, Shape::Kernel, Shape::ScalingBeta, Shape::Packet, Shape::Random];

    pub fn label(self) -> &'static str {
        match self {
            Shape::Gaussian => "gaussian",
            Shape::Kernel => "kernel",
            Shape::ScalingBeta => "scaling_beta",
            Shape::Packet => "packet",
            Shape::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Shape> {
        Shape::ALL.into_iter().find(|x| x.label() == s)
    }
}

fn bump(x: f64, c: f64, w: f64) -> f64 {
    (-((x - c) / w).powi(2)).exp()
}

/// Raw profile before normalization.
fn profile(shape: Shape, xs: &[f64], p: &BreatherParams, t: f64, seed: u64) -> Result<Vec<f64>, LabError> {
    let (center, beta) = (p.center(t), p.beta);
    Ok(match shape {
        Shape::Gaussian => xs.iter().map(|&x| bump(x, center + 1.0 / beta, 1.0 / beta)).collect(),
        Shape::Kernel => xs.iter().map(|&x| phase_derivatives(p, t, x).b1).collect(),
        Shape::ScalingBeta => {
            let h = parameter_step(beta);
            let (up, down) = (p.with_beta(beta + h)?, p.with_beta(beta - h)?);
            xs.iter().map(|&x| (breather(&up, t, x) - breather(&down, t, x)) / (2.0 * h)).collect()
        }
        Shape::Packet => xs
            .iter()
            .map(|&x| (1.5 * beta * (x - center)).sin() * bump(x, center - 0.5 / beta, 1.5 / beta))
            .collect(),
        Shape::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bumps: Vec<(f64, f64, f64)> = (0..8)
                .map(|_| {
                    let a = rng.random_range(-1.0..1.0);
                    let c = center + rng.random_range(-3.0..3.0) / beta;
                    let w = rng.random_range(0.5..1.5) / beta;
                    (a, c, w)
                })
                .collect();
            xs.iter().map(|&x| bumps.iter().map(|&(a, c, w)| a * bump(x, c, w)).sum()).collect()
        }
    })
}

/// Perturbation around the breather `p` at time `t`, with `H^2` norm `eta` and spectral
/// derivatives up to `m`.
pub fn perturbation(
    fourier: &Fourier,
    shape: Shape,
    p: &BreatherParams,
    t: f64,
    seed: u64,
    eta: f64,
    m: usize,
) -> Result<SampledField, LabError> {
    let raw = SampledField::spectral(fourier, profile(shape, &fourier.window.points(), p, t, seed)?, m);
    let norm = sobolev_norm(&raw, 2);
    Ok(raw.scaled(eta / norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Window;
    use mkdv_core::Order;

    #[test]
    fn shapes_have_the_requested_norm_and_decay() {
        let p = BreatherParams::centered(Order::Five, 1.0, 1.0).unwrap();
        let f = Fourier::new(Window::new(0.0, 40.0, 1024).unwrap());
        for s in Shape::ALL {
            let z = perturbation(&f, s, &p, 0.0, 7, 1e-2, 2).unwrap();
            assert!((sobolev_norm(&z, 2) - 1e-2).abs() < 1e-14);
            assert!(z.edge_magnitude() < 1e-12, "{s:?}");
            assert_eq!(Shape::parse(s.label()), Some(s));
        }
    }

    #[test]
    fn random_shape_is_seeded() {
        let p = BreatherParams::centered(Order::Five, 1.0, 1.0).unwrap();
        let f = Fourier::new(Window::new(0.0, 40.0, 256).unwrap());
        let a = perturbation(&f, Shape::Random, &p, 0.0, 3, 1.0, 0).unwrap();
        let b = perturbation(&f, Shape::Random, &p, 0.0, 3, 1.0, 0).unwrap();
        let c = perturbation(&f, Shape::Random, &p, 0.0, 4, 1.0, 0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
