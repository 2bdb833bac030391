//! Numerical laboratory for mKdV breathers: sampled functionals, identity residuals,
//! the linearized spectrum and long-time evolution.

pub mod config;
pub mod evolution;
pub mod functionals;
pub mod grid;
pub mod identities;
pub mod perturb;
pub mod report;
pub mod spectral;
pub mod suite;

pub use grid::{Fourier, SampledField, Window};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] mkdv_core::Error),
    #[error("window: {0}")]
    Window(String),
    #[error("field carries {have} derivatives, {need} needed")]
    MissingDerivatives { need: usize, have: usize },
    #[error("perturbation H^2 norm {0:e} exceeds the expansion range")]
    TooLarge(f64),
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { what: &'static str, iterations: usize, residual: f64 },
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
