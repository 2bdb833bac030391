//! Closed forms for the focusing mKdV hierarchy of orders 3 to 11.
//!
//! Breathers are evaluated through truncated power series of
//! `2 atan((b/a) sin(a y1) / cosh(b y2))`, so every x-derivative up to
//! [`jets::MAX_JET`] comes out at machine precision without symbolic expansion.
//! Nothing here allocates except the identity term lists.

#![no_std]

extern crate alloc;

pub mod density;
pub mod flux;
pub mod identity;
pub mod jets;
pub mod order;
pub mod series;

pub use density::Density;
pub use flux::{flux, flux_gradient, Dual, Scalar};
pub use identity::{Factor, Identity, IdentityId, Point, Substitution, Term};
pub use jets::{
    breather, breather_jet, partial_mass, partial_mass_t, phase_derivatives, soliton, soliton_jet,
    wronskian, BreatherParams, Jet, SolitonParams, MAX_JET,
};
pub use order::{soliton_speed, velocities, Delta9Reading, Order, Velocities};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unsupported order {0}; expected one of 3, 5, 7, 9, 11")]
    UnsupportedOrder(u32),
    #[error("identity not defined for order {0}")]
    WrongOrder(u32),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("jet order {requested} exceeds the maximum {max}")]
    JetOrder { requested: usize, max: usize },
    #[error("flux needs {needed} derivatives, jet has {have}")]
    InsufficientJet { needed: usize, have: usize },
    #[error("malformed substitution at term {0}")]
    MalformedSubstitution(usize),
    #[error("substitution at term {index} has weight {found}, identity has {expected}")]
    WeightMismatch { index: usize, expected: u32, found: u32 },
}
