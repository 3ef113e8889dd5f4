//! Higher-order Lagrangian and Hamiltonian mechanics on graded bundles built
//! from weighted Lie algebroids.

pub mod algebroid;
pub mod config;
pub mod csvio;
pub mod error;
pub mod expr;
pub mod graded;
pub mod hamilton;
pub mod jet;
pub mod lagrange;
pub mod linalg;
pub mod reduce;
pub mod run;
pub mod ode;
pub mod scalar;

pub use error::{Error, Result};
pub use expr::{parse, ExprError, Expression};
pub use jet::Jet;
pub use scalar::Scalar;

/// Jet over double precision reals.
pub type Jet64 = Jet<f64>;
/// Jet over single precision reals.
pub type Jet32 = Jet<f32>;
/// Jet of jets, carrying mixed second partials.
pub type HyperJet64 = Jet<Jet<f64>>;
