//! Null-frame energy estimates for tensorial wave equations on perturbed
//! Minkowski space: exact tensor calculus, weighted energies, a finite
//! difference evolution and measured constants for the estimates.

pub mod certify;
pub mod energy;
pub mod estimates;
pub mod error;
pub mod evolve;
pub mod fields;
pub mod geometry;
pub mod jet;
pub mod poly;
pub mod scalar;
pub mod vecfields;
pub mod weights;

pub use error::{Error, Result};

/// Exact polynomial tensor field with integer coefficients.
pub type ExactField = fields::PolyField<i64>;
/// Polynomial tensor field with `f64` coefficients.
pub type Field64 = fields::PolyField<f64>;
pub type Jet64 = jet::Jet<f64>;
pub type JetField64 = fields::JetField<f64>;
pub type GridField64 = fields::GridField<f64>;
