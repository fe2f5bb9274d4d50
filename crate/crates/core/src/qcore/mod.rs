//! Finite-dimensional state vectors, operators, unitary stepping, POVM
//! validation and reproducible random streams.

mod evolve;
pub mod operator;
mod povm;
mod rng;
mod state;
pub mod tol;

pub use evolve::{evolve_step, Propagator};
pub use operator::OperatorMatrix;
pub use povm::{check_povm, CommutatorNorm, PovmKind, PovmSet, ValidationReport};
pub use rng::RngStream;
pub use state::StateVector;

pub use num_complex::Complex64;

/// Shorthand for a complex number.
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
