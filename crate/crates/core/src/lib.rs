//! Quantum trajectories and the operational machinery around them.
//!
//! The crate is organised bottom-up: [`qcore`] holds the linear algebra,
//! [`measure`] the measurement and trajectory layer, [`modal`] the Bell
//! jump process over local states, [`decay`] the counting and homodyne
//! unravelings of a decaying two-level atom, [`hyperion`] the chaotic
//! spin-orbit rotor and its phase-space cuts, and [`statmech`] the Glauber
//! and micro-canonical ergodicity studies. Units have hbar = 1 throughout,
//! except in [`hyperion::units`].

pub mod decay;
pub mod error;
pub mod hyperion;
pub mod measure;
pub mod modal;
pub mod qcore;
pub mod statmech;

pub use error::{QtrajError, Result};
pub use qcore::{
    c64, check_povm, evolve_step, Complex64, OperatorMatrix, PovmKind, PovmSet, Propagator, RngStream, StateVector,
    ValidationReport,
};
