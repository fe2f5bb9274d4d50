//! Numerical tolerances shared by every module.

/// Algebraic identities (completeness, reconstruction, probability sums).
pub const ALGEBRAIC: f64 = 1e-10;
/// Checks that rely on quadrature over phase space.
pub const QUADRATURE: f64 = 1e-6;
/// Born weights down to this negative value are float noise and clamped to zero.
pub const PROB_CLAMP: f64 = 1e-12;
/// Norm deviation accepted for a state that claims to be normalized.
pub const NORM: f64 = 1e-10;
/// Hermiticity, relative to the largest entry magnitude (floored at one).
pub const HERMITIAN: f64 = 1e-12;
/// Branch norms below this are treated as an impossible outcome.
pub const ZERO_BRANCH: f64 = 1e-14;
/// Sampling accepts probability vectors whose sum is this close to one.
pub const SAMPLING_SUM: f64 = 1e-8;
/// Occupations below this carry no Bell rate out of them.
pub const OCCUPIED: f64 = 1e-14;
