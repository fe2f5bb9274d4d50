//! Generalized measurements: Born weights, outcome sampling, conditioned
//! updates, multi-step trajectories and the branch bookkeeping behind
//! wave-function reduction.

mod reduction;
mod trajectory;

pub use reduction::{reduce_global, reduce_pointer_register, reduction_tv_distance, BranchTag, GlobalState};
pub use trajectory::{enumerate_histories, run_trajectory, HistoryWeight, MeasurementSchedule, ScheduleStep, TrajectoryRecord};

use crate::error::{QtrajError, Result};
use crate::qcore::{tol, OperatorMatrix, PovmKind, PovmSet, RngStream, StateVector};

/// Unclamped Born weights `<psi|E_i|psi>` for every effect.
pub fn born_weights(ops: &PovmSet, psi: &StateVector) -> Result<Vec<f64>> {
    ops.effects().iter().map(|e| Ok(e.expectation(psi)?.re)).collect()
}

/// Born probabilities for a normalized state.
///
/// Weights in `[-PROB_CLAMP, 0)` are clamped to zero; anything more negative
/// is an error. The result is renormalized once so it sums to one.
pub fn born_probabilities(ops: &PovmSet, psi: &StateVector) -> Result<Vec<f64>> {
    psi.ensure_normalized()?;
    let weights = born_weights(ops, psi)?;
    normalize_weights(weights)
}

pub(crate) fn normalize_weights(mut weights: Vec<f64>) -> Result<Vec<f64>> {
    for (i, w) in weights.iter_mut().enumerate() {
        if !w.is_finite() {
            return Err(QtrajError::NonFinite { what: "Born weight" });
        }
        if *w < -tol::PROB_CLAMP {
            return Err(QtrajError::NegativeProbability { outcome: i, value: *w });
        }
        if *w < 0.0 {
            *w = 0.0;
        }
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(QtrajError::ImpossibleOutcome { outcome: None, norm: total });
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok(weights)
}

/// Inverse-CDF sampling from one uniform draw.
///
/// Outcomes with zero probability are never returned.
pub fn sample_outcome(probs: &[f64], rng: &mut RngStream) -> Result<usize> {
    if probs.is_empty() {
        return Err(QtrajError::invalid("probs", "empty probability vector"));
    }
    if let Some((i, &p)) = probs.iter().enumerate().find(|(_, &p)| p < 0.0 || !p.is_finite()) {
        return Err(QtrajError::NegativeProbability { outcome: i, value: p });
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > tol::SAMPLING_SUM {
        return Err(QtrajError::invalid("probs", format!("probabilities sum to {total}, not 1")));
    }
    let u = rng.uniform() * total;
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    Ok(probs.iter().rposition(|&p| p > 0.0).expect("a positive entry exists when the sum is one"))
}

/// `Omega |psi> / ||Omega |psi>||`.
pub fn condition(omega: &OperatorMatrix, psi: &StateVector) -> Result<StateVector> {
    let branch = omega.apply(psi)?;
    let norm = branch.norm();
    if norm <= tol::ZERO_BRANCH {
        return Err(QtrajError::ImpossibleOutcome { outcome: None, norm });
    }
    Ok(branch.scaled(crate::c64(1.0 / norm, 0.0)))
}

/// Conditioning on outcome `i` of a set, reporting the index on failure.
pub fn condition_on(ops: &PovmSet, i: usize, psi: &StateVector) -> Result<StateVector> {
    condition(ops.update_operator(i), psi).map_err(|e| match e {
        QtrajError::ImpossibleOutcome { norm, .. } => QtrajError::ImpossibleOutcome { outcome: Some(i), norm },
        other => other,
    })
}

/// The imperfect polarizing splitter with leakage amplitude `epsilon`.
///
/// `Omega_1 = sqrt(1-eps^2)|h><h| + eps|v><v|`,
/// `Omega_2 = eps|h><h| + sqrt(1-eps^2)|v><v|`.
pub fn noisy_splitter_ops(epsilon: f64) -> Result<PovmSet> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(QtrajError::invalid("epsilon", format!("{epsilon} is outside [0, 1]")));
    }
    let keep = (1.0 - epsilon * epsilon).sqrt();
    PovmSet::new(
        vec![OperatorMatrix::diagonal(&[keep, epsilon]), OperatorMatrix::diagonal(&[epsilon, keep])],
        PovmKind::Kraus,
    )
}

/// Natural log of the modeled environment overlap `(1 - eps)^n`.
pub fn log_environment_overlap(epsilon: f64, n_dof: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(QtrajError::invalid("epsilon", format!("{epsilon} is outside [0, 1]")));
    }
    if n_dof == 0 {
        return Ok(0.0);
    }
    Ok(n_dof as f64 * (-epsilon).ln_1p())
}

/// `|<E_1|E_2>| = (1 - eps)^n`, evaluated through its logarithm.
pub fn environment_overlap(epsilon: f64, n_dof: u64) -> Result<f64> {
    Ok(log_environment_overlap(epsilon, n_dof)?.exp())
}

/// Polarization basis helpers: index 0 is `|h>`, index 1 is `|v>`.
pub mod polarization {
    use super::*;

    pub fn state(c1: crate::Complex64, c2: crate::Complex64) -> Result<StateVector> {
        StateVector::new(vec![c1, c2])?.with_labels(vec!["h".into(), "v".into()])
    }

    /// The ideal polarizing splitter `{|h><h|, |v><v|}` as a Kraus set.
    pub fn projective() -> PovmSet {
        noisy_splitter_ops(0.0).expect("zero leakage is in range")
    }
}
