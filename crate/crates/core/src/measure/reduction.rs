use serde::{Deserialize, Serialize};

use super::{enumerate_histories, MeasurementSchedule, ScheduleStep, TrajectoryRecord};
use crate::error::{QtrajError, Result};
use crate::qcore::{tol, PovmSet, StateVector};

/// The record written by the measuring devices: an outcome history that
/// can only grow.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BranchTag {
    outcome_history: Vec<usize>,
}

impl BranchTag {
    pub fn root() -> Self {
        Self::default()
    }

    pub fn from_history(outcomes: &[usize]) -> Self {
        Self { outcome_history: outcomes.to_vec() }
    }

    pub fn push(&mut self, outcome: usize) {
        self.outcome_history.push(outcome);
    }

    pub fn extended(&self, outcome: usize) -> Self {
        let mut t = self.clone();
        t.push(outcome);
        t
    }

    pub fn history(&self) -> &[usize] {
        &self.outcome_history
    }

    pub fn len(&self) -> usize {
        self.outcome_history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcome_history.is_empty()
    }

    pub fn is_prefix_of(&self, other: &BranchTag) -> bool {
        other.outcome_history.starts_with(&self.outcome_history)
    }
}

/// System state entangled with orthogonal pointer records.
///
/// `|Psi> = sum_b |M_b> (x) |phi_b>` where each `|M_b>` is labelled by a
/// [`BranchTag`]. The pointer states are never stored; their exact
/// orthogonality is carried by the distinct labels.
#[derive(Clone, Debug)]
pub struct GlobalState {
    branches: Vec<(BranchTag, StateVector)>,
}

impl GlobalState {
    pub fn new(psi: StateVector) -> Self {
        Self { branches: vec![(BranchTag::root(), psi)] }
    }

    pub fn branches(&self) -> &[(BranchTag, StateVector)] {
        &self.branches
    }

    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(|(_, s)| s.norm_sqr()).sum()
    }

    pub fn branch(&self, tag: &BranchTag) -> Option<&StateVector> {
        self.branches.iter().find(|(t, _)| t == tag).map(|(_, s)| s)
    }

    /// Total weight of all branches whose record starts with `prefix`.
    pub fn weight_of_prefix(&self, prefix: &BranchTag) -> f64 {
        self.branches.iter().filter(|(t, _)| prefix.is_prefix_of(t)).map(|(_, s)| s.norm_sqr()).sum()
    }

    /// Every branch splits into one child per outcome; pointers record it.
    pub fn measure(&self, povm: &PovmSet) -> Result<GlobalState> {
        let mut next = Vec::with_capacity(self.branches.len() * povm.len());
        for (tag, phi) in &self.branches {
            for i in 0..povm.len() {
                next.push((tag.extended(i), povm.update_operator(i).apply(phi)?));
            }
        }
        Ok(GlobalState { branches: next })
    }

    /// Pushes the whole global state through a schedule.
    pub fn run(&self, schedule: &MeasurementSchedule) -> Result<GlobalState> {
        let mut g = self.clone();
        for step in schedule.steps() {
            g = match step {
                ScheduleStep::Unitary { propagator, duration, .. } => GlobalState {
                    branches: g
                        .branches
                        .iter()
                        .map(|(t, s)| Ok((t.clone(), propagator.apply(s, *duration)?)))
                        .collect::<Result<_>>()?,
                },
                ScheduleStep::Measure { povm, .. } => g.measure(povm)?,
            };
        }
        Ok(g)
    }

    /// Explicit vector in `pointer (x) system` ordering, with the pointer
    /// basis indexed by branch order.
    pub fn to_state_vector(&self) -> Result<(StateVector, Vec<BranchTag>)> {
        let d = self.branches[0].1.dim();
        let mut amps = Vec::with_capacity(d * self.branches.len());
        for (_, s) in &self.branches {
            s.check_dim(d)?;
            amps.extend_from_slice(s.amplitudes());
        }
        Ok((StateVector::new(amps)?, self.branches.iter().map(|(t, _)| t.clone()).collect()))
    }

    /// Renormalized system state of the branch recorded as `tag`.
    pub fn reduce(&self, tag: &BranchTag) -> Result<StateVector> {
        let phi = self.branch(tag).ok_or_else(|| QtrajError::invalid("record", "history not present in the global state"))?;
        let norm = phi.norm();
        if norm <= tol::ZERO_BRANCH {
            return Err(QtrajError::ImpossibleOutcome { outcome: tag.history().last().copied(), norm });
        }
        phi.clone().normalized()
    }

    /// Future outcome distribution conditioned on `history`, computed from
    /// the full global state without any reduction.
    pub fn conditional_distribution(&self, history: &BranchTag, future: &MeasurementSchedule) -> Result<Vec<(Vec<usize>, f64)>> {
        let w0 = self.weight_of_prefix(history);
        if w0 <= tol::ZERO_BRANCH * tol::ZERO_BRANCH {
            return Err(QtrajError::ImpossibleOutcome { outcome: history.history().last().copied(), norm: w0.sqrt() });
        }
        let later = self.run(future)?;
        let k = history.len();
        let mut out: Vec<(Vec<usize>, f64)> = later
            .branches
            .iter()
            .filter(|(t, _)| history.is_prefix_of(t))
            .map(|(t, s)| (t.history()[k..].to_vec(), s.norm_sqr() / w0))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }
}

/// The state to use after the record `record.branch` has been written.
pub fn reduce_global(record: &TrajectoryRecord, full: &GlobalState) -> Result<StateVector> {
    full.reduce(&record.branch)
}

/// Projects an explicit `pointer (x) system` vector onto pointer state
/// `pointer_index` and renormalizes the system factor.
pub fn reduce_pointer_register(full: &StateVector, pointer_dim: usize, pointer_index: usize) -> Result<StateVector> {
    if pointer_dim == 0 || full.dim() % pointer_dim != 0 {
        return Err(QtrajError::DimensionMismatch { expected: pointer_dim, found: full.dim() });
    }
    if pointer_index >= pointer_dim {
        return Err(QtrajError::DimensionMismatch { expected: pointer_dim, found: pointer_index + 1 });
    }
    let d = full.dim() / pointer_dim;
    let block = StateVector::new(full.amplitudes()[pointer_index * d..(pointer_index + 1) * d].to_vec())?;
    let norm = block.norm();
    if norm <= tol::ZERO_BRANCH {
        return Err(QtrajError::ImpossibleOutcome { outcome: Some(pointer_index), norm });
    }
    block.normalized()
}

/// Largest total-variation distance, over all first-stage histories of
/// non-zero weight, between the future outcome distribution obtained from
/// the reduced state and from the full global state.
pub fn reduction_tv_distance(first: &MeasurementSchedule, future: &MeasurementSchedule, psi0: &StateVector) -> Result<f64> {
    let global = GlobalState::new(psi0.clone()).run(first)?;
    let mut worst: f64 = 0.0;
    for (tag, phi) in global.branches() {
        if phi.norm() <= tol::ZERO_BRANCH {
            continue;
        }
        let reduced = global.reduce(tag)?;
        let mut from_reduced: Vec<(Vec<usize>, f64)> =
            enumerate_histories(future, &reduced)?.into_iter().map(|h| (h.outcomes, h.probability)).collect();
        from_reduced.sort_by(|a, b| a.0.cmp(&b.0));
        let from_full = global.conditional_distribution(tag, future)?;
        if from_full.len() != from_reduced.len() {
            return Err(QtrajError::DimensionMismatch { expected: from_full.len(), found: from_reduced.len() });
        }
        let tv = 0.5 * from_full.iter().zip(&from_reduced).map(|(a, b)| (a.1 - b.1).abs()).sum::<f64>();
        worst = worst.max(tv);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::measure::{noisy_splitter_ops, polarization, run_trajectory};
    use crate::qcore::{operator::pauli, OperatorMatrix, RngStream};

    fn photon() -> StateVector {
        polarization::state(c64(0.6, 0.0), c64(0.0, 0.8)).unwrap()
    }

    #[test]
    fn tags_are_append_only() {
        let mut t = BranchTag::root();
        t.push(1);
        let snapshot = t.clone();
        t.push(0);
        assert_eq!(t.history(), &[1, 0]);
        assert!(snapshot.is_prefix_of(&t));
        assert_eq!(snapshot.history(), &[1]);
    }

    #[test]
    fn reduction_after_polarization_click() {
        let g = GlobalState::new(photon()).measure(&polarization::projective()).unwrap();
        let h = g.reduce(&BranchTag::from_history(&[0])).unwrap();
        assert!(h.max_abs_diff(&StateVector::basis(2, 0).unwrap()).unwrap() < 1e-15);
        let (explicit, tags) = g.to_state_vector().unwrap();
        assert_eq!(tags.len(), 2);
        assert!((explicit.norm() - 1.0).abs() < 1e-15);
        let via_vector = reduce_pointer_register(&explicit, 2, 0).unwrap();
        assert!(via_vector.max_abs_diff(&h).unwrap() < 1e-15);
    }

    #[test]
    fn no_reduction_before_any_click() {
        let g = GlobalState::new(photon());
        let r = g.reduce(&BranchTag::root()).unwrap();
        assert!(r.max_abs_diff(&photon()).unwrap() < 1e-15);
        assert!(r.max_abs_diff(&StateVector::basis(2, 0).unwrap()).unwrap() > 0.5);
    }

    #[test]
    fn epr_branch_marginal_is_pure() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![c64(0.0, 0.0); 4];
        amps[0] = c64(s, 0.0);
        amps[3] = c64(s, 0.0);
        let pair = StateVector::new(amps).unwrap();
        let id = OperatorMatrix::identity(2);
        let on_first = PovmSet::new(
            polarization::projective().elements().iter().map(|p| p.kron(&id)).collect(),
            crate::PovmKind::Kraus,
        )
        .unwrap();
        let g = GlobalState::new(pair).measure(&on_first).unwrap();
        let reduced = g.reduce(&BranchTag::from_history(&[0])).unwrap();
        let h = StateVector::basis(2, 0).unwrap();
        assert!(reduced.max_abs_diff(&h.tensor(&h)).unwrap() < 1e-15);
    }

    #[test]
    fn zero_weight_branch_is_impossible() {
        let g = GlobalState::new(StateVector::basis(2, 0).unwrap()).measure(&polarization::projective()).unwrap();
        assert!(matches!(g.reduce(&BranchTag::from_history(&[1])), Err(QtrajError::ImpossibleOutcome { .. })));
    }

    #[test]
    fn reduced_and_full_predictions_agree() {
        let first = MeasurementSchedule::new().measure(polarization::projective(), "split").unwrap();
        let future = MeasurementSchedule::new()
            .unitary(&pauli::y(), 0.3, "rotate")
            .unwrap()
            .measure(noisy_splitter_ops(0.15).unwrap(), "noisy")
            .unwrap();
        assert!(reduction_tv_distance(&first, &future, &photon()).unwrap() < 1e-14);
    }

    #[test]
    fn reduce_from_sampled_record() {
        let sched = MeasurementSchedule::new().measure(polarization::projective(), "split").unwrap();
        let g = GlobalState::new(photon()).run(&sched).unwrap();
        let rec = run_trajectory(&sched, &photon(), &mut RngStream::new(4, 0)).unwrap();
        let reduced = reduce_global(&rec, &g).unwrap();
        let last = rec.conditioned_states.last().unwrap();
        assert!((reduced.inner(last).unwrap().norm() - 1.0).abs() < 1e-14);
    }
}
