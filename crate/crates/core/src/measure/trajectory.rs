use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{born_probabilities, condition_on, sample_outcome, BranchTag};
use crate::error::{QtrajError, Result};
use crate::qcore::{check_povm, tol, OperatorMatrix, PovmKind, PovmSet, Propagator, RngStream, StateVector};

#[derive(Clone, Debug)]
pub enum ScheduleStep {
    Unitary { propagator: Propagator, duration: f64, label: String },
    Measure { povm: PovmSet, label: String },
}

impl ScheduleStep {
    pub fn label(&self) -> &str {
        match self {
            ScheduleStep::Unitary { label, .. } | ScheduleStep::Measure { label, .. } => label,
        }
    }
}

/// An ordered list of unitary segments and measurements.
#[derive(Clone, Debug, Default)]
pub struct MeasurementSchedule {
    steps: Vec<ScheduleStep>,
    dim: Option<usize>,
}

impl MeasurementSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    fn check_dim(&mut self, d: usize) -> Result<()> {
        match self.dim {
            Some(expected) if expected != d => Err(QtrajError::DimensionMismatch { expected, found: d }),
            _ => {
                self.dim = Some(d);
                Ok(())
            }
        }
    }

    pub fn unitary(mut self, h: &OperatorMatrix, duration: f64, label: impl Into<String>) -> Result<Self> {
        if !duration.is_finite() {
            return Err(QtrajError::NonFinite { what: "segment duration" });
        }
        self.check_dim(h.dim())?;
        self.steps.push(ScheduleStep::Unitary { propagator: Propagator::new(h)?, duration, label: label.into() });
        Ok(self)
    }

    /// Appends a measurement. The set must be complete; an effect set must
    /// also be projective so that its elements can act as update operators.
    pub fn measure(mut self, povm: PovmSet, label: impl Into<String>) -> Result<Self> {
        self.check_dim(povm.dim())?;
        let report = check_povm(&povm, tol::ALGEBRAIC)?;
        if !report.pass {
            return Err(QtrajError::invalid(
                "povm",
                format!("completeness residual {:e} or positivity violation", report.completeness_residual),
            ));
        }
        if povm.kind() == PovmKind::Effects && !report.projective {
            return Err(QtrajError::invalid("povm", "a non-projective effect set has no canonical state update"));
        }
        self.steps.push(ScheduleStep::Measure { povm, label: label.into() });
        Ok(self)
    }

    pub fn steps(&self) -> &[ScheduleStep] {
        &self.steps
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn measurement_count(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, ScheduleStep::Measure { .. })).count()
    }
}

/// Everything observed along one sampled trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub outcomes: Vec<usize>,
    pub step_probs: Vec<f64>,
    pub conditioned_states: Vec<StateVector>,
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    pub joint_prob: f64,
    /// `<Phi|Phi>` of the never-renormalized product state.
    pub branch_weight: f64,
    pub branch: BranchTag,
    pub seed: u64,
    pub stream_id: u64,
}

impl TrajectoryRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("records contain only finite numbers")
    }

    /// One header line, then one row per measurement.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let dim = self.conditioned_states.first().map_or(0, |s| s.dim());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_string(), "time".into(), "label".into(), "outcome".into(), "probability".into(), "joint_probability".into()];
        for k in 0..dim {
            header.push(format!("re_{k}"));
            header.push(format!("im_{k}"));
        }
        w.write_record(&header).map_err(csv_err)?;
        let mut joint = 1.0;
        for (n, ((&o, &p), s)) in self.outcomes.iter().zip(&self.step_probs).zip(&self.conditioned_states).enumerate() {
            joint *= p;
            let mut row = vec![n.to_string(), fmt(self.times[n]), self.labels[n].clone(), o.to_string(), fmt(p), fmt(joint)];
            for z in s.amplitudes() {
                row.push(fmt(z.re));
                row.push(fmt(z.im));
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| csv_err(e.into()))?;
        Ok(())
    }
}

pub(crate) fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

pub(crate) fn csv_err(e: csv::Error) -> QtrajError {
    QtrajError::invalid("csv", e.to_string())
}

/// Samples one trajectory through the schedule.
pub fn run_trajectory(schedule: &MeasurementSchedule, psi0: &StateVector, rng: &mut RngStream) -> Result<TrajectoryRecord> {
    psi0.ensure_normalized()?;
    if let Some(d) = schedule.dim() {
        psi0.check_dim(d)?;
    }
    let mut psi = psi0.clone();
    let mut raw = psi0.clone();
    let mut t = 0.0;
    let mut rec = TrajectoryRecord {
        outcomes: Vec::new(),
        step_probs: Vec::new(),
        conditioned_states: Vec::new(),
        times: Vec::new(),
        labels: Vec::new(),
        joint_prob: 1.0,
        branch_weight: 1.0,
        branch: BranchTag::root(),
        seed: rng.seed(),
        stream_id: rng.stream_id(),
    };
    for step in schedule.steps() {
        match step {
            ScheduleStep::Unitary { propagator, duration, .. } => {
                psi = propagator.apply(&psi, *duration)?;
                raw = propagator.apply(&raw, *duration)?;
                t += duration;
            }
            ScheduleStep::Measure { povm, label } => {
                let probs = born_probabilities(povm, &psi)?;
                let i = sample_outcome(&probs, rng)?;
                psi = condition_on(povm, i, &psi)?;
                raw = povm.update_operator(i).apply(&raw)?;
                rec.outcomes.push(i);
                rec.step_probs.push(probs[i]);
                rec.conditioned_states.push(psi.clone());
                rec.times.push(t);
                rec.labels.push(label.clone());
                rec.joint_prob *= probs[i];
                rec.branch.push(i);
            }
        }
    }
    rec.branch_weight = raw.norm_sqr();
    Ok(rec)
}

/// One complete outcome history with its probability and unnormalized branch.
#[derive(Clone, Debug)]
pub struct HistoryWeight {
    pub outcomes: Vec<usize>,
    pub probability: f64,
    pub branch: StateVector,
}

/// Exhaustive enumeration of every outcome history of a schedule.
///
/// Probabilities are branch norms squared, so their sum measures how well
/// the measurements conserve probability.
pub fn enumerate_histories(schedule: &MeasurementSchedule, psi0: &StateVector) -> Result<Vec<HistoryWeight>> {
    let mut frontier = vec![HistoryWeight { outcomes: vec![], probability: psi0.norm_sqr(), branch: psi0.clone() }];
    for step in schedule.steps() {
        frontier = match step {
            ScheduleStep::Unitary { propagator, duration, .. } => frontier
                .into_iter()
                .map(|h| Ok(HistoryWeight { branch: propagator.apply(&h.branch, *duration)?, ..h }))
                .collect::<Result<_>>()?,
            ScheduleStep::Measure { povm, .. } => {
                let mut next = Vec::with_capacity(frontier.len() * povm.len());
                for h in &frontier {
                    for i in 0..povm.len() {
                        let branch = povm.update_operator(i).apply(&h.branch)?;
                        let mut outcomes = h.outcomes.clone();
                        outcomes.push(i);
                        next.push(HistoryWeight { outcomes, probability: branch.norm_sqr(), branch });
                    }
                }
                next
            }
        };
    }
    Ok(frontier)
}
