use serde::{Deserialize, Serialize};

use crate::error::{QtrajError, Result};
use crate::qcore::{tol, OperatorMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PovmKind {
    /// Positive effects `Pi_i` summing to one.
    Effects,
    /// Measurement operators `Omega_i` with `sum Omega_i^dagger Omega_i = 1`.
    Kraus,
}

/// An ordered set of measurement operators or effects.
#[derive(Clone, Debug)]
pub struct PovmSet {
    elements: Vec<OperatorMatrix>,
    kind: PovmKind,
    effects: Vec<OperatorMatrix>,
}

impl PovmSet {
    pub fn new(elements: Vec<OperatorMatrix>, kind: PovmKind) -> Result<Self> {
        let first = elements.first().ok_or_else(|| QtrajError::invalid("elements", "a POVM needs at least one element"))?;
        let dim = first.dim();
        if let Some(bad) = elements.iter().find(|e| e.dim() != dim) {
            return Err(QtrajError::DimensionMismatch { expected: dim, found: bad.dim() });
        }
        let effects = match kind {
            PovmKind::Effects => elements.clone(),
            PovmKind::Kraus => elements
                .iter()
                .map(|om| {
                    let e = &om.adjoint() * om;
                    OperatorMatrix::hermitian(symmetrize(e.into_entries())).expect("omega^dagger omega is hermitian")
                })
                .collect(),
        };
        Ok(Self { elements, kind, effects })
    }

    pub fn effects_from(elements: Vec<OperatorMatrix>) -> Result<Self> {
        Self::new(elements, PovmKind::Effects)
    }

    pub fn kraus_from(elements: Vec<OperatorMatrix>) -> Result<Self> {
        Self::new(elements, PovmKind::Kraus)
    }

    pub fn kind(&self) -> PovmKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn elements(&self) -> &[OperatorMatrix] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &OperatorMatrix {
        &self.elements[i]
    }

    /// The effects `Pi_i`; for a Kraus set these are `Omega_i^dagger Omega_i`.
    pub fn effects(&self) -> &[OperatorMatrix] {
        &self.effects
    }

    /// The operator that updates the state on outcome `i`.
    ///
    /// For an effect set the update uses `Pi_i` itself, which is the
    /// Lueders rule when the effects are projectors.
    pub fn update_operator(&self, i: usize) -> &OperatorMatrix {
        &self.elements[i]
    }
}

fn symmetrize(m: nalgebra::DMatrix<num_complex::Complex64>) -> nalgebra::DMatrix<num_complex::Complex64> {
    (&m + m.adjoint()) * num_complex::Complex64::new(0.5, 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorNorm {
    pub i: usize,
    pub j: usize,
    /// Largest entry modulus of `[Pi_i, Pi_j]`.
    pub max_abs: f64,
    /// `||[Pi_i, Pi_j]||_F / (||Pi_i||_F ||Pi_j||_F)`.
    pub relative: f64,
}

/// Outcome of validating a POVM. All checks act on the effects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub tol: f64,
    /// `max |(sum Pi_i - 1)_{ab}|`.
    pub completeness_residual: f64,
    /// Smallest eigenvalue of each effect.
    pub min_eigenvalues: Vec<f64>,
    /// Indices of effects with an eigenvalue below `-tol`.
    pub positivity_violations: Vec<usize>,
    /// `max |(Pi^2 - Pi)_{ab}|` per effect.
    pub projectivity_residuals: Vec<f64>,
    /// `tr(Pi - Pi^2) / tr Pi` per effect; zero for projectors.
    pub projectivity_fractions: Vec<f64>,
    pub commutators: Vec<CommutatorNorm>,
    /// Completeness and positivity hold.
    pub pass: bool,
    /// Every effect is a projector within `tol`.
    pub projective: bool,
}

impl ValidationReport {
    pub fn max_projectivity_residual(&self) -> f64 {
        self.projectivity_residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_commutator(&self) -> f64 {
        self.commutators.iter().map(|c| c.max_abs).fold(0.0, f64::max)
    }

    pub fn max_relative_commutator(&self) -> f64 {
        self.commutators.iter().map(|c| c.relative).fold(0.0, f64::max)
    }
}

/// Checks completeness, positivity, projectivity and mutual commutation.
pub fn check_povm(set: &PovmSet, tol: f64) -> Result<ValidationReport> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(QtrajError::invalid("tol", "must be finite and non-negative"));
    }
    let d = set.dim();
    let effects = set.effects();

    let mut total = OperatorMatrix::zeros(d);
    for e in effects {
        total = &total + e;
    }
    let completeness_residual = total.max_abs_diff(&OperatorMatrix::identity(d))?;

    let mut min_eigenvalues = Vec::with_capacity(effects.len());
    let mut projectivity_residuals = Vec::with_capacity(effects.len());
    let mut projectivity_fractions = Vec::with_capacity(effects.len());
    let mut squares = Vec::with_capacity(effects.len());
    for e in effects {
        min_eigenvalues.push(e.min_eigenvalue().unwrap_or(f64::NEG_INFINITY));
        let sq = e * e;
        projectivity_residuals.push(sq.max_abs_diff(e)?);
        let tr = e.trace().re;
        projectivity_fractions.push(if tr.abs() > tol::ZERO_BRANCH { (tr - sq.trace().re) / tr } else { 0.0 });
        squares.push(sq);
    }
    let positivity_violations: Vec<usize> =
        min_eigenvalues.iter().enumerate().filter(|(_, &v)| v < -tol.max(tol::PROB_CLAMP)).map(|(i, _)| i).collect();

    let mut commutators = Vec::new();
    for i in 0..effects.len() {
        for j in (i + 1)..effects.len() {
            let c = effects[i].commutator(&effects[j])?;
            let denom = effects[i].frobenius_norm() * effects[j].frobenius_norm();
            commutators.push(CommutatorNorm {
                i,
                j,
                max_abs: c.max_abs(),
                relative: if denom > 0.0 { c.frobenius_norm() / denom } else { 0.0 },
            });
        }
    }

    let pass = completeness_residual <= tol && positivity_violations.is_empty();
    let projective = projectivity_residuals.iter().all(|&r| r <= tol);
    Ok(ValidationReport {
        tol,
        completeness_residual,
        min_eigenvalues,
        positivity_violations,
        projectivity_residuals,
        projectivity_fractions,
        commutators,
        pass,
        projective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::StateVector;

    fn hv() -> (OperatorMatrix, OperatorMatrix) {
        let h = StateVector::basis(2, 0).unwrap();
        let v = StateVector::basis(2, 1).unwrap();
        (OperatorMatrix::projector(&h), OperatorMatrix::projector(&v))
    }

    #[test]
    fn polarization_projectors_pass() {
        let (h, v) = hv();
        let r = check_povm(&PovmSet::effects_from(vec![h, v]).unwrap(), tol::ALGEBRAIC).unwrap();
        assert!(r.pass && r.projective);
        assert_eq!(r.max_projectivity_residual(), 0.0);
        assert_eq!(r.completeness_residual, 0.0);
    }

    #[test]
    fn half_identity_pair_is_complete_but_not_projective() {
        let half = OperatorMatrix::identity(2).scale_real(0.5);
        let r = check_povm(&PovmSet::effects_from(vec![half.clone(), half]).unwrap(), tol::ALGEBRAIC).unwrap();
        assert!(r.pass);
        assert!(!r.projective);
        assert!((r.max_projectivity_residual() - 0.25).abs() < 1e-15);
        assert_eq!(r.max_commutator(), 0.0);
    }

    #[test]
    fn lone_projector_fails_completeness() {
        let (h, _) = hv();
        let r = check_povm(&PovmSet::effects_from(vec![h]).unwrap(), tol::ALGEBRAIC).unwrap();
        assert!(!r.pass);
        assert!((r.completeness_residual - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let r = PovmSet::effects_from(vec![OperatorMatrix::identity(2), OperatorMatrix::identity(3)]);
        assert!(matches!(r, Err(QtrajError::DimensionMismatch { .. })));
    }

    #[test]
    fn negative_effect_flagged() {
        let a = OperatorMatrix::diagonal(&[1.5, 1.0]);
        let b = OperatorMatrix::diagonal(&[-0.5, 0.0]);
        let r = check_povm(&PovmSet::effects_from(vec![a, b]).unwrap(), tol::ALGEBRAIC).unwrap();
        assert_eq!(r.positivity_violations, vec![1]);
        assert!(!r.pass);
    }

    #[test]
    fn kraus_checks_use_effects() {
        let (h, v) = hv();
        let set = PovmSet::kraus_from(vec![h.scale_real(-1.0), v]).unwrap();
        let r = check_povm(&set, tol::ALGEBRAIC).unwrap();
        assert!(r.pass && r.projective);
    }
}
