use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{QtrajError, Result};
use crate::qcore::{OperatorMatrix, StateVector};

/// Cached spectral decomposition of a time-independent hamiltonian.
#[derive(Clone, Debug)]
pub struct Propagator {
    energies: Vec<f64>,
    vectors: DMatrix<Complex64>,
}

impl Propagator {
    pub fn new(h: &OperatorMatrix) -> Result<Self> {
        let (energies, vectors) = h.eigh()?;
        Ok(Self { energies, vectors })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    /// Coefficients of `psi` in the energy eigenbasis.
    pub fn to_eigenbasis(&self, psi: &StateVector) -> Result<DVector<Complex64>> {
        psi.check_dim(self.dim())?;
        Ok(self.vectors.adjoint() * psi.to_dvector())
    }

    pub fn from_eigenbasis(&self, coeffs: &DVector<Complex64>) -> StateVector {
        StateVector::from_raw((&self.vectors * coeffs).iter().copied().collect())
    }

    /// `exp(-i H dt) |psi>` with hbar = 1.
    pub fn apply(&self, psi: &StateVector, dt: f64) -> Result<StateVector> {
        if !dt.is_finite() {
            return Err(QtrajError::NonFinite { what: "time step" });
        }
        let mut c = self.to_eigenbasis(psi)?;
        for (ck, &e) in c.iter_mut().zip(&self.energies) {
            *ck *= Complex64::from_polar(1.0, -e * dt);
        }
        Ok(self.from_eigenbasis(&c))
    }

    /// The unitary `exp(-i H dt)` as a dense operator.
    pub fn unitary(&self, dt: f64) -> OperatorMatrix {
        let phases = DVector::from_iterator(self.dim(), self.energies.iter().map(|&e| Complex64::from_polar(1.0, -e * dt)));
        let u = &self.vectors * DMatrix::from_diagonal(&phases) * self.vectors.adjoint();
        OperatorMatrix::new(u).expect("unitary of a finite hamiltonian is finite")
    }
}

/// One unitary step `exp(-i H dt / hbar) |psi>` with hbar = 1.
pub fn evolve_step(h: &OperatorMatrix, psi: &StateVector, dt: f64) -> Result<StateVector> {
    if !dt.is_finite() {
        return Err(QtrajError::NonFinite { what: "time step" });
    }
    psi.check_dim(h.dim())?;
    Propagator::new(h)?.apply(psi, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::operator::pauli;
    use std::f64::consts::PI;

    #[test]
    fn zero_hamiltonian_is_identity() {
        let psi = StateVector::from_real(&[0.6, 0.8]).unwrap();
        let out = evolve_step(&OperatorMatrix::zeros(2), &psi, 1.0).unwrap();
        assert!(out.max_abs_diff(&psi).unwrap() < 1e-15);
    }

    #[test]
    fn rabi_half_period_oracle() {
        // exp(-i sigma_x t) = cos t - i sin t sigma_x, so |0> -> (cos t, -i sin t).
        let psi = StateVector::basis(2, 0).unwrap();
        let t = PI / 2.0;
        let out = evolve_step(&pauli::x(), &psi, t).unwrap();
        let expect = StateVector::new(vec![Complex64::new(t.cos(), 0.0), Complex64::new(0.0, -t.sin())]).unwrap();
        assert!(out.max_abs_diff(&expect).unwrap() < 1e-12);
        assert!(out.amplitude(0).norm() < 1e-12);
        assert!((out.amplitude(1) - Complex64::new(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian_and_nan() {
        let m = OperatorMatrix::from_real(2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        let psi = StateVector::basis(2, 0).unwrap();
        assert!(matches!(evolve_step(&m, &psi, 1.0), Err(QtrajError::NonHermitian { .. })));
        assert!(evolve_step(&pauli::x(), &psi, f64::NAN).is_err());
    }

    #[test]
    fn unitary_matches_apply() {
        let h = &pauli::x() + &pauli::z().scale_real(0.3);
        let p = Propagator::new(&h).unwrap();
        let psi = StateVector::from_real(&[0.6, 0.8]).unwrap();
        let a = p.apply(&psi, 0.7).unwrap();
        let b = p.unitary(0.7).apply(&psi).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-14);
    }
}
