use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{QtrajError, Result};
use crate::qcore::{tol, StateVector};

/// Dense square complex matrix. The hermitian flag is a verified hint.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    entries: DMatrix<Complex64>,
    hermitian: bool,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

impl OperatorMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(QtrajError::DimensionMismatch { expected: entries.nrows(), found: entries.ncols() });
        }
        if entries.nrows() == 0 {
            return Err(QtrajError::invalid("entries", "operator dimension must be positive"));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QtrajError::NonFinite { what: "operator entries" });
        }
        Ok(Self { entries, hermitian: false })
    }

    /// Builds an operator and verifies it is hermitian.
    pub fn hermitian(entries: DMatrix<Complex64>) -> Result<Self> {
        let mut op = Self::new(entries)?;
        let residual = op.hermiticity_residual();
        if residual > tol::HERMITIAN * op.max_abs().max(1.0) {
            return Err(QtrajError::NonHermitian { residual });
        }
        op.hermitian = true;
        Ok(op)
    }

    pub fn from_real(dim: usize, row_major: &[f64]) -> Result<Self> {
        if row_major.len() != dim * dim {
            return Err(QtrajError::DimensionMismatch { expected: dim * dim, found: row_major.len() });
        }
        Self::new(DMatrix::from_row_iterator(dim, dim, row_major.iter().map(|&x| Complex64::new(x, 0.0))))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        Self::new(DMatrix::from_fn(dim, dim, f))
    }

    pub fn identity(dim: usize) -> Self {
        Self { entries: DMatrix::identity(dim, dim), hermitian: true }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { entries: DMatrix::zeros(dim, dim), hermitian: true }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = DMatrix::zeros(n, n);
        for (k, &v) in values.iter().enumerate() {
            m[(k, k)] = Complex64::new(v, 0.0);
        }
        Self { entries: m, hermitian: true }
    }

    /// `|ket><bra|`.
    pub fn outer(ket: &StateVector, bra: &StateVector) -> Self {
        let k = ket.to_dvector();
        let b = bra.to_dvector();
        Self { entries: &k * b.adjoint(), hermitian: false }
    }

    /// `|psi><psi|`.
    pub fn projector(psi: &StateVector) -> Self {
        let mut op = Self::outer(psi, psi);
        op.hermitian = true;
        op
    }

    /// Projector onto the listed basis indices.
    pub fn basis_projector(dim: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        for k in indices {
            m[(k, k)] = ONE;
        }
        Self { entries: m, hermitian: true }
    }

    /// Hermitian matrix with independent complex Gaussian entries.
    pub fn random_hermitian<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        use rand_distr::StandardNormal;
        let g = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let h = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
        Self { entries: h, hermitian: true }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<Complex64> {
        self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[(i, j)]
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn adjoint(&self) -> Self {
        Self { entries: self.entries.adjoint(), hermitian: self.hermitian }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.dim();
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                r = r.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        r
    }

    pub fn ensure_hermitian(&self) -> Result<()> {
        if self.hermitian {
            return Ok(());
        }
        let residual = self.hermiticity_residual();
        if residual > tol::HERMITIAN * self.max_abs().max(1.0) {
            Err(QtrajError::NonHermitian { residual })
        } else {
            Ok(())
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self { entries: &self.entries * factor, hermitian: self.hermitian && factor.im == 0.0 }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// `A |psi>` without renormalization.
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        psi.check_dim(self.dim())?;
        let n = self.dim();
        let a = psi.amplitudes();
        let mut out = vec![ZERO; n];
        for (j, &aj) in a.iter().enumerate() {
            if aj == ZERO {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.entries[(i, j)] * aj;
            }
        }
        Ok(StateVector::from_raw(out))
    }

    /// `<psi|A|phi>`.
    pub fn matrix_element(&self, psi: &StateVector, phi: &StateVector) -> Result<Complex64> {
        psi.inner(&self.apply(phi)?)
    }

    /// `<psi|A|psi>`.
    pub fn expectation(&self, psi: &StateVector) -> Result<Complex64> {
        self.matrix_element(psi, psi)
    }

    /// Eigen-decomposition of a hermitian operator: ascending eigenvalues and column eigenvectors.
    pub fn eigh(&self) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
        self.ensure_hermitian()?;
        let eig = SymmetricEigen::new(self.entries.clone());
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vecs = DMatrix::from_fn(self.dim(), self.dim(), |i, j| eig.eigenvectors[(i, order[j])]);
        Ok((vals, vecs))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        self.ensure_hermitian()?;
        let eig = SymmetricEigen::new(self.entries.clone());
        Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
    }

    pub fn commutator(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        check_same(self, other)?;
        Ok(Self { entries: &self.entries * &other.entries - &other.entries * &self.entries, hermitian: false })
    }

    /// Kronecker product `self ⊗ other` with `other` as the fast index.
    pub fn kron(&self, other: &OperatorMatrix) -> OperatorMatrix {
        Self { entries: self.entries.kronecker(&other.entries), hermitian: self.hermitian && other.hermitian }
    }

    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> Result<f64> {
        check_same(self, other)?;
        Ok(self.entries.iter().zip(other.entries.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }
}

fn check_same(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(QtrajError::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(())
}

impl<'a> Add<&'a OperatorMatrix> for &'a OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        OperatorMatrix { entries: &self.entries + &rhs.entries, hermitian: self.hermitian && rhs.hermitian }
    }
}

impl<'a> Sub<&'a OperatorMatrix> for &'a OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        OperatorMatrix { entries: &self.entries - &rhs.entries, hermitian: self.hermitian && rhs.hermitian }
    }
}

impl<'a> Mul<&'a OperatorMatrix> for &'a OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        OperatorMatrix { entries: &self.entries * &rhs.entries, hermitian: false }
    }
}

/// Pauli matrices, handy for two-level models.
pub mod pauli {
    use super::*;

    pub fn x() -> OperatorMatrix {
        OperatorMatrix::hermitian(DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])).unwrap()
    }

    pub fn y() -> OperatorMatrix {
        let i = Complex64::new(0.0, 1.0);
        OperatorMatrix::hermitian(DMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO])).unwrap()
    }

    pub fn z() -> OperatorMatrix {
        OperatorMatrix::diagonal(&[1.0, -1.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_constructor_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        assert!(matches!(OperatorMatrix::hermitian(m), Err(QtrajError::NonHermitian { .. })));
    }

    #[test]
    fn non_square_is_rejected() {
        assert!(OperatorMatrix::new(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn projector_is_idempotent() {
        let psi = StateVector::from_real(&[0.6, 0.8]).unwrap();
        let p = OperatorMatrix::projector(&psi);
        assert!((&p * &p).max_abs_diff(&p).unwrap() < 1e-15);
    }

    #[test]
    fn pauli_algebra() {
        let xy = &pauli::x() * &pauli::y();
        let iz = pauli::z().scale(Complex64::new(0.0, 1.0));
        assert!(xy.max_abs_diff(&iz).unwrap() < 1e-15);
    }

    #[test]
    fn eigh_sorted_and_reconstructs() {
        let h = OperatorMatrix::from_real(3, &[2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0]).unwrap();
        let h = OperatorMatrix::hermitian(h.into_entries()).unwrap();
        let (vals, vecs) = h.eigh().unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(3, vals.iter().map(|&v| Complex64::new(v, 0.0))));
        let back = &vecs * d * vecs.adjoint();
        let back = OperatorMatrix::new(back).unwrap();
        assert!(back.max_abs_diff(&h).unwrap() < 1e-12);
        assert!((vals[0] - (2.0 - 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn apply_matches_matrix_product() {
        let x = pauli::x();
        let psi = StateVector::from_real(&[0.6, 0.8]).unwrap();
        let out = x.apply(&psi).unwrap();
        assert_eq!(out.amplitude(0).re, 0.8);
        assert_eq!(out.amplitude(1).re, 0.6);
    }
}
