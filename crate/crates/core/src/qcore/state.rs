use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{QtrajError, Result};
use crate::qcore::tol;

/// Complex amplitudes over a finite basis, optionally with basis labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(QtrajError::invalid("amplitudes", "basis dimension must be positive"));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QtrajError::NonFinite { what: "state amplitudes" });
        }
        Ok(Self { amplitudes, labels: None })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// The basis vector `|k>` in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(QtrajError::DimensionMismatch { expected: dim, found: k + 1 });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[k] = Complex64::new(1.0, 0.0);
        Self::new(amps)
    }

    /// Haar-random normalized state drawn from complex Gaussian amplitudes.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self> {
        let amps = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::new(amps)?.normalized()
    }

    pub fn from_dvector(v: &DVector<Complex64>) -> Result<Self> {
        Self::new(v.iter().copied().collect())
    }

    pub fn to_dvector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.amplitudes)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.dim() {
            return Err(QtrajError::DimensionMismatch { expected: self.dim(), found: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, k: usize) -> Complex64 {
        self.amplitudes[k]
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= tol::NORM
    }

    pub fn ensure_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(QtrajError::Unnormalized { norm: self.norm() })
        }
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n <= tol::ZERO_BRANCH {
            return Err(QtrajError::ImpossibleOutcome { outcome: None, norm: n });
        }
        let inv = 1.0 / n;
        for z in &mut self.amplitudes {
            *z *= inv;
        }
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    /// `<self|other>`, antilinear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.check_dim(other.dim())?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn scaled(&self, factor: Complex64) -> StateVector {
        StateVector {
            amplitudes: self.amplitudes.iter().map(|z| z * factor).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn add(&self, other: &StateVector) -> Result<StateVector> {
        self.check_dim(other.dim())?;
        Ok(StateVector {
            amplitudes: self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a + b).collect(),
            labels: self.labels.clone(),
        })
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &StateVector) -> Result<f64> {
        self.check_dim(other.dim())?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Tensor product `self ⊗ other` with `other` as the fast index.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amps.push(a * b);
            }
        }
        StateVector { amplitudes: amps, labels: None }
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(QtrajError::DimensionMismatch { expected: self.dim(), found: dim });
        }
        Ok(())
    }

    pub(crate) fn from_raw(amplitudes: Vec<Complex64>) -> StateVector {
        StateVector { amplitudes, labels: None }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::RngStream;

    #[test]
    fn normalize_gives_unit_norm() {
        let mut s = StateVector::from_real(&[3.0, 4.0]).unwrap();
        s.normalize().unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-12);
        assert!((s.amplitude(0).re - 0.6).abs() < 1e-15);
    }

    #[test]
    fn zero_state_cannot_be_normalized() {
        let mut s = StateVector::from_real(&[0.0, 0.0]).unwrap();
        assert!(matches!(s.normalize(), Err(QtrajError::ImpossibleOutcome { .. })));
    }

    #[test]
    fn rejects_nan_and_empty() {
        assert!(StateVector::from_real(&[f64::NAN]).is_err());
        assert!(StateVector::new(vec![]).is_err());
    }

    #[test]
    fn labels_must_match_dimension() {
        let s = StateVector::basis(2, 0).unwrap();
        assert!(s.clone().with_labels(vec!["h".into()]).is_err());
        let s = s.with_labels(vec!["h".into(), "v".into()]).unwrap();
        assert_eq!(s.labels().unwrap()[1], "v");
    }

    #[test]
    fn inner_product_is_antilinear_in_bra() {
        let a = StateVector::new(vec![Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)]).unwrap();
        let b = StateVector::basis(2, 0).unwrap();
        assert_eq!(a.inner(&b).unwrap(), Complex64::new(0.0, -1.0));
    }

    #[test]
    fn random_states_are_normalized() {
        let mut rng = RngStream::new(1, 0);
        for d in 1..10 {
            assert!(StateVector::random(d, &mut rng).unwrap().is_normalized());
        }
    }

    #[test]
    fn tensor_orders_second_factor_fastest() {
        let a = StateVector::basis(2, 1).unwrap();
        let b = StateVector::basis(3, 2).unwrap();
        let t = a.tensor(&b);
        assert_eq!(t.dim(), 6);
        assert_eq!(t.amplitude(5), Complex64::new(1.0, 0.0));
    }
}
