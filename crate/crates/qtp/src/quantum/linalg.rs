//! Small complex linear algebra helpers for the channel kernel.
//!
//! Everything here works on `ndarray` matrices of `Complex64`. Dimensions
//! are tiny (local dimension 2 or 4, joint dimension at most 16), so all
//! routines favour clarity over throughput.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::QuantumError;

/// A dense complex matrix (dimensionless amplitudes).
pub type CMatrix = Array2<Complex64>;

/// Conjugate transpose.
pub fn dagger(m: &CMatrix) -> CMatrix {
    m.t().mapv(|z| z.conj())
}

/// Frobenius norm.
pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn identity(d: usize) -> CMatrix {
    Array2::eye(d)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    ndarray::linalg::kron(a, b)
}

pub fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// A pure state on a space of dimension `dim`, kept normalized to 1
/// within 1e-10 by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Array1<Complex64>,
}

impl StateVector {
    const NORM_TOL: f64 = 1e-10;

    pub fn new(amplitudes: Array1<Complex64>) -> Result<Self, QuantumError> {
        if !amplitudes
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
        {
            return Err(QuantumError::NonFiniteEntries);
        }
        let norm_sq: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        let deviation = (norm_sq - 1.0).abs();
        if deviation > Self::NORM_TOL {
            return Err(QuantumError::NotNormalized { deviation });
        }
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &Array1<Complex64> {
        &self.amplitudes
    }

    /// Inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Apply a matrix: `m |self⟩`. The result need not be normalized, so
    /// the raw amplitude vector is returned.
    pub fn apply(&self, m: &CMatrix) -> Array1<Complex64> {
        m.dot(&self.amplitudes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dagger_conjugates_and_transposes() {
        let m = array![[c(1.0, 2.0), c(3.0, 4.0)], [c(5.0, 6.0), c(7.0, 8.0)]];
        let d = dagger(&m);
        assert_eq!(d[[0, 1]], c(5.0, -6.0));
        assert_eq!(d[[1, 0]], c(3.0, -4.0));
    }

    #[test]
    fn kron_shapes_and_values() {
        let a = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(2.0, 0.0)]];
        let b = identity(2);
        let k = kron(&a, &b);
        assert_eq!(k.dim(), (4, 4));
        assert_eq!(k[[3, 3]], c(2.0, 0.0));
        assert_eq!(k[[0, 0]], c(1.0, 0.0));
        assert_eq!(k[[1, 2]], c(0.0, 0.0));
    }

    #[test]
    fn state_vector_rejects_unnormalized() {
        let v = Array1::from(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            StateVector::new(v),
            Err(QuantumError::NotNormalized { .. })
        ));
    }
}
