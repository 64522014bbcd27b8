//! Dense eigendecomposition propagator, used as the reference for small
//! systems and as a fast path when many sample times share one Hamiltonian.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::DynamicsError;
use crate::hilbert::StateVector;
use crate::model::SparseHamiltonian;

/// Largest dimension the dense path accepts.
pub const DENSE_MAX_DIM: usize = 2000;

pub struct DenseEvolver {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl DenseEvolver {
    pub fn new(h: &SparseHamiltonian) -> Result<Self, DynamicsError> {
        if h.dim() > DENSE_MAX_DIM {
            return Err(DynamicsError::TooLargeForDense { dim: h.dim() });
        }
        let eig = SymmetricEigen::new(h.matrix().to_dense());
        Ok(DenseEvolver {
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Coordinates `V^T psi` in the eigenbasis.
    pub fn project(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let v = &self.eigenvectors;
        (0..v.ncols())
            .map(|k| v.column(k).iter().zip(psi).map(|(a, b)| b * *a).sum())
            .collect()
    }

    /// `V exp(-i E t) c`.
    pub fn reconstruct(&self, coords: &[Complex64], t: f64) -> Vec<Complex64> {
        let v = &self.eigenvectors;
        let phased: Vec<Complex64> = coords
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, e)| c * Complex64::from_polar(1.0, -e * t))
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); v.nrows()];
        for (k, p) in phased.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(v.column(k).iter()) {
                *o += p * *a;
            }
        }
        out
    }

    pub fn evolve(&self, state: &StateVector, t: f64) -> StateVector {
        let out = self.reconstruct(&self.project(state.amplitudes()), t);
        StateVector::new(state.basis().clone(), out).expect("same basis")
    }
}
