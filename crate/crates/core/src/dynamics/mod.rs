//! Unitary time evolution and the quench / adiabatic detuning protocols.

mod dense;
mod krylov;
mod protocol;

pub use dense::{DenseEvolver, DENSE_MAX_DIM};
pub use krylov::{expm_apply, KrylovOptions, KrylovStats};
pub use protocol::{
    adiabaticity_audit, run_adiabatic, run_protocol, run_quench, time_average, AdiabaticityAudit, PropagationReport,
    PropagatorKind, ProtocolKind, RunOptions, Schedule,
};

use thiserror::Error;

use crate::hilbert::{HilbertError, StateVector};
use crate::model::{ModelError, SparseHamiltonian};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("Krylov step could not reach tolerance {tol:e} (estimate {estimate:e})")]
    ToleranceNotMet { tol: f64, estimate: f64 },
    #[error("state basis does not match the Hamiltonian basis")]
    DimensionMismatch,
    #[error("dimension {dim} exceeds the dense propagator limit")]
    TooLargeForDense { dim: usize },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("time average needs at least 8 samples, got {0}")]
    InsufficientSamples(usize),
    #[error("samples do not uniformly cover the window: {0}")]
    NonUniformSamples(String),
    #[error("{quantity} drift {value:e} exceeds {limit:e}")]
    InvariantViolated {
        quantity: &'static str,
        value: f64,
        limit: f64,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

/// `exp(-i H t) |state>` by Krylov propagation, accurate to `tol` in the
/// 2-norm.
pub fn evolve(state: &StateVector, h: &SparseHamiltonian, t: f64, tol: f64) -> Result<StateVector, DynamicsError> {
    let opts = KrylovOptions {
        tol,
        ..KrylovOptions::default()
    };
    evolve_with(state, h, t, &opts).map(|(s, _)| s)
}

pub fn evolve_with(
    state: &StateVector,
    h: &SparseHamiltonian,
    t: f64,
    opts: &KrylovOptions,
) -> Result<(StateVector, KrylovStats), DynamicsError> {
    if state.basis().as_ref() != h.basis().as_ref() {
        return Err(DynamicsError::DimensionMismatch);
    }
    if t < 0.0 || !t.is_finite() {
        return Err(DynamicsError::InvalidSchedule(format!(
            "evolution time {t} must be finite and >= 0"
        )));
    }
    let (out, stats) = expm_apply(h.matrix(), state.amplitudes(), t, opts)?;
    Ok((StateVector::new(state.basis().clone(), out)?, stats))
}

/// Reference propagation through a full eigendecomposition.
pub fn evolve_dense(state: &StateVector, h: &SparseHamiltonian, t: f64) -> Result<StateVector, DynamicsError> {
    if state.basis().as_ref() != h.basis().as_ref() {
        return Err(DynamicsError::DimensionMismatch);
    }
    Ok(DenseEvolver::new(h)?.evolve(state, t))
}
