//! Estimation from coincidence counts: density matrices, maximum-likelihood
//! tomography, GHZ witnesses, two-basis entanglement bounds, efficiency
//! recalibration and Poissonian Monte-Carlo error bars.

mod certify;
mod correction;
mod density;
mod montecarlo;
mod record;
mod states;
mod tomography;

pub use certify::{
    fidelity_lower_bound_two_basis, gme_concurrence_bound, ghz_fidelity_witness, witness_value, WitnessReport,
};
pub use correction::{correct_counts, reweight_counts, EfficiencyRatios};
pub use density::{DensityMatrix, DENSITY_TOLERANCE};
pub use montecarlo::{poisson_error, resample_poisson, MIN_TRIALS};
pub use record::{bitstrings, parity_sign, Distribution, MeasurementRecord};
pub use states::{basis_ket, bell_state, ghz_state, qubit_ket, BellState};
pub use tomography::{
    born_probabilities, linear_inversion, mle_tomography, outcome_projector, pauli_settings, MleOptions, MleReport,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid measurement record: {0}")]
    InvalidRecord(String),
    #[error("measurement settings do not match: {0}")]
    SettingMismatch(String),
    #[error("unsupported qubit count {0}")]
    WrongQubitCount(usize),
    #[error("reference outcome has zero counts")]
    ZeroReference,
    #[error("record has zero total counts")]
    ZeroTotal,
    #[error("invalid efficiency ratio: {0}")]
    InvalidRatio(String),
    #[error("at least {min} Monte-Carlo trials required, got {got}")]
    TooFewTrials { min: usize, got: usize },
    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl EstimationError {
    /// Errors caused by caller input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, EstimationError::NotDensityMatrix(_) | EstimationError::Numeric(_))
    }
}

pub type EstimationResult<T> = Result<T, EstimationError>;
