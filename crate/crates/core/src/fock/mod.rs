//! Few-photon Fock-space engine.
//!
//! States are sparse superpositions over [`OccupationState`] basis elements.
//! Every photon lives in a [`Slot`]: a spatial mode plus a discrete spectral
//! label. Linear transforms act on spatial modes only and leave labels alone,
//! so photons carrying different labels never interfere.

mod detect;
mod occupation;
mod oracle;
mod random;
mod state;
mod transform;

pub use detect::{
    click_probability, outcome_distribution, post_select, DetectionPattern, DetectorModel,
    ModeConstraint,
};
pub use occupation::{OccupationState, Slot};
pub use oracle::{brute_force_oracle, ORACLE_MAX_MODES, ORACLE_MAX_PHOTONS};
pub use random::random_unitary;
pub use state::{PureState, PRUNE_THRESHOLD};
pub use transform::{apply_transform, LinearTransform, UNITARY_TOLERANCE};

use thiserror::Error;

/// Failures raised by the Fock engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },
    #[error("matrix is not a contraction (largest singular value {sigma:.6})")]
    NotContraction { sigma: f64 },
    #[error("mode {mode} outside register of {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },
    #[error("mode map lists mode {0} more than once")]
    DuplicateMode(usize),
    #[error("states overlap on mode {0}")]
    Overlap(usize),
    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("invalid detection pattern: {0}")]
    InvalidPattern(String),
    #[error("oracle size limit exceeded: {0}")]
    SizeLimit(String),
}

pub type FockResult<T> = Result<T, FockError>;
