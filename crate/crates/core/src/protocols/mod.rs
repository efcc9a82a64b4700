//! Chip-level experiments: pair sources feeding dual-rail qubits, the Bell and
//! fusion operators, post-selection, and the noise model layered on top.

mod chip;
mod experiment;
mod library;
mod visibility;

pub use chip::{
    expand_sources, Efficiencies, Interconnect, NoiseKnobs, PairSource, Ring, MODES, PAPER_IDLER_EFFICIENCY,
    PAPER_SIGNAL_EFFICIENCY, QUBITS,
};
pub use experiment::{
    qubit_vector, sample_shots, CoincidenceTally, ExperimentSpec, Herald, OperatorSetting, Prepared, Projection,
};
pub use library::{
    fringe_value, ghz_spec, ghz_witness_settings, hom_fringe, paper_teleport_states, prepare_bell, run_ghz, run_swapping,
    run_teleportation, swap_spec, teleport_spec, BellProjection, FringeKind, FringeResult, GhzResult, Reconstruction,
    SwapMode, SwapResult, TeleportResult,
};
pub(crate) use library::{fringe_spec, reconstruct};
pub use visibility::{heralded_g2, heralded_hom_visibility, spectral_correlation_visibility, HomOptions, HomVisibility};

use thiserror::Error;

use crate::circuits::CircuitError;
use crate::estimation::EstimationError;
use crate::fock::FockError;
use crate::source::SourceError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("source {0} used twice")]
    SameSource(String),
    #[error("post-selection has zero probability")]
    ZeroSuccess,
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Source(#[from] SourceError),
}

impl ProtocolError {
    /// Errors caused by caller input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        match self {
            ProtocolError::InvalidSpec(_) | ProtocolError::OutOfRange(_) | ProtocolError::SameSource(_) => true,
            ProtocolError::Estimation(e) => e.is_input_error(),
            ProtocolError::Source(e) => e.is_input_error(),
            _ => false,
        }
    }
}

pub type ProtocolResult<T> = Result<T, ProtocolError>;
