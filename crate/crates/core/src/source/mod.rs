//! Microring pair-source physics: resonator spectra, joint spectra and
//! Schmidt purity, count-rate algebra, nonlinear loss and curve fitting.

mod fit;
mod jsd;
mod rates;
mod ring;

pub use fit::{levenberg_marquardt, lorentzian_fit, FitOptions, FitResult, LorentzianFit};
pub use jsd::{
    build_jsd, grid_refinement, jsd_purity, schmidt_decompose, JsdGrid, JsdGridSpec, PumpPulse,
    RefinementReport, SchmidtSpectrum, REFINEMENT_TOLERANCE,
};
pub use rates::{
    car, cc_multipair, eta_fca, eta_tpa, extract_source_parameters, fit_quadratic, fit_rates,
    free_carrier_density, g2_fit, g2_heralded, klyshko, mean_photon_number, rates_model,
    visibility, CountRates, G2Fit, NonlinearConstants, PowerConvention, QuadraticFit, RateCoefficients,
    RatePoint, SourceParameters,
};
pub use ring::{
    amzi_fsr_ghz, fit_ring_fwhm_nm, fsr_ghz, fsr_wavelength_nm, fwhm_analytic_nm, fwhm_numeric_nm,
    group_index, heralding_eff_corrected, linewidth_ghz, paper_rings, q_factor, ring_transmission,
    RingParams, RingRecord, SPEED_OF_LIGHT,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SourceError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),
    #[error("input at a pole of {0}")]
    Pole(&'static str),
    #[error("grid too coarse: purity moved by {shift:.3e} under refinement")]
    GridTooCoarse { shift: f64 },
    #[error("joint spectrum is identically zero")]
    DegenerateGrid,
    #[error("design matrix is singular")]
    SingularDesign,
    #[error("fit did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },
}

impl SourceError {
    /// Errors caused by caller input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            SourceError::InvalidParameter(_) | SourceError::ZeroDenominator(_) | SourceError::Pole(_)
        )
    }
}

pub type SourceResult<T> = Result<T, SourceError>;

pub(crate) fn require(cond: bool, msg: impl FnOnce() -> String) -> SourceResult<()> {
    if cond {
        Ok(())
    } else {
        Err(SourceError::InvalidParameter(msg()))
    }
}
