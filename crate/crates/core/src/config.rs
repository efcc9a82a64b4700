//! Run configuration: one TOML file with a `schema_version` and one table per
//! command. Unknown keys are rejected everywhere; the command reads only its own table.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuits::ProjectorSetting;
use crate::estimation::EfficiencyRatios;
use crate::protocols::{BellProjection, Efficiencies, Interconnect, NoiseKnobs, SwapMode};
use crate::source::{JsdGridSpec, PumpPulse, RingRecord, SchmidtSpectrum};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("schema_version {found} is not supported (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("missing [{0}] table")]
    MissingSection(&'static str),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

/// Named default parameter pack: the characterized ring table and the pulsed pump.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    #[default]
    #[serde(rename = "paper-2019")]
    Paper2019,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub preset: Preset,
    pub sources: Option<SourcesConfig>,
    pub simulate: Option<SimulateConfig>,
    pub sweep: Option<SweepConfig>,
    pub tomo: Option<TomoConfig>,
    pub certify: Option<CertifyConfig>,
    pub correct_counts: Option<CorrectCountsConfig>,
    /// Directory of the config file; relative input paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion {
                found: cfg.schema_version,
            });
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn read_input(&self, p: &Path) -> Result<String, ConfigError> {
        let path = self.resolve(p);
        std::fs::read_to_string(&path).map_err(|source| ConfigError::Read { path, source })
    }
}

// ---------------------------------------------------------------- sources

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourcesConfig {
    /// Restrict to one ring by name; all rings when absent.
    pub ring: Option<String>,
    /// JSON array of ring records replacing the built-in table.
    pub ring_file: Option<PathBuf>,
    pub pump: PumpPulse,
    pub grid: JsdGridSpec,
    /// Every `jsd_stride`-th grid point is written to the joint-spectrum table.
    pub jsd_stride: usize,
    /// Transmission scan: points and half-span around resonance, in pm.
    pub spectrum_points: usize,
    pub spectrum_span_pm: f64,
    /// Points of the numerical Lorentzian linewidth fit.
    pub fit_points: usize,
    pub powers_mw: Vec<f64>,
    /// Input-to-ring coupling loss for the on-chip photon-number convention.
    pub coupling_loss_db: f64,
}

impl Default for SourcesConfig {
    fn default() -> Self {
        Self {
            ring: None,
            ring_file: None,
            pump: PumpPulse::paper(),
            grid: JsdGridSpec::default(),
            jsd_stride: 8,
            spectrum_points: 401,
            spectrum_span_pm: 200.0,
            fit_points: 801,
            powers_mw: vec![0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6],
            coupling_loss_db: 1.25,
        }
    }
}

impl SourcesConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.jsd_stride == 0 {
            return invalid("jsd_stride must be at least 1");
        }
        if self.spectrum_points < 2 || !(self.spectrum_span_pm > 0.0) {
            return invalid("spectrum needs at least 2 points and a positive span");
        }
        if self.powers_mw.is_empty() || self.powers_mw.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return invalid("powers_mw must be a non-empty list of positive powers");
        }
        if !(self.coupling_loss_db.is_finite() && self.coupling_loss_db >= 0.0) {
            return invalid("coupling_loss_db must be non-negative");
        }
        Ok(())
    }

    /// Ring records after the file override and the name filter.
    pub fn rings(&self, cfg: &RunConfig) -> Result<Vec<RingRecord>, ConfigError> {
        let all = match &self.ring_file {
            Some(p) => serde_json::from_str::<Vec<RingRecord>>(&cfg.read_input(p)?)
                .map_err(|e| ConfigError::Invalid(format!("ring_file: {e}")))?,
            None => crate::source::paper_rings(),
        };
        let picked: Vec<RingRecord> = match &self.ring {
            Some(name) => all.into_iter().filter(|r| r.name.eq_ignore_ascii_case(name)).collect(),
            None => all,
        };
        if picked.is_empty() {
            return invalid(format!("no ring named {}", self.ring.as_deref().unwrap_or("?")));
        }
        for r in &picked {
            r.params.validate().map_err(|e| ConfigError::Invalid(format!("{}: {e}", r.name)))?;
        }
        Ok(picked)
    }
}

// ---------------------------------------------------------------- noise

/// One `n̄` for every ring, or one per ring.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum NbarSpec {
    Uniform(f64),
    PerRing([f64; 4]),
}

impl Default for NbarSpec {
    fn default() -> Self {
        NbarSpec::Uniform(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedEfficiency {
    Ideal,
    Paper,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum EfficiencySpec {
    Named(NamedEfficiency),
    Custom(Efficiencies),
}

impl Default for EfficiencySpec {
    fn default() -> Self {
        EfficiencySpec::Named(NamedEfficiency::Ideal)
    }
}

/// Noise knobs as written in a config; every field defaults to the ideal chip.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub nbar: NbarSpec,
    /// Two-mode Schmidt spectrum of this purity on every ring.
    pub purity: Option<f64>,
    /// Explicit Schmidt coefficients on every ring.
    pub schmidt: Option<Vec<f64>>,
    pub distinguishability: f64,
    pub efficiency: EfficiencySpec,
    pub interconnect_loss_db: Option<f64>,
}

impl NoiseConfig {
    pub fn knobs(&self) -> Result<NoiseKnobs, ConfigError> {
        let spectrum = match (&self.purity, &self.schmidt) {
            (Some(_), Some(_)) => return invalid("give purity or schmidt, not both"),
            (Some(p), None) => SchmidtSpectrum::two_mode_with_purity(*p),
            (None, Some(c)) => SchmidtSpectrum::new(c.clone()),
            (None, None) => Ok(SchmidtSpectrum::pure()),
        }
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let knobs = NoiseKnobs {
            nbar: match self.nbar {
                NbarSpec::Uniform(n) => [n; 4],
                NbarSpec::PerRing(n) => n,
            },
            schmidt: std::array::from_fn(|_| spectrum.clone()),
            interconnect: self.interconnect_loss_db.map(Interconnect::new),
            distinguishability: self.distinguishability,
            efficiency: match self.efficiency {
                EfficiencySpec::Named(NamedEfficiency::Ideal) => Efficiencies::ideal(),
                EfficiencySpec::Named(NamedEfficiency::Paper) => Efficiencies::paper(),
                EfficiencySpec::Custom(e) => e,
            },
        };
        knobs.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(knobs)
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Bell,
    HomBell,
    HomFusion,
    Teleport,
    Swap,
    Ghz2,
    Ghz3,
    Ghz4,
}

/// A single Bell branch or both.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionChoice {
    PsiPlus,
    PsiMinus,
    #[default]
    Both,
}

impl ProjectionChoice {
    pub fn projections(self) -> Vec<BellProjection> {
        match self {
            ProjectionChoice::PsiPlus => vec![BellProjection::PsiPlus],
            ProjectionChoice::PsiMinus => vec![BellProjection::PsiMinus],
            ProjectionChoice::Both => vec![BellProjection::PsiPlus, BellProjection::PsiMinus],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapChoice {
    Bell,
    Fusion,
    #[default]
    Both,
}

impl SwapChoice {
    pub fn modes(self) -> Vec<SwapMode> {
        match self {
            SwapChoice::Bell => vec![SwapMode::Bell],
            SwapChoice::Fusion => vec![SwapMode::Fusion],
            SwapChoice::Both => vec![SwapMode::Bell, SwapMode::Fusion],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub experiment: Experiment,
    /// Sampled events per measurement setting; 0 keeps exact probabilities.
    #[serde(default)]
    pub shots: u64,
    #[serde(default)]
    pub noise: NoiseConfig,
    /// Relative pump phase of the two rings in the `bell` experiment.
    #[serde(default)]
    pub bell_phase: f64,
    #[serde(default)]
    pub projection: ProjectionChoice,
    #[serde(default)]
    pub swap_mode: SwapChoice,
    /// Samples per fringe over one period.
    #[serde(default = "default_fringe_points")]
    pub fringe_points: usize,
    /// Teleportation inputs; the six cardinal states when absent.
    pub states: Option<Vec<NamedSetting>>,
}

fn default_fringe_points() -> usize {
    25
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedSetting {
    pub name: String,
    pub theta: f64,
    pub phi: f64,
}

impl NamedSetting {
    pub fn setting(&self) -> ProjectorSetting {
        ProjectorSetting::new(self.theta, self.phi)
    }
}

impl SimulateConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.fringe_points < 3 {
            return invalid("fringe_points must be at least 3");
        }
        if !self.bell_phase.is_finite() {
            return invalid("bell_phase must be finite");
        }
        if let Some(states) = &self.states {
            if states.is_empty() {
                return invalid("states must not be empty");
            }
            if states.iter().any(|s| !(s.theta.is_finite() && s.phi.is_finite())) {
                return invalid("state angles must be finite");
            }
            let mut names: Vec<&str> = states.iter().map(|s| s.name.as_str()).collect();
            names.sort_unstable();
            names.dedup();
            if names.len() != states.len() {
                return invalid("state names must be unique");
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- sweep

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// GHZ parity `⟨Ω_x⊗n⟩`.
    Omega,
    /// Raw heralded HOM visibility against `n̄`.
    Nbar,
    /// Bell-operator fringe against the preparation angle.
    Theta,
    /// Fusion fringe against the preparation phase.
    Phi,
    /// Coincidence-to-accidental ratio against pump power (mW).
    Power,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    /// GHZ size for the parity sweep.
    #[serde(default = "default_ghz_n")]
    pub n: usize,
    #[serde(default)]
    pub shots: u64,
    #[serde(default)]
    pub noise: NoiseConfig,
    /// Ring of the power sweep.
    #[serde(default = "default_ring")]
    pub ring: String,
    #[serde(default = "default_loss")]
    pub coupling_loss_db: f64,
}

fn default_ghz_n() -> usize {
    3
}

fn default_ring() -> String {
    "MRR1".into()
}

fn default_loss() -> f64 {
    SourcesConfig::default().coupling_loss_db
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.points == 0 {
            return invalid("sweep range is empty");
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return invalid("sweep bounds must be finite");
        }
        if self.points > 1 && self.start == self.stop {
            return invalid("sweep range is empty");
        }
        if self.variable == SweepVariable::Omega && !(2..=4).contains(&self.n) {
            return invalid("GHZ size must be 2, 3 or 4");
        }
        Ok(())
    }

    /// Evenly spaced abscissae, endpoints included.
    pub fn abscissae(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.start + step * i as f64).collect()
    }
}

// ---------------------------------------------------------------- estimation

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
    Ghz,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomoConfig {
    pub counts: PathBuf,
    /// Per-qubit rail-efficiency ratios applied before reconstruction.
    pub ratios: Option<EfficiencyRatios>,
    pub target: Option<TargetState>,
    /// Monte-Carlo trials for the fidelity error bar; 0 skips it.
    #[serde(default)]
    pub trials: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_max_iterations() -> usize {
    5000
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    pub counts: PathBuf,
    pub ratios: Option<EfficiencyRatios>,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_trials() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectCountsConfig {
    pub counts: PathBuf,
    pub ratios: EfficiencyRatios,
}
