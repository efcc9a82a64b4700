//! The `sim` command line: argument parsing, command execution and output.
//!
//! Every command computes its complete output set in memory first; the output
//! directory is only created and written once nothing can fail numerically.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::circuits::ProjectorSetting;
use crate::config::{
    CertifyConfig, ConfigError, CorrectCountsConfig, Experiment, RunConfig, SimulateConfig, SourcesConfig, SweepConfig,
    SweepVariable, TargetState, TomoConfig,
};
use crate::error::{Error, Result};
use crate::estimation::{
    bell_state, correct_counts, fidelity_lower_bound_two_basis, ghz_fidelity_witness, ghz_state, gme_concurrence_bound,
    mle_tomography, parity_sign, pauli_settings, poisson_error, reweight_counts, witness_value, BellState,
    EstimationError, EstimationResult, MeasurementRecord, MleOptions,
};
use crate::io::{
    self, CertificationEntry, CorrectedRow, FringeRow, JsdRow, RateRow, RingRow, SpectrumRow, SummaryRow, SweepRow,
};
use crate::protocols::{
    fringe_spec, ghz_spec, heralded_g2, heralded_hom_visibility, hom_fringe, paper_teleport_states, reconstruct,
    run_ghz, run_swapping, run_teleportation, sample_shots, BellProjection, CoincidenceTally, ExperimentSpec,
    FringeKind, Herald, HomOptions, OperatorSetting, Prepared, ProtocolError, SwapMode,
};
use crate::source::{
    build_jsd, cc_multipair, eta_fca, eta_tpa, extract_source_parameters, fit_rates, fit_ring_fwhm_nm, fsr_ghz,
    fwhm_analytic_nm, g2_fit, grid_refinement, heralding_eff_corrected, jsd_purity, linewidth_ghz, lorentzian_fit,
    mean_photon_number, q_factor, ring_transmission, schmidt_decompose, NonlinearConstants, PowerConvention, RatePoint,
    RingRecord, SchmidtSpectrum, SourceError,
};
use crate::svg::{heatmap, Plot, Series};
use crate::C64;

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "SIM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "sim", version, about = "Photonic multiphoton chip simulator and estimation pipelines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also emit SVG plots.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ring spectra, joint spectra and purity, count rates and fits.
    Sources {
        #[command(flatten)]
        common: CommonArgs,
        /// Restrict to one ring, overriding the config.
        #[arg(long)]
        ring: Option<String>,
    },
    /// Run one chip experiment.
    Simulate(CommonArgs),
    /// Sweep one parameter.
    Sweep(CommonArgs),
    /// Maximum-likelihood tomography of a counts file.
    Tomo(CommonArgs),
    /// Witness and two-basis entanglement bounds with error bars.
    Certify(CommonArgs),
    /// Undo unequal rail efficiencies in a counts file.
    CorrectCounts(CommonArgs),
}

impl Command {
    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Sources { common, .. } => common,
            Command::Simulate(c) | Command::Sweep(c) | Command::Tomo(c) | Command::Certify(c) | Command::CorrectCounts(c) => c,
        }
    }
}

/// Files produced by one command, in write order, plus warnings for stderr.
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, content: String) {
        self.files.push((name.into(), content));
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, content) in &self.files {
            std::fs::write(dir.join(name), content)?;
        }
        Ok(())
    }
}

/// SplitMix64 of `seed` and `index`: disjoint derived seeds for independent workers.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Worker count from [`THREADS_ENV`]; `None` leaves rayon's default.
fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(ConfigError::Invalid(format!("{THREADS_ENV}={v:?} is not a positive integer")).into()),
        },
    }
}

/// Runs a parsed command: executes it and writes its outputs.
pub fn run(cli: &Cli) -> Result<Outputs> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Output(std::io::Error::other(e.to_string())))?;
    let outputs = pool.install(|| execute(&cli.command))?;
    outputs.write(&cli.command.common().out)?;
    Ok(outputs)
}

/// Computes a command's outputs without touching the file system beyond its inputs.
pub fn execute(command: &Command) -> Result<Outputs> {
    let common = command.common();
    let cfg = RunConfig::load(&common.config)?;
    match command {
        Command::Sources { ring, .. } => {
            let mut sc = cfg.sources.clone().unwrap_or_default();
            if ring.is_some() {
                sc.ring = ring.clone();
            }
            cmd_sources(&cfg, &sc, common)
        }
        Command::Simulate(_) => {
            let sc = cfg.simulate.as_ref().ok_or(ConfigError::MissingSection("simulate"))?;
            cmd_simulate(sc, common)
        }
        Command::Sweep(_) => {
            let sc = cfg.sweep.as_ref().ok_or(ConfigError::MissingSection("sweep"))?;
            cmd_sweep(sc, common)
        }
        Command::Tomo(_) => {
            let tc = cfg.tomo.as_ref().ok_or(ConfigError::MissingSection("tomo"))?;
            cmd_tomo(&cfg, tc, common)
        }
        Command::Certify(_) => {
            let cc = cfg.certify.as_ref().ok_or(ConfigError::MissingSection("certify"))?;
            cmd_certify(&cfg, cc, common)
        }
        Command::CorrectCounts(_) => {
            let cc = cfg.correct_counts.as_ref().ok_or(ConfigError::MissingSection("correct_counts"))?;
            cmd_correct_counts(&cfg, cc)
        }
    }
}

/// Entry point of the binary: parses arguments, runs, maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn json_text<T: Serialize>(v: &T) -> Result<String> {
    Ok(io::write_json(v)?)
}

fn csv_text<T: Serialize>(rows: &[T]) -> Result<String> {
    Ok(io::write_rows(rows)?)
}

// ================================================================ sources

fn cmd_sources(cfg: &RunConfig, sc: &SourcesConfig, common: &CommonArgs) -> Result<Outputs> {
    sc.validate()?;
    if sc.powers_mw.len() < 4 {
        return Err(ConfigError::Invalid("powers_mw needs at least 4 points for the rate fits".into()).into());
    }
    let rings = sc.rings(cfg)?;
    let reports = rings
        .par_iter()
        .map(|r| ring_report(r, sc))
        .collect::<Result<Vec<RingReport>>>()?;

    let mut out = Outputs::default();
    out.add("rings.csv", csv_text(&reports.iter().map(|r| r.row.clone()).collect::<Vec<_>>())?);
    out.add("spectrum.csv", csv_text(&reports.iter().flat_map(|r| r.spectrum.clone()).collect::<Vec<_>>())?);
    out.add("jsd.csv", csv_text(&reports.iter().flat_map(|r| r.jsd.clone()).collect::<Vec<_>>())?);
    out.add("purity.json", json_text(&reports.iter().map(|r| &r.purity).collect::<Vec<_>>())?);
    out.add("rates.csv", csv_text(&reports.iter().flat_map(|r| r.rates.clone()).collect::<Vec<_>>())?);
    out.add("fits.json", json_text(&reports.iter().map(|r| &r.fits).collect::<Vec<_>>())?);
    if common.svg {
        let mut spec = Plot::new("Ring transmission", "wavelength (nm)", "|T|^2");
        let mut car = Plot::new("Coincidence-to-accidental ratio", "pump power (mW)", "CAR");
        let mut g2 = Plot::new("Heralded g2(0)", "pump power (mW)", "g2");
        for r in &reports {
            spec = spec.with(Series::line(&r.row.ring, r.spectrum.iter().map(|s| (s.wavelength_nm, s.transmission)).collect()));
            car = car.with(Series::line(&r.row.ring, r.rates.iter().map(|s| (s.power_mw, s.car)).collect()));
            g2 = g2.with(Series::line(&r.row.ring, r.rates.iter().map(|s| (s.power_mw, s.g2)).collect()));
        }
        out.add("spectrum.svg", spec.render());
        out.add("car.svg", car.render());
        out.add("g2.svg", g2.render());
        for r in &reports {
            out.add(format!("jsd_{}.svg", r.row.ring), r.jsd_svg.clone());
        }
    }
    Ok(out)
}

struct RingReport {
    row: RingRow,
    spectrum: Vec<SpectrumRow>,
    jsd: Vec<JsdRow>,
    jsd_svg: String,
    purity: serde_json::Value,
    rates: Vec<RateRow>,
    fits: serde_json::Value,
}

fn ring_report(r: &RingRecord, sc: &SourcesConfig) -> Result<RingReport> {
    let p = &r.params;
    let fwhm_nm = fwhm_analytic_nm(p);
    let row = RingRow {
        ring: r.name.clone(),
        tau: p.tau,
        alpha: p.alpha,
        fsr_ghz: fsr_ghz(p),
        fwhm_pm: fwhm_nm * 1e3,
        fwhm_fit_pm: fit_ring_fwhm_nm(p, sc.fit_points)? * 1e3,
        linewidth_ghz: linewidth_ghz(p),
        q_factor: q_factor(p.lambda_res_nm, fwhm_nm)?,
        heralding_efficiency: heralding_eff_corrected(p)?,
    };

    let half = sc.spectrum_span_pm * 1e-3;
    let spectrum: Vec<SpectrumRow> = (0..sc.spectrum_points)
        .map(|k| {
            let lam = p.lambda_res_nm - half + 2.0 * half * k as f64 / (sc.spectrum_points - 1) as f64;
            SpectrumRow {
                ring: r.name.clone(),
                wavelength_nm: lam,
                transmission: ring_transmission(p, lam).norm_sqr(),
            }
        })
        .collect();
    let scan: Vec<(f64, f64)> = spectrum.iter().map(|s| ((s.wavelength_nm - p.lambda_res_nm) * 1e3, s.transmission)).collect();
    let lorentz = lorentzian_fit(&scan)?;

    let grid = build_jsd(p, p, &sc.pump, &sc.grid)?;
    let purity = jsd_purity(&grid);
    let schmidt = schmidt_decompose(&grid)?;
    let refinement = grid_refinement(p, p, &sc.pump, &sc.grid)?;
    let stride = sc.jsd_stride;
    let mut jsd = Vec::new();
    let mut intensity = Vec::new();
    for (a, &vs) in grid.signal_axis.iter().enumerate().step_by(stride) {
        let mut line = Vec::new();
        for (b, &vi) in grid.idler_axis.iter().enumerate().step_by(stride) {
            let v = grid.amplitudes[(a, b)].norm_sqr();
            line.push(v);
            jsd.push(JsdRow {
                ring: r.name.clone(),
                signal_ghz: vs,
                idler_ghz: vi,
                intensity: v,
            });
        }
        intensity.push(line);
    }
    let axis = |v: &[f64]| v.iter().step_by(stride).copied().collect::<Vec<_>>();
    let jsd_svg = heatmap(
        &format!("{} joint spectral intensity", r.name),
        &axis(&grid.idler_axis),
        &axis(&grid.signal_axis),
        &intensity,
    );
    let purity_json = json!({
        "ring": r.name,
        "grid_points": sc.grid.points,
        "purity": purity,
        "purity_schmidt": schmidt.purity(),
        "schmidt_number": schmidt.schmidt_number(),
        "purity_refined": refinement.purity_refined,
        "refinement_shift": refinement.shift,
    });

    let spectrum_mixed = SchmidtSpectrum::from_unnormalized(schmidt.coefficients().iter().take(8).copied().collect())?;
    let rep = sc.pump.rep_rate_hz;
    let mut rates = Vec::new();
    let mut points = Vec::new();
    for &pw in &sc.powers_mw {
        let nbar = mean_photon_number(r.gamma_eff, pw, rep, sc.coupling_loss_db, PowerConvention::Input)?;
        let nbar_chip = mean_photon_number(r.gamma_eff, pw, rep, sc.coupling_loss_db, PowerConvention::OnChip)?;
        let x = nbar / (1.0 + nbar);
        let single = |eta: f64| rep * (1.0 - (1.0 - x) / (1.0 - x * (1.0 - eta)));
        let (cs, ci) = (single(r.eta_signal), single(r.eta_idler));
        let cc = rep * cc_multipair(x, r.eta_idler, r.eta_signal)?;
        let acc = cs * ci / rep;
        let eff = crate::protocols::Efficiencies {
            signal: r.eta_signal,
            idler: r.eta_idler,
        };
        let g2 = if nbar < 0.2 { heralded_g2(nbar, &spectrum_mixed, eff)? } else { f64::NAN };
        rates.push(RateRow {
            ring: r.name.clone(),
            power_mw: pw,
            nbar,
            nbar_on_chip: nbar_chip,
            singles_signal: cs,
            singles_idler: ci,
            coincidences: cc,
            accidentals: acc,
            car: crate::source::car(cc, acc)?,
            klyshko: crate::source::klyshko(cc, ci)?,
            g2,
        });
        points.push(RatePoint {
            power_mw: pw,
            singles_signal: cs,
            singles_idler: ci,
            coincidences: cc,
            accidentals: acc,
        });
    }
    let coeffs = fit_rates(&points)?;
    let recovered = extract_source_parameters(coeffs.a_s(), coeffs.a_i(), coeffs.a_si())?;
    let g2_points: Vec<(f64, f64)> = rates.iter().filter(|r| r.g2.is_finite()).map(|r| (r.power_mw, r.g2)).collect();
    let g2 = if g2_points.len() > 1 { Some(g2_fit(&g2_points, &[2])?) } else { None };
    let k = NonlinearConstants::default();
    let fits = json!({
        "ring": r.name,
        "rate_coefficients": coeffs,
        "recovered": recovered,
        "tabulated": { "gamma_eff": r.gamma_eff, "eta_signal": r.eta_signal, "eta_idler": r.eta_idler },
        "g2_fit": g2,
        "lorentzian_pm": lorentz,
        "eta_tpa": eta_tpa(&sc.pump, p, &k),
        "eta_fca": eta_fca(&sc.pump, p, &k),
        "nbar_input": mean_photon_number(r.gamma_eff, sc.pump.avg_power_mw, rep, sc.coupling_loss_db, PowerConvention::Input)?,
        "nbar_on_chip": mean_photon_number(r.gamma_eff, sc.pump.avg_power_mw, rep, sc.coupling_loss_db, PowerConvention::OnChip)?,
    });
    Ok(RingReport {
        row,
        spectrum,
        jsd,
        jsd_svg,
        purity: purity_json,
        rates,
        fits,
    })
}

// ================================================================ simulate

/// Counts-file text for tallies: sampled counts when present, else the exact
/// probabilities in the count column.
fn tallies_csv(tallies: &[CoincidenceTally]) -> Result<String> {
    let recs: Vec<MeasurementRecord> = tallies
        .iter()
        .map(|t| MeasurementRecord {
            settings: t.settings.clone(),
            counts: match &t.counts {
                Some(c) => c.iter().map(|(k, &v)| (k.clone(), v as f64)).collect(),
                None => t.probabilities.clone(),
            },
        })
        .collect();
    let probs: Vec<BTreeMap<String, f64>> = tallies.iter().map(|t| t.probabilities.clone()).collect();
    Ok(io::write_counts(&recs, Some(&probs))?)
}

fn summary(state: &str, quantity: &str, value: f64, method: &str, settings: usize, success: f64) -> SummaryRow {
    SummaryRow {
        state: state.into(),
        quantity: quantity.into(),
        value,
        method: method.into(),
        settings,
        success_probability: success,
    }
}

fn file_safe(name: &str) -> String {
    name.replace('+', "plus").replace('-', "minus")
}

fn cmd_simulate(sc: &SimulateConfig, common: &CommonArgs) -> Result<Outputs> {
    sc.validate()?;
    let noise = sc.noise.knobs()?;
    let seed = common.seed;
    let mut out = Outputs::default();
    let mut rows = Vec::new();
    match sc.experiment {
        Experiment::Bell => {
            let pump = [C64::new(1.0, 0.0), C64::from_polar(1.0, sc.bell_phase), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
            let spec = ExperimentSpec {
                name: "bell".into(),
                pump,
                operator: OperatorSetting::Off,
                prep: [None; 4],
                herald: Herald::default(),
                measured: vec![1, 2],
                noise: noise.clone(),
                shots: sc.shots,
                seed,
            };
            let tallies = Prepared::new(&spec)?.tallies(&pauli_settings(2))?;
            let (rho, method) = reconstruct(&tallies, 2)?;
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let target = nalgebra::DVector::from_vec(vec![
                C64::new(h, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::from_polar(h, sc.bell_phase),
            ]);
            let success = tallies[0].success_probability();
            rows.push(summary("bell", "fidelity", rho.fidelity(&target)?, method.name(), tallies.len(), success));
            out.add("counts_bell.csv", tallies_csv(&tallies)?);
            out.add("rho_bell.json", io::write_density(&rho)?);
        }
        Experiment::HomBell | Experiment::HomFusion => {
            let kind = if sc.experiment == Experiment::HomBell {
                FringeKind::BellTheta
            } else {
                FringeKind::FusionPhi
            };
            let xs: Vec<f64> = (0..sc.fringe_points).map(|k| TAU * k as f64 / sc.fringe_points as f64).collect();
            let fr = hom_fringe(kind, &xs, &noise)?;
            let label = if kind == FringeKind::BellTheta { "hom_bell" } else { "hom_fusion" };
            let fringe: Vec<FringeRow> = fr.samples.iter().map(|&(x, value)| FringeRow { x, value }).collect();
            rows.push(summary(label, "visibility", fr.visibility, "fringe", fringe.len(), f64::NAN));
            if common.svg {
                let plot = Plot::new(label, if kind == FringeKind::BellTheta { "theta (rad)" } else { "phi (rad)" }, "coincidence probability")
                    .with(Series::scatter("simulated", fr.samples.clone()));
                out.add(format!("fringe_{label}.svg"), plot.render());
            }
            out.add(format!("fringe_{label}.csv"), csv_text(&fringe)?);
        }
        Experiment::Teleport => {
            let states: Vec<(String, ProjectorSetting)> = match &sc.states {
                Some(s) => s.iter().map(|n| (n.name.clone(), n.setting())).collect(),
                None => paper_teleport_states().iter().map(|(n, s)| (n.to_string(), *s)).collect(),
            };
            let jobs: Vec<(BellProjection, usize)> =
                sc.projection.projections().into_iter().flat_map(|p| (0..states.len()).map(move |i| (p, i))).collect();
            let results = jobs
                .par_iter()
                .enumerate()
                .map(|(k, &(proj, i))| Ok(run_teleportation(states[i].1, proj, &noise, sc.shots, derive_seed(seed, k as u64))?))
                .collect::<Result<Vec<_>>>()?;
            let mut per_proj: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for (&(proj, i), r) in jobs.iter().zip(&results) {
                let pname = projection_name(proj);
                let label = format!("teleport_{pname}_{}", file_safe(&states[i].0));
                rows.push(summary(
                    &format!("{pname}:{}", states[i].0),
                    "fidelity",
                    r.fidelity,
                    r.method.name(),
                    r.tallies.len(),
                    r.success_probability,
                ));
                per_proj.entry(pname).or_default().push(r.fidelity);
                out.add(format!("counts_{label}.csv"), tallies_csv(&r.tallies)?);
                out.add(format!("rho_{label}.json"), io::write_density(&r.rho)?);
            }
            for (pname, f) in per_proj {
                let mean = f.iter().sum::<f64>() / f.len() as f64;
                rows.push(summary(&format!("{pname}:mean"), "fidelity", mean, "average", 3, f64::NAN));
            }
        }
        Experiment::Swap => {
            for (k, mode) in sc.swap_mode.modes().into_iter().enumerate() {
                let r = run_swapping(mode, &noise, sc.shots, derive_seed(seed, k as u64))?;
                let label = match mode {
                    SwapMode::Bell => "swap_bell",
                    SwapMode::Fusion => "swap_fusion",
                };
                rows.push(summary(label, "fidelity", r.fidelity, r.method.name(), r.tallies.len(), r.success_probability));
                out.add(format!("counts_{label}.csv"), tallies_csv(&r.tallies)?);
                out.add(format!("rho_{label}.json"), io::write_density(&r.rho)?);
            }
        }
        Experiment::Ghz2 | Experiment::Ghz3 | Experiment::Ghz4 => {
            let n = match sc.experiment {
                Experiment::Ghz2 => 2,
                Experiment::Ghz3 => 3,
                _ => 4,
            };
            let r = run_ghz(n, &noise, sc.shots, seed)?;
            let label = format!("ghz{n}");
            let s = r.success_probability;
            let settings = r.tallies.len();
            rows.push(summary(&label, "success_probability", s, "post_selection", settings, s));
            rows.push(summary(&label, "fidelity", r.fidelity, if n == 2 { "tomography" } else { "witness" }, settings, s));
            rows.push(summary(&label, "witness_fidelity", r.witness.fidelity, "witness", settings, s));
            rows.push(summary(&label, "witness", r.witness.witness, "witness", settings, s));
            if let Some((c, f)) = r.two_basis {
                rows.push(summary(&label, "gme_concurrence_bound", c, "two_basis", 2, s));
                rows.push(summary(&label, "fidelity_lower_bound", f, "two_basis", 2, s));
            }
            out.add(format!("counts_{label}.csv"), tallies_csv(&r.tallies)?);
        }
    }
    out.files.insert(0, ("summary.csv".into(), csv_text(&rows)?));
    Ok(out)
}

fn projection_name(p: BellProjection) -> &'static str {
    match p {
        BellProjection::PsiPlus => "psi_plus",
        BellProjection::PsiMinus => "psi_minus",
    }
}

// ================================================================ sweep

fn binomial_stderr(p: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (p * (1.0 - p) / n as f64).max(0.0).sqrt()
    }
}

fn cmd_sweep(sc: &SweepConfig, common: &CommonArgs) -> Result<Outputs> {
    sc.validate()?;
    let noise = sc.noise.knobs()?;
    let xs = sc.abscissae();
    let seed = common.seed;
    let mut rows: Vec<SweepRow> = match sc.variable {
        SweepVariable::Omega => {
            let mut spec = ghz_spec(sc.n, &noise)?;
            spec.shots = 0;
            let prepared = Prepared::new(&spec)?;
            xs.par_iter()
                .enumerate()
                .map(|(i, &x)| {
                    let t = prepared.tally(&vec![ProjectorSetting::omega(x); sc.n])?;
                    parity_point(x, &t.probabilities, sc.shots, seed, i as u64)
                })
                .collect::<Result<_>>()?
        }
        SweepVariable::Nbar => {
            let opts = HomOptions {
                efficiency: noise.efficiency,
            };
            xs.par_iter()
                .map(|&x| {
                    let v = heralded_hom_visibility(x, &noise.schmidt[0], &opts)?;
                    Ok(SweepRow { x, value: v.raw, stderr: 0.0 })
                })
                .collect::<Result<_>>()?
        }
        SweepVariable::Theta | SweepVariable::Phi => {
            let kind = if sc.variable == SweepVariable::Theta {
                FringeKind::BellTheta
            } else {
                FringeKind::FusionPhi
            };
            xs.par_iter()
                .enumerate()
                .map(|(i, &x)| {
                    let t = Prepared::new(&fringe_spec(kind, x, &noise))?.tally(&[ProjectorSetting::sigma_x(); 2])?;
                    let p = match kind {
                        FringeKind::BellTheta => t.success_probability(),
                        FringeKind::FusionPhi => t.probabilities["00"],
                    };
                    if sc.shots == 0 {
                        return Ok(SweepRow { x, value: p, stderr: 0.0 });
                    }
                    let draw = sample_shots(&BTreeMap::from([("hit".to_string(), p.clamp(0.0, 1.0))]), sc.shots, seed, i as u64);
                    let v = draw["hit"] as f64 / sc.shots as f64;
                    Ok(SweepRow {
                        x,
                        value: v,
                        stderr: binomial_stderr(v, sc.shots),
                    })
                })
                .collect::<Result<_>>()?
        }
        SweepVariable::Power => {
            let ring = RingRecord::find(&sc.ring).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            let rep = crate::source::PumpPulse::paper().rep_rate_hz;
            xs.par_iter()
                .map(|&x| {
                    if !(x > 0.0) {
                        return Err(SourceError::InvalidParameter(format!("power {x} mW must be positive")).into());
                    }
                    let nbar = mean_photon_number(ring.gamma_eff, x, rep, sc.coupling_loss_db, PowerConvention::Input)?;
                    let q = nbar / (1.0 + nbar);
                    let single = |eta: f64| 1.0 - (1.0 - q) / (1.0 - q * (1.0 - eta));
                    let cc = cc_multipair(q, ring.eta_idler, ring.eta_signal)?;
                    let acc = single(ring.eta_signal) * single(ring.eta_idler);
                    Ok(SweepRow {
                        x,
                        value: crate::source::car(cc, acc)?,
                        stderr: 0.0,
                    })
                })
                .collect::<Result<_>>()?
        }
    };
    rows.sort_by(|a, b| a.x.total_cmp(&b.x));
    let mut out = Outputs::default();
    out.add("sweep.csv", csv_text(&rows)?);
    if common.svg {
        let name = format!("{:?}", sc.variable).to_lowercase();
        let plot = Plot::new(&format!("{name} sweep"), &name, "value").with(Series::line("value", rows.iter().map(|r| (r.x, r.value)).collect()));
        out.add("sweep.svg", plot.render());
    }
    Ok(out)
}

/// Parity `Σ (−1)^{|b|} p_b / Σ p_b`, sampled from `shots` trials when requested.
fn parity_point(x: f64, probs: &BTreeMap<String, f64>, shots: u64, seed: u64, stream: u64) -> Result<SweepRow> {
    let total: f64 = probs.values().sum();
    if total <= 0.0 {
        return Err(ProtocolError::ZeroSuccess.into());
    }
    if shots == 0 {
        let v = probs.iter().map(|(b, p)| parity_sign(b) * p).sum::<f64>() / total;
        return Ok(SweepRow { x, value: v, stderr: 0.0 });
    }
    let counts = sample_shots(probs, shots, seed, stream);
    let n: u64 = counts.values().sum();
    if n == 0 {
        return Err(ProtocolError::ZeroSuccess.into());
    }
    let v = counts.iter().map(|(b, &c)| parity_sign(b) * c as f64).sum::<f64>() / n as f64;
    Ok(SweepRow {
        x,
        value: v,
        stderr: ((1.0 - v * v).max(0.0) / n as f64).sqrt(),
    })
}

// ================================================================ estimation

fn load_counts(cfg: &RunConfig, path: &Path, ratios: Option<&crate::estimation::EfficiencyRatios>) -> Result<Vec<MeasurementRecord>> {
    let mut recs = io::read_counts(&cfg.read_input(path)?)?;
    for r in &recs {
        r.validate()?;
    }
    if let Some(ratios) = ratios {
        recs = recs.iter().map(|r| reweight_counts(r, ratios)).collect::<EstimationResult<_>>()?;
    }
    Ok(recs)
}

fn target_vector(t: TargetState, n: usize) -> EstimationResult<nalgebra::DVector<C64>> {
    let bell = |b| {
        if n == 2 {
            Ok(bell_state(b))
        } else {
            Err(EstimationError::Dimension(format!("Bell target on {n} qubits")))
        }
    };
    match t {
        TargetState::PhiPlus => bell(BellState::PhiPlus),
        TargetState::PhiMinus => bell(BellState::PhiMinus),
        TargetState::PsiPlus => bell(BellState::PsiPlus),
        TargetState::PsiMinus => bell(BellState::PsiMinus),
        TargetState::Ghz => Ok(ghz_state(n)),
    }
}

fn cmd_tomo(cfg: &RunConfig, tc: &TomoConfig, common: &CommonArgs) -> Result<Outputs> {
    let recs = load_counts(cfg, &tc.counts, tc.ratios.as_ref())?;
    let n = recs[0].qubits();
    let opts = MleOptions {
        max_iterations: tc.max_iterations,
        ..MleOptions::default()
    };
    let report = mle_tomography(&recs, n, opts)?;
    let target = tc.target.map(|t| target_vector(t, n)).transpose()?;
    let fidelity = target.as_ref().map(|v| report.rho.fidelity(v)).transpose()?;
    let stderr = match (&target, tc.trials) {
        (Some(v), t) if t > 0 => Some(poisson_error(
            |rs| mle_tomography(rs, n, opts)?.rho.fidelity(v),
            &recs,
            t,
            common.seed,
        )?),
        _ => None,
    };
    let mut out = Outputs::default();
    if report.rank_deficient {
        out.warnings
            .push("measurement settings are rank deficient: the reconstructed state is one of several maximizers".into());
    }
    out.add("rho.json", io::write_density(&report.rho)?);
    out.add(
        "tomo.json",
        json_text(&json!({
            "qubits": n,
            "settings": recs.len(),
            "corrected": tc.ratios.is_some(),
            "iterations": report.iterations,
            "converged": report.converged,
            "rank_deficient": report.rank_deficient,
            "log_likelihood": report.log_likelihood.last(),
            "fidelity": fidelity,
            "fidelity_stderr": stderr,
            "trials": tc.trials,
            "seed": common.seed,
        }))?,
    );
    Ok(out)
}

/// Indices of the σz⊗n record, the σx⊗n record and the `Ω_{kπ/n}⊗n` records (k = 0…n−1).
fn locate_settings(recs: &[MeasurementRecord], n: usize) -> (Option<usize>, Option<usize>, Option<Vec<usize>>) {
    let find = |theta: f64, phi: f64| recs.iter().position(|r| r.uses_setting(theta, phi));
    let z = find(PI, 0.0);
    let x = find(PI / 2.0, 0.0);
    let omegas: Option<Vec<usize>> = (0..n).map(|k| find(PI / 2.0, k as f64 * PI / n as f64)).collect();
    (z, x, omegas)
}

fn cmd_certify(cfg: &RunConfig, cc: &CertifyConfig, common: &CommonArgs) -> Result<Outputs> {
    let recs = load_counts(cfg, &cc.counts, cc.ratios.as_ref())?;
    let n = recs[0].qubits();
    let (z, x, omegas) = locate_settings(&recs, n);
    let seed = common.seed;
    let mut entries = Vec::new();
    let mut push = |name: &str, stat: &(dyn Fn(&[MeasurementRecord]) -> EstimationResult<f64> + Sync)| -> Result<()> {
        let value = stat(&recs)?;
        let stderr = poisson_error(stat, &recs, cc.trials, seed)?;
        entries.push(CertificationEntry {
            statistic: name.into(),
            value,
            stderr,
            trials: cc.trials,
            seed,
        });
        Ok(())
    };
    let mut any = false;
    if let (Some(zi), Some(om)) = (z, &omegas) {
        any = true;
        let fid = |rs: &[MeasurementRecord]| {
            let o: Vec<MeasurementRecord> = om.iter().map(|&i| rs[i].clone()).collect();
            Ok(ghz_fidelity_witness(&rs[zi], &o)?.fidelity)
        };
        push("witness_fidelity", &fid)?;
        push("witness", &|rs: &[MeasurementRecord]| Ok(witness_value(fid(rs)?)))?;
    }
    if let (Some(zi), Some(xi), true) = (z, x, (3..=4).contains(&n)) {
        any = true;
        push("gme_concurrence_bound", &|rs: &[MeasurementRecord]| gme_concurrence_bound(n, &rs[zi], &rs[xi]))?;
        push("fidelity_lower_bound", &|rs: &[MeasurementRecord]| fidelity_lower_bound_two_basis(n, &rs[zi], &rs[xi]))?;
    }
    if !any {
        return Err(EstimationError::SettingMismatch(format!(
            "counts hold neither σz and Ω witness settings nor σz/σx two-basis settings for {n} qubits"
        ))
        .into());
    }
    let mut out = Outputs::default();
    out.add("certification.json", json_text(&entries)?);
    Ok(out)
}

fn cmd_correct_counts(cfg: &RunConfig, cc: &CorrectCountsConfig) -> Result<Outputs> {
    let recs = load_counts(cfg, &cc.counts, None)?;
    let mut rows = Vec::new();
    for (i, r) in recs.iter().enumerate() {
        for (outcome, corrected) in correct_counts(r, &cc.ratios)? {
            rows.push(CorrectedRow {
                setting_id: i,
                outcome,
                corrected,
            });
        }
    }
    let mut out = Outputs::default();
    out.add("corrected.csv", csv_text(&rows)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_are_distinct() {
        let s: std::collections::BTreeSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(s.len(), 1000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn parity_point_exact_and_sampled() {
        let probs = BTreeMap::from([("00".to_string(), 0.3), ("11".to_string(), 0.1), ("01".to_string(), 0.1)]);
        let r = parity_point(0.0, &probs, 0, 0, 0).unwrap();
        assert!((r.value - 0.6).abs() < 1e-12);
        let s = parity_point(0.0, &probs, 100_000, 7, 0).unwrap();
        assert!((s.value - 0.6).abs() < 5.0 * s.stderr + 1e-3);
    }

    #[test]
    fn file_names() {
        assert_eq!(file_safe("+i"), "plusi");
        assert_eq!(file_safe("-"), "minus");
    }
}
