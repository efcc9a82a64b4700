use std::f64::consts::LN_2;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{linewidth_ghz, require, RingParams, SourceError, SourceResult};
use crate::C64;

/// Largest purity change tolerated when the grid density is doubled.
pub const REFINEMENT_TOLERANCE: f64 = 1e-3;

/// Pulsed pump.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpPulse {
    pub center_wavelength_nm: f64,
    /// Intensity FWHM in picoseconds.
    pub pulse_width_ps: f64,
    pub rep_rate_hz: f64,
    pub avg_power_mw: f64,
}

impl PumpPulse {
    /// 15 ps, 500 MHz, 800 μW at 1549.35 nm.
    pub fn paper() -> Self {
        Self {
            center_wavelength_nm: 1549.35,
            pulse_width_ps: 15.0,
            rep_rate_hz: 500e6,
            avg_power_mw: 0.8,
        }
    }

    pub fn validate(&self) -> SourceResult<()> {
        require(
            self.center_wavelength_nm > 0.0
                && self.pulse_width_ps > 0.0
                && self.rep_rate_hz > 0.0
                && self.avg_power_mw > 0.0,
            || "pump parameters must be positive".into(),
        )
    }

    /// Transform-limited Gaussian intensity bandwidth `0.441/T`, in GHz.
    pub fn spectral_fwhm_ghz(&self) -> f64 {
        441.0 / self.pulse_width_ps
    }

    /// Peak power `P_avg/(R·T)` in watts.
    pub fn peak_power_w(&self) -> f64 {
        self.avg_power_mw * 1e-3 / self.rep_rate_hz / (self.pulse_width_ps * 1e-12)
    }
}

/// Sampling of the joint spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JsdGridSpec {
    pub points: usize,
    /// Half-span of each axis in units of that resonance's linewidth.
    pub span_linewidths: f64,
    /// Filter the pump field by the pump resonance before it drives the pair process.
    pub pump_cavity_filter: bool,
}

impl Default for JsdGridSpec {
    fn default() -> Self {
        Self {
            points: 512,
            span_linewidths: 5.0,
            pump_cavity_filter: true,
        }
    }
}

/// Joint spectral amplitude on a detuning grid (GHz); rows are signal, columns idler.
#[derive(Clone, Debug, PartialEq)]
pub struct JsdGrid {
    pub signal_axis: Vec<f64>,
    pub idler_axis: Vec<f64>,
    pub amplitudes: DMatrix<C64>,
}

impl JsdGrid {
    /// Normalizes so that `Σ|f|²·Δs·Δi = 1`.
    pub fn new(signal_axis: Vec<f64>, idler_axis: Vec<f64>, amplitudes: DMatrix<C64>) -> SourceResult<Self> {
        require(signal_axis.len() >= 2 && idler_axis.len() >= 2, || "axes need two points".into())?;
        require(
            amplitudes.nrows() == signal_axis.len() && amplitudes.ncols() == idler_axis.len(),
            || "amplitude shape does not match axes".into(),
        )?;
        let mut g = Self {
            signal_axis,
            idler_axis,
            amplitudes,
        };
        let n2 = g.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * g.cell_area();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(SourceError::DegenerateGrid);
        }
        g.amplitudes /= C64::new(n2.sqrt(), 0.0);
        Ok(g)
    }

    pub fn signal_step(&self) -> f64 {
        (self.signal_axis[self.signal_axis.len() - 1] - self.signal_axis[0])
            / (self.signal_axis.len() - 1) as f64
    }

    pub fn idler_step(&self) -> f64 {
        (self.idler_axis[self.idler_axis.len() - 1] - self.idler_axis[0])
            / (self.idler_axis.len() - 1) as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.signal_step() * self.idler_step()
    }

    /// Reduced signal operator `K = F·F†·Δi` sampled on the signal grid.
    fn reduced_signal(&self) -> DMatrix<C64> {
        let f = &self.amplitudes;
        let (n, m) = (f.nrows(), f.ncols());
        let rows: Vec<Vec<C64>> = (0..n).map(|a| (0..m).map(|j| f[(a, j)]).collect()).collect();
        let di = self.idler_step();
        let upper: Vec<Vec<C64>> = (0..n)
            .into_par_iter()
            .map(|a| {
                (a..n)
                    .map(|b| {
                        let s: C64 = rows[a].iter().zip(&rows[b]).map(|(x, y)| x * y.conj()).sum();
                        s * di
                    })
                    .collect()
            })
            .collect();
        DMatrix::from_fn(n, n, |a, b| {
            if b >= a {
                upper[a][b - a]
            } else {
                upper[b][a - b].conj()
            }
        })
    }
}

fn linspace(half: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| -half + 2.0 * half * k as f64 / (n - 1) as f64)
        .collect()
}

/// Cavity field response `1/(Γ/2 − iν)`.
fn cavity(nu: f64, gamma: f64) -> C64 {
    C64::new(1.0, 0.0) / C64::new(gamma / 2.0, -nu)
}

/// Two-photon pump envelope `Φ(Ω) = ∫ p(ν) p(Ω − ν) dν` on a table, linearly interpolated.
struct PumpEnvelope {
    start: f64,
    step: f64,
    values: Vec<C64>,
}

impl PumpEnvelope {
    fn new(pump: &PumpPulse, gamma_pump: f64, filter: bool, omega_max: f64, table: usize) -> Self {
        let sigma = pump.spectral_fwhm_ghz();
        let field = |nu: f64| {
            let g = (-2.0 * LN_2 * nu * nu / (sigma * sigma)).exp();
            if filter {
                cavity(nu, gamma_pump) * g
            } else {
                C64::new(g, 0.0)
            }
        };
        let step = 2.0 * omega_max / (table - 1) as f64;
        let values: Vec<C64> = if filter {
            let reach = 4.0 * sigma;
            let h = gamma_pump.min(sigma) / 20.0;
            let nodes = (2.0 * reach / h).ceil() as usize + 1;
            let h = 2.0 * reach / (nodes - 1) as f64;
            (0..table)
                .into_par_iter()
                .map(|t| {
                    let omega = -omega_max + step * t as f64;
                    let mut acc = C64::new(0.0, 0.0);
                    for k in 0..nodes {
                        let nu = -reach + h * k as f64;
                        let w = if k == 0 || k == nodes - 1 { 0.5 } else { 1.0 };
                        acc += field(nu) * field(omega - nu) * w;
                    }
                    acc * h
                })
                .collect()
        } else {
            // Self-convolution of a Gaussian field stays Gaussian.
            (0..table)
                .map(|t| {
                    let omega = -omega_max + step * t as f64;
                    C64::new((-LN_2 * omega * omega / (sigma * sigma)).exp(), 0.0)
                })
                .collect()
        };
        Self {
            start: -omega_max,
            step,
            values,
        }
    }

    fn at(&self, omega: f64) -> C64 {
        let x = (omega - self.start) / self.step;
        let i = (x.floor().max(0.0) as usize).min(self.values.len() - 2);
        let t = x - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }
}

/// `f(ν_s, ν_i) = Φ(ν_s + ν_i)·L_s(ν_s)·L_i(ν_i)` for a signal and an idler resonance.
///
/// The pump resonance linewidth is the mean of the two.
pub fn build_jsd(
    signal_ring: &RingParams,
    idler_ring: &RingParams,
    pump: &PumpPulse,
    spec: &JsdGridSpec,
) -> SourceResult<JsdGrid> {
    signal_ring.validate()?;
    idler_ring.validate()?;
    pump.validate()?;
    require(spec.points >= 16, || format!("{} grid points, need at least 16", spec.points))?;
    require(spec.span_linewidths >= 5.0, || {
        format!("grid spans ±{} linewidths, need at least ±5", spec.span_linewidths)
    })?;
    let (gs, gi) = (linewidth_ghz(signal_ring), linewidth_ghz(idler_ring));
    let gp = 0.5 * (gs + gi);
    let s_axis = linspace(spec.span_linewidths * gs, spec.points);
    let i_axis = linspace(spec.span_linewidths * gi, spec.points);
    let omega_max = spec.span_linewidths * (gs + gi);
    let env = PumpEnvelope::new(pump, gp, spec.pump_cavity_filter, omega_max, 8 * spec.points + 1);
    let ls: Vec<C64> = s_axis.iter().map(|&v| cavity(v, gs)).collect();
    let li: Vec<C64> = i_axis.iter().map(|&v| cavity(v, gi)).collect();
    let amps = DMatrix::from_fn(spec.points, spec.points, |a, b| {
        env.at(s_axis[a] + i_axis[b]) * ls[a] * li[b]
    });
    JsdGrid::new(s_axis, i_axis, amps)
}

/// Normalized Schmidt coefficients, descending, `Σλ² = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SchmidtSpectrum {
    coefficients: Vec<f64>,
}

impl TryFrom<Vec<f64>> for SchmidtSpectrum {
    type Error = SourceError;
    fn try_from(v: Vec<f64>) -> SourceResult<Self> {
        Self::new(v)
    }
}

impl From<SchmidtSpectrum> for Vec<f64> {
    fn from(s: SchmidtSpectrum) -> Self {
        s.coefficients
    }
}

impl SchmidtSpectrum {
    pub fn new(coefficients: Vec<f64>) -> SourceResult<Self> {
        require(!coefficients.is_empty(), || "empty Schmidt spectrum".into())?;
        require(coefficients.iter().all(|&l| l >= 0.0 && l.is_finite()), || {
            "Schmidt coefficients must be non-negative".into()
        })?;
        require(coefficients.windows(2).all(|w| w[0] >= w[1]), || {
            "Schmidt coefficients must be descending".into()
        })?;
        let s2: f64 = coefficients.iter().map(|l| l * l).sum();
        require((s2 - 1.0).abs() <= 1e-9, || format!("Σλ² = {s2}, expected 1"))?;
        Ok(Self { coefficients })
    }

    /// Sorts and renormalizes arbitrary non-negative weights.
    pub fn from_unnormalized(mut coefficients: Vec<f64>) -> SourceResult<Self> {
        coefficients.sort_by(|a, b| b.total_cmp(a));
        let s2: f64 = coefficients.iter().map(|l| l * l).sum();
        if !(s2 > 0.0) {
            return Err(SourceError::DegenerateGrid);
        }
        Self::new(coefficients.iter().map(|l| l / s2.sqrt()).collect())
    }

    /// A single spectral mode.
    pub fn pure() -> Self {
        Self {
            coefficients: vec![1.0],
        }
    }

    /// `d` equally weighted modes.
    pub fn uniform(d: usize) -> SourceResult<Self> {
        require(d >= 1, || "need at least one mode".into())?;
        Ok(Self {
            coefficients: vec![1.0 / (d as f64).sqrt(); d],
        })
    }

    /// Two modes with the given purity `P ∈ [1/2, 1]`: `λ₁² = (1 + √(2P − 1))/2`.
    pub fn two_mode_with_purity(p: f64) -> SourceResult<Self> {
        require((0.5..=1.0).contains(&p), || format!("purity {p} not in [0.5, 1]"))?;
        let l1 = 0.5 * (1.0 + (2.0 * p - 1.0).sqrt());
        if l1 >= 1.0 {
            return Ok(Self::pure());
        }
        Self::new(vec![l1.sqrt(), (1.0 - l1).sqrt()])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// `Σλ⁴`.
    pub fn purity(&self) -> f64 {
        self.coefficients.iter().map(|l| l.powi(4)).sum()
    }

    /// `1/P`.
    pub fn schmidt_number(&self) -> f64 {
        1.0 / self.purity()
    }

    /// Keeps the `k` largest coefficients, renormalized.
    pub fn truncated(&self, k: usize) -> SourceResult<Self> {
        Self::from_unnormalized(self.coefficients.iter().take(k.max(1)).copied().collect())
    }
}

/// Schmidt decomposition of a joint spectrum via the eigenvalues of its reduced signal operator.
pub fn schmidt_decompose(j: &JsdGrid) -> SourceResult<SchmidtSpectrum> {
    let k = j.reduced_signal() * C64::new(j.signal_step(), 0.0);
    let eig = SymmetricEigen::new(k);
    let mut mu: Vec<f64> = eig.eigenvalues.iter().map(|&x| x.max(0.0)).collect();
    mu.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = mu.iter().sum();
    if !(total > 0.0) {
        return Err(SourceError::DegenerateGrid);
    }
    let lambdas: Vec<f64> = mu
        .iter()
        .take_while(|&&x| x > total * 1e-16)
        .map(|x| (x / total).sqrt())
        .collect();
    SchmidtSpectrum::from_unnormalized(lambdas)
}

/// Purity `Tr(K²)/Tr(K)²` of the reduced signal operator, without diagonalization.
pub fn jsd_purity(j: &JsdGrid) -> f64 {
    let k = j.reduced_signal();
    let tr: f64 = (0..k.nrows()).map(|a| k[(a, a)].re).sum();
    let tr2: f64 = k.iter().map(|z| z.norm_sqr()).sum();
    tr2 / (tr * tr)
}

/// Purity at the requested grid and at doubled density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub purity: f64,
    pub purity_refined: f64,
    pub shift: f64,
}

/// Rebuilds the joint spectrum with twice the points and compares purities.
///
/// Fails with [`SourceError::GridTooCoarse`] when the shift exceeds [`REFINEMENT_TOLERANCE`].
pub fn grid_refinement(
    signal_ring: &RingParams,
    idler_ring: &RingParams,
    pump: &PumpPulse,
    spec: &JsdGridSpec,
) -> SourceResult<RefinementReport> {
    let coarse = jsd_purity(&build_jsd(signal_ring, idler_ring, pump, spec)?);
    let fine_spec = JsdGridSpec {
        points: 2 * spec.points,
        ..*spec
    };
    let fine = jsd_purity(&build_jsd(signal_ring, idler_ring, pump, &fine_spec)?);
    let shift = (fine - coarse).abs();
    if shift > REFINEMENT_TOLERANCE {
        return Err(SourceError::GridTooCoarse { shift });
    }
    Ok(RefinementReport {
        purity: coarse,
        purity_refined: fine,
        shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::paper_rings;

    fn ring() -> RingParams {
        paper_rings()[0].params
    }

    fn small() -> JsdGridSpec {
        JsdGridSpec {
            points: 96,
            ..JsdGridSpec::default()
        }
    }

    #[test]
    fn product_grid_is_pure() {
        let s = linspace(1.0, 20);
        let amps = DMatrix::from_fn(20, 20, |a, b| C64::new((-s[a] * s[a]).exp() * (1.0 + s[b] * s[b]).recip(), 0.0));
        let g = JsdGrid::new(s.clone(), s, amps).unwrap();
        assert!((jsd_purity(&g) - 1.0).abs() < 1e-12);
        let sp = schmidt_decompose(&g).unwrap();
        assert!((sp.purity() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn grid_is_normalized() {
        let g = build_jsd(&ring(), &ring(), &PumpPulse::paper(), &small()).unwrap();
        let n2: f64 = g.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * g.cell_area();
        assert!((n2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_and_eigen_routes_agree() {
        let g = build_jsd(&ring(), &ring(), &PumpPulse::paper(), &small()).unwrap();
        let a = jsd_purity(&g);
        let b = schmidt_decompose(&g).unwrap().purity();
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn long_pulse_anticorrelates_and_short_unfiltered_pulse_separates() {
        let long = PumpPulse {
            pulse_width_ps: 2000.0,
            ..PumpPulse::paper()
        };
        let g = build_jsd(&ring(), &ring(), &long, &small()).unwrap();
        assert!(jsd_purity(&g) < 0.5);
        let short = PumpPulse {
            pulse_width_ps: 0.2,
            ..PumpPulse::paper()
        };
        let spec = JsdGridSpec {
            pump_cavity_filter: false,
            ..small()
        };
        let g = build_jsd(&ring(), &ring(), &short, &spec).unwrap();
        assert!(jsd_purity(&g) > 0.99);
    }

    #[test]
    fn narrow_grid_rejected() {
        let spec = JsdGridSpec {
            span_linewidths: 3.0,
            ..small()
        };
        assert!(build_jsd(&ring(), &ring(), &PumpPulse::paper(), &spec).is_err());
    }

    #[test]
    fn spectrum_constructors() {
        assert_eq!(SchmidtSpectrum::pure().purity(), 1.0);
        let two = SchmidtSpectrum::uniform(2).unwrap();
        assert!((two.purity() - 0.5).abs() < 1e-15 && (two.schmidt_number() - 2.0).abs() < 1e-12);
        let p = SchmidtSpectrum::two_mode_with_purity(0.92).unwrap();
        assert!((p.purity() - 0.92).abs() < 1e-12);
        assert!(SchmidtSpectrum::new(vec![0.5, 0.5]).is_err());
        assert!(SchmidtSpectrum::new(vec![0.6, 0.8]).is_err());
    }
}
