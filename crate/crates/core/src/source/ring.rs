use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{lorentzian_fit, require, SourceError, SourceResult};
use crate::C64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// All-pass microring parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingParams {
    /// Self-coupling coefficient.
    pub tau: f64,
    /// Round-trip amplitude transmission.
    pub alpha: f64,
    pub radius_um: f64,
    pub group_index: f64,
    pub lambda_res_nm: f64,
}

impl RingParams {
    pub fn validate(&self) -> SourceResult<()> {
        require(self.tau > 0.0 && self.tau <= 1.0, || format!("tau {} not in (0, 1]", self.tau))?;
        require(self.alpha > 0.0 && self.alpha <= 1.0, || {
            format!("alpha {} not in (0, 1]", self.alpha)
        })?;
        require(self.tau * self.alpha < 1.0, || "tau·alpha must be below 1".into())?;
        require(self.radius_um > 0.0, || format!("radius {} not positive", self.radius_um))?;
        require(self.group_index > 0.0, || {
            format!("group index {} not positive", self.group_index)
        })?;
        require(self.lambda_res_nm > 0.0, || {
            format!("resonance {} not positive", self.lambda_res_nm)
        })
    }

    pub fn circumference_m(&self) -> f64 {
        2.0 * PI * self.radius_um * 1e-6
    }

    /// `(1 − τ²)/(1 − ατ)²`, the on-resonance intensity build-up.
    pub fn field_enhancement_sq(&self) -> f64 {
        (1.0 - self.tau * self.tau) / (1.0 - self.alpha * self.tau).powi(2)
    }
}

/// Free spectral range `c/(n_g·2πR)` in GHz.
pub fn fsr_ghz(p: &RingParams) -> f64 {
    SPEED_OF_LIGHT / (p.group_index * p.circumference_m()) / 1e9
}

/// Free spectral range in wavelength, `λ²/(n_g·2πR)`, in nm.
pub fn fsr_wavelength_nm(p: &RingParams) -> f64 {
    let lam = p.lambda_res_nm * 1e-9;
    lam * lam / (p.group_index * p.circumference_m()) * 1e9
}

/// Unbalanced-MZI free spectral range `c/(n_g·ΔL)` in GHz.
pub fn amzi_fsr_ghz(delta_l_um: f64, group_index: f64) -> SourceResult<f64> {
    require(delta_l_um > 0.0 && group_index > 0.0, || {
        "path difference and group index must be positive".into()
    })?;
    Ok(SPEED_OF_LIGHT / (group_index * delta_l_um * 1e-6) / 1e9)
}

/// Group index `c/(FSR·2πR)` from a measured FSR in GHz.
pub fn group_index(fsr_ghz: f64, radius_um: f64) -> SourceResult<f64> {
    require(fsr_ghz > 0.0 && radius_um > 0.0, || "FSR and radius must be positive".into())?;
    Ok(SPEED_OF_LIGHT / (fsr_ghz * 1e9 * 2.0 * PI * radius_um * 1e-6))
}

/// Through-port field transmission `(τ − α e^{iθ})/(1 − ατ e^{iθ})`.
///
/// The round-trip phase is linearized around resonance:
/// `θ = 2π(λ_res − λ)/FSR_λ`.
pub fn ring_transmission(p: &RingParams, lambda_nm: f64) -> C64 {
    let theta = 2.0 * PI * (p.lambda_res_nm - lambda_nm) / fsr_wavelength_nm(p);
    let e = C64::from_polar(1.0, theta);
    (C64::new(p.tau, 0.0) - p.alpha * e) / (C64::new(1.0, 0.0) - p.alpha * p.tau * e)
}

/// Closed-form full width at half depth, `FSR_λ(1 − ατ)/(π√(ατ))`, in nm.
pub fn fwhm_analytic_nm(p: &RingParams) -> f64 {
    let at = p.alpha * p.tau;
    fsr_wavelength_nm(p) * (1.0 - at) / (PI * at.sqrt())
}

/// Full width at half depth of `|T|²`, found by bisection, in nm.
pub fn fwhm_numeric_nm(p: &RingParams) -> SourceResult<f64> {
    p.validate()?;
    let fsr = fsr_wavelength_nm(p);
    let t2 = |d: f64| ring_transmission(p, p.lambda_res_nm + d).norm_sqr();
    let (lo_val, hi_val) = (t2(0.0), t2(fsr / 2.0));
    let half = 0.5 * (lo_val + hi_val);
    let (mut lo, mut hi) = (0.0, fsr / 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t2(mid) < half {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + hi)
}

/// FWHM from a Lorentzian fit to `|T|²` sampled over ±5 analytic linewidths.
pub fn fit_ring_fwhm_nm(p: &RingParams, points: usize) -> SourceResult<f64> {
    p.validate()?;
    require(points >= 5, || "need at least five spectral points".into())?;
    let w = fwhm_analytic_nm(p);
    let scan: Vec<(f64, f64)> = (0..points)
        .map(|k| {
            let d = -5.0 * w + 10.0 * w * k as f64 / (points - 1) as f64;
            (d, ring_transmission(p, p.lambda_res_nm + d).norm_sqr())
        })
        .collect();
    Ok(lorentzian_fit(&scan)?.width)
}

/// Resonance linewidth in GHz, `c·Δλ/λ²`.
pub fn linewidth_ghz(p: &RingParams) -> f64 {
    let lam = p.lambda_res_nm * 1e-9;
    SPEED_OF_LIGHT * fwhm_analytic_nm(p) * 1e-9 / (lam * lam) / 1e9
}

/// Loaded quality factor `λ_res/Δλ` (same units for both).
pub fn q_factor(lambda_res: f64, fwhm: f64) -> SourceResult<f64> {
    require(lambda_res > 0.0 && fwhm > 0.0, || "wavelength and width must be positive".into())?;
    Ok(lambda_res / fwhm)
}

/// Intrinsic heralding efficiency `τ/(τ + α)`.
pub fn heralding_eff_corrected(p: &RingParams) -> SourceResult<f64> {
    p.validate()?;
    Ok(p.tau / (p.tau + p.alpha))
}

/// A characterized ring with its tabulated figures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingRecord {
    pub name: String,
    pub params: RingParams,
    pub fwhm_pm: f64,
    pub q_factor: f64,
    /// Effective brightness in counts/s/mW².
    pub gamma_eff: f64,
    pub eta_signal: f64,
    pub eta_idler: f64,
    pub eta_herald_raw: f64,
    pub eta_herald_corrected: f64,
}

/// The four sources of the reference device.
pub fn paper_rings() -> Vec<RingRecord> {
    let rows = [
        ("MRR1", 0.9801, 0.9854, 36.824, 4.181e4, 57.38, 3.232, 4.127, 2.439, 49.87),
        ("MRR2", 0.9767, 0.9837, 43.601, 3.531e4, 48.94, 2.507, 3.625, 1.859, 49.82),
        ("MRR3", 0.9815, 0.9875, 31.380, 4.907e4, 53.90, 2.603, 2.589, 1.782, 49.85),
        ("MRR4", 0.9740, 0.9829, 48.860, 3.151e4, 44.14, 2.369, 2.529, 1.608, 49.77),
    ];
    rows.iter()
        .map(|&(name, tau, alpha, fwhm, q, gamma, es, ei, hr, hc)| RingRecord {
            name: name.to_string(),
            params: RingParams {
                tau,
                alpha,
                radius_um: 27.68,
                group_index: 4.31,
                lambda_res_nm: 1539.758,
            },
            fwhm_pm: fwhm,
            q_factor: q,
            gamma_eff: gamma * 1e6,
            eta_signal: es / 100.0,
            eta_idler: ei / 100.0,
            eta_herald_raw: hr / 100.0,
            eta_herald_corrected: hc / 100.0,
        })
        .collect()
}

impl RingRecord {
    pub fn find(name: &str) -> Result<RingRecord, SourceError> {
        paper_rings()
            .into_iter()
            .find(|r| r.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| SourceError::InvalidParameter(format!("unknown ring {name}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mrr1() -> RingParams {
        paper_rings()[0].params
    }

    #[test]
    fn critical_coupling_extinguishes() {
        let p = RingParams { tau: 0.98, alpha: 0.98, ..mrr1() };
        assert!(ring_transmission(&p, p.lambda_res_nm).norm() < 1e-12);
    }

    #[test]
    fn transmission_bounded_and_high_off_resonance() {
        let p = mrr1();
        let fsr = fsr_wavelength_nm(&p);
        for k in 0..100 {
            let l = p.lambda_res_nm - fsr / 2.0 + fsr * k as f64 / 100.0;
            assert!(ring_transmission(&p, l).norm() <= 1.0);
        }
        assert!(ring_transmission(&p, p.lambda_res_nm + fsr / 2.0).norm() > 0.99);
    }

    #[test]
    fn numeric_and_analytic_widths_agree() {
        let p = mrr1();
        let a = fwhm_analytic_nm(&p);
        let n = fwhm_numeric_nm(&p).unwrap();
        assert!((a - n).abs() / a < 1e-3, "{a} vs {n}");
    }

    #[test]
    fn heralding_efficiency_symmetry_and_monotonicity() {
        let p = RingParams { tau: 0.97, alpha: 0.97, ..mrr1() };
        assert_eq!(heralding_eff_corrected(&p).unwrap(), 0.5);
        let up = RingParams { tau: 0.975, ..p };
        let lossier = RingParams { alpha: 0.975, ..p };
        assert!(heralding_eff_corrected(&up).unwrap() > 0.5);
        assert!(heralding_eff_corrected(&lossier).unwrap() < 0.5);
    }

    #[test]
    fn group_index_inverts_fsr() {
        let p = mrr1();
        let ng = group_index(fsr_ghz(&p), p.radius_um).unwrap();
        assert!((ng - p.group_index).abs() < 1e-12);
    }

    #[test]
    fn q_factor_trivial_cases() {
        assert_eq!(q_factor(3.0, 3.0).unwrap(), 1.0);
        assert!(q_factor(1.0, 0.0).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        let p = RingParams { tau: 1.2, ..mrr1() };
        assert!(heralding_eff_corrected(&p).is_err());
    }
}
