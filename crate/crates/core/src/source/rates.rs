use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{levenberg_marquardt, require, FitOptions, PumpPulse, RingParams, SourceError, SourceResult};

const PLANCK: f64 = 6.626_070_15e-34;

/// Noise-free singles and coincidence rates, counts/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRates {
    pub singles_signal: f64,
    pub singles_idler: f64,
    pub coincidences: f64,
}

/// `C_s = η_s γ P²`, `C_i = η_i γ P²`, `CC = η_s η_i γ P²` with `P` in mW.
pub fn rates_model(gamma_eff: f64, eta_s: f64, eta_i: f64, power_mw: f64) -> CountRates {
    let g = gamma_eff * power_mw * power_mw;
    CountRates {
        singles_signal: eta_s * g,
        singles_idler: eta_i * g,
        coincidences: eta_s * eta_i * g,
    }
}

/// `a P² + b P + c` with one-sigma errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub stderr: [f64; 3],
}

impl QuadraticFit {
    pub fn eval(&self, p: f64) -> f64 {
        self.a * p * p + self.b * p + self.c
    }
}

/// Linear least-squares quadratic through `(power, value)` points.
pub fn fit_quadratic(powers: &[f64], values: &[f64]) -> SourceResult<QuadraticFit> {
    require(powers.len() == values.len(), || "power and value lengths differ".into())?;
    require(powers.len() >= 4, || format!("{} points, need at least 4", powers.len()))?;
    let n = powers.len();
    let x = DMatrix::from_fn(n, 3, |i, j| powers[i].powi(2 - j as i32));
    let y = DVector::from_column_slice(values);
    let normal = x.transpose() * &x;
    let inv = normal.try_inverse().ok_or(SourceError::SingularDesign)?;
    let beta = &inv * x.transpose() * &y;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(SourceError::SingularDesign);
    }
    let resid = &y - &x * &beta;
    let s2 = resid.norm_squared() / (n as f64 - 3.0);
    let se = |k: usize| (s2 * inv[(k, k)]).max(0.0).sqrt();
    Ok(QuadraticFit {
        a: beta[0],
        b: beta[1],
        c: beta[2],
        stderr: [se(0), se(1), se(2)],
    })
}

/// One power step of a rate measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub power_mw: f64,
    pub singles_signal: f64,
    pub singles_idler: f64,
    pub coincidences: f64,
    pub accidentals: f64,
}

/// Quadratic coefficients of the singles, net coincidences and accidentals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCoefficients {
    pub signal: QuadraticFit,
    pub idler: QuadraticFit,
    /// Fit of `CC − ACC`; its `a` is `a_si`.
    pub net_coincidences: QuadraticFit,
    pub accidentals: QuadraticFit,
}

impl RateCoefficients {
    pub fn a_s(&self) -> f64 {
        self.signal.a
    }
    pub fn a_i(&self) -> f64 {
        self.idler.a
    }
    pub fn a_si(&self) -> f64 {
        self.net_coincidences.a
    }
}

pub fn fit_rates(points: &[RatePoint]) -> SourceResult<RateCoefficients> {
    let p: Vec<f64> = points.iter().map(|r| r.power_mw).collect();
    let col = |f: fn(&RatePoint) -> f64| points.iter().map(f).collect::<Vec<f64>>();
    Ok(RateCoefficients {
        signal: fit_quadratic(&p, &col(|r| r.singles_signal))?,
        idler: fit_quadratic(&p, &col(|r| r.singles_idler))?,
        net_coincidences: fit_quadratic(&p, &col(|r| r.coincidences - r.accidentals))?,
        accidentals: fit_quadratic(&p, &col(|r| r.accidentals))?,
    })
}

/// Brightness and channel efficiencies recovered from fitted quadratic terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceParameters {
    pub gamma_eff: f64,
    pub eta_signal: f64,
    pub eta_idler: f64,
}

/// `γ = a_s a_i / a_si`, `η_s = a_si / a_i`, `η_i = a_si / a_s`.
pub fn extract_source_parameters(a_s: f64, a_i: f64, a_si: f64) -> SourceResult<SourceParameters> {
    if a_si == 0.0 || a_s == 0.0 || a_i == 0.0 {
        return Err(SourceError::ZeroDenominator("source parameter extraction"));
    }
    Ok(SourceParameters {
        gamma_eff: a_s * a_i / a_si,
        eta_signal: a_si / a_i,
        eta_idler: a_si / a_s,
    })
}

/// Coincidence-to-accidental ratio.
pub fn car(cc: f64, acc: f64) -> SourceResult<f64> {
    if acc <= 0.0 {
        return Err(SourceError::ZeroDenominator("CAR"));
    }
    Ok(cc / acc)
}

/// Raw heralding efficiency `CC/C(i)`.
pub fn klyshko(cc: f64, c_i: f64) -> SourceResult<f64> {
    if c_i <= 0.0 {
        return Err(SourceError::ZeroDenominator("Klyshko efficiency"));
    }
    Ok(cc / c_i)
}

/// Coincidence probability per pulse including all multi-pair orders of a
/// thermal pair source with parameter `x`.
pub fn cc_multipair(x: f64, eta_i: f64, eta_s: f64) -> SourceResult<f64> {
    require((0.0..1.0).contains(&x), || format!("x = {x} not in [0, 1)"))?;
    require(eta_i > 0.0 && eta_i <= 1.0 && eta_s > 0.0 && eta_s <= 1.0, || {
        "efficiencies must lie in (0, 1]".into()
    })?;
    let (li, ls) = (1.0 - eta_i, 1.0 - eta_s);
    let d1 = 1.0 - x * li;
    let d2 = 1.0 - x * ls;
    let d3 = x * li * ls - 1.0;
    if d1.abs() < 1e-15 || d2.abs() < 1e-15 || d3.abs() < 1e-15 {
        return Err(SourceError::Pole("multi-pair coincidence rate"));
    }
    Ok(x * eta_i * eta_s * (x * x * li * ls - 1.0) / (d1 * d2 * d3))
}

/// Material and mode constants of the nonlinear-loss model (SI units).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearConstants {
    /// Two-photon absorption coefficient, m/W.
    pub beta_tpa: f64,
    /// Effective mode area, m².
    pub a_eff: f64,
    /// Free-carrier absorption cross section, m².
    pub sigma_c: f64,
    /// Optical frequency, Hz.
    pub nu_hz: f64,
}

impl Default for NonlinearConstants {
    fn default() -> Self {
        Self {
            beta_tpa: 8e-12,
            a_eff: 500e-9 * 220e-9,
            sigma_c: 1.45e-21,
            nu_hz: 194e12,
        }
    }
}

/// Transmission left after two-photon absorption inside the ring.
pub fn eta_tpa(pump: &PumpPulse, ring: &RingParams, k: &NonlinearConstants) -> f64 {
    let load = k.beta_tpa * ring.circumference_m() * ring.field_enhancement_sq() * pump.peak_power_w() / k.a_eff;
    1.0 / (1.0 + load)
}

/// Carrier density generated per squared peak power, `β τ/(2hν A²)`, in m⁻³/W².
fn carrier_coefficient(pump: &PumpPulse, k: &NonlinearConstants) -> f64 {
    k.beta_tpa * pump.pulse_width_ps * 1e-12 / (2.0 * PLANCK * k.nu_hz * k.a_eff * k.a_eff)
}

/// Free-carrier density of the unenhanced pump pulse, m⁻³.
pub fn free_carrier_density(pump: &PumpPulse, k: &NonlinearConstants) -> f64 {
    carrier_coefficient(pump, k) * pump.peak_power_w().powi(2)
}

/// Transmission left after free-carrier absorption inside the ring.
pub fn eta_fca(pump: &PumpPulse, ring: &RingParams, k: &NonlinearConstants) -> f64 {
    let fe2 = ring.field_enhancement_sq();
    let load = k.sigma_c
        * carrier_coefficient(pump, k)
        * ring.circumference_m()
        * fe2
        * fe2
        * pump.peak_power_w().powi(2);
    1.0 / (1.0 + load).sqrt()
}

/// Which pump power enters the mean-photon-number formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerConvention {
    /// Input power reduced by the input-to-ring coupling loss.
    OnChip,
    /// Input power as set at the laser.
    Input,
}

/// `n̄ = γ P²/R` with `P` in mW, `R` in Hz; `coupling_loss_db` applies under [`PowerConvention::OnChip`].
pub fn mean_photon_number(
    gamma_eff: f64,
    power_mw: f64,
    rep_rate_hz: f64,
    coupling_loss_db: f64,
    convention: PowerConvention,
) -> SourceResult<f64> {
    require(gamma_eff >= 0.0 && power_mw >= 0.0 && rep_rate_hz > 0.0, || {
        "brightness, power and repetition rate must be non-negative".into()
    })?;
    let p = match convention {
        PowerConvention::OnChip => power_mw * 10f64.powf(-coupling_loss_db.abs() / 10.0),
        PowerConvention::Input => power_mw,
    };
    Ok(gamma_eff * p * p / rep_rate_hz)
}

/// Heralded second-order correlation `D₁₂₃ D₁ / (D₁₂ D₁₃)`.
pub fn g2_heralded(d123: f64, d1: f64, d12: f64, d13: f64) -> SourceResult<f64> {
    if d12 <= 0.0 || d13 <= 0.0 {
        return Err(SourceError::ZeroDenominator("heralded g2"));
    }
    Ok(d123 * d1 / (d12 * d13))
}

/// `g²(P) = S/(1 + S)` with `S = Σ a_k P^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct G2Fit {
    pub orders: Vec<i32>,
    pub coefficients: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl G2Fit {
    pub fn eval(&self, p: f64) -> f64 {
        let s: f64 = self.orders.iter().zip(&self.coefficients).map(|(&k, a)| a * p.powi(k)).sum();
        s / (1.0 + s)
    }
}

/// Nonlinear least-squares fit of heralded g² against power, seeded from `g/(1−g) = S`.
pub fn g2_fit(points: &[(f64, f64)], orders: &[i32]) -> SourceResult<G2Fit> {
    require(!orders.is_empty(), || "no polynomial orders".into())?;
    require(points.len() > orders.len(), || "too few g2 points".into())?;
    require(points.iter().all(|&(_, g)| (0.0..1.0).contains(&g)), || "g2 values must lie in [0, 1)".into())?;
    let n = points.len();
    let x = DMatrix::from_fn(n, orders.len(), |i, j| points[i].0.powi(orders[j]));
    let y = DVector::from_iterator(n, points.iter().map(|&(_, g)| g / (1.0 - g)));
    let start = (x.transpose() * &x)
        .try_inverse()
        .map(|inv| inv * x.transpose() * y)
        .ok_or(SourceError::SingularDesign)?;
    let model = |a: &[f64], p: f64| {
        let s: f64 = orders.iter().zip(a).map(|(&k, c)| c * p.powi(k)).sum();
        s / (1.0 + s)
    };
    let res = |a: &[f64]| points.iter().map(|&(p, g)| model(a, p) - g).collect::<Vec<_>>();
    let fit = levenberg_marquardt(res, start.as_slice(), FitOptions::default())?;
    Ok(G2Fit {
        orders: orders.to_vec(),
        coefficients: fit.params,
        stderr: fit.stderr,
    })
}

/// Fringe visibility `(max − min)/(max + min)`.
pub fn visibility(cc_max: f64, cc_min: f64) -> SourceResult<f64> {
    require(cc_min >= 0.0 && cc_max >= cc_min, || {
        format!("need max ≥ min ≥ 0, got max {cc_max}, min {cc_min}")
    })?;
    if cc_max + cc_min == 0.0 {
        return Err(SourceError::ZeroDenominator("visibility"));
    }
    Ok((cc_max - cc_min) / (cc_max + cc_min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::paper_rings;

    #[test]
    fn extraction_round_trips() {
        let r = rates_model(5e7, 0.03, 0.04, 1.0);
        assert_eq!(r.singles_signal, 1.5e6);
        assert_eq!(r.singles_idler, 2e6);
        assert!((r.coincidences - 6e4).abs() < 1e-9);
        let p = extract_source_parameters(r.singles_signal, r.singles_idler, r.coincidences).unwrap();
        assert!((p.gamma_eff - 5e7).abs() < 1e-6);
        assert!((p.eta_signal - 0.03).abs() < 1e-15 && (p.eta_idler - 0.04).abs() < 1e-15);
    }

    #[test]
    fn quadratic_fit_is_exact_on_clean_data() {
        let p: Vec<f64> = (1..=8).map(|k| 0.1 * k as f64).collect();
        let v: Vec<f64> = p.iter().map(|x| 3e5 * x * x + 2e3 * x + 150.0).collect();
        let f = fit_quadratic(&p, &v).unwrap();
        assert!(((f.a - 3e5) / 3e5).abs() < 1e-9);
        assert!(((f.c - 150.0) / 150.0).abs() < 1e-9);
        assert!(fit_quadratic(&[1.0, 1.0, 1.0, 1.0], &[1.0, 2.0, 3.0, 4.0]).is_err());
    }

    #[test]
    fn ratios() {
        assert_eq!(car(1000.0, 20.0).unwrap(), 50.0);
        assert_eq!(car(7.0, 7.0).unwrap(), 1.0);
        assert!(car(1.0, 0.0).is_err());
        assert!(klyshko(1.0, 0.0).is_err());
    }

    #[test]
    fn multipair_limits() {
        assert!((cc_multipair(0.3, 1.0, 1.0).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(cc_multipair(0.0, 0.1, 0.2).unwrap(), 0.0);
        assert!(cc_multipair(1.0, 0.1, 0.1).is_err());
        let x = 1e-5;
        let cc = cc_multipair(x, 0.04, 0.03).unwrap();
        assert!(((cc - x * 0.04 * 0.03) / x).abs() < x);
    }

    #[test]
    fn nonlinear_losses_vanish_at_low_power_and_fall_with_power() {
        let ring = paper_rings()[0].params;
        let k = NonlinearConstants::default();
        let weak = PumpPulse { avg_power_mw: 1e-9, ..PumpPulse::paper() };
        assert!((eta_tpa(&weak, &ring, &k) - 1.0).abs() < 1e-9);
        assert!((eta_fca(&weak, &ring, &k) - 1.0).abs() < 1e-9);
        let mut last = (1.0, 1.0);
        for mw in [0.5, 1.0, 2.0, 4.0] {
            let p = PumpPulse { avg_power_mw: mw, ..PumpPulse::paper() };
            let now = (eta_tpa(&p, &ring, &k), eta_fca(&p, &ring, &k));
            assert!(now.0 < last.0 && now.1 < last.1);
            last = now;
        }
        let low_loss = RingParams { alpha: 0.9995, ..ring };
        assert!(low_loss.field_enhancement_sq() > ring.field_enhancement_sq());
        let p = PumpPulse::paper();
        assert!(eta_tpa(&p, &low_loss, &k) < eta_tpa(&p, &ring, &k));
    }

    #[test]
    fn mean_photon_number_conventions() {
        let on = mean_photon_number(57.38e6, 0.8, 500e6, 1.25, PowerConvention::OnChip).unwrap();
        let inp = mean_photon_number(57.38e6, 0.8, 500e6, 1.25, PowerConvention::Input).unwrap();
        assert!((on - 0.0413).abs() < 5e-4, "{on}");
        assert!((inp - 0.0734).abs() < 5e-4, "{inp}");
        let double = mean_photon_number(57.38e6, 1.6, 500e6, 0.0, PowerConvention::Input).unwrap();
        assert!((double / inp - 4.0).abs() < 1e-12);
        assert_eq!(mean_photon_number(1.0, 0.0, 1.0, 0.0, PowerConvention::Input).unwrap(), 0.0);
    }

    #[test]
    fn g2_cases() {
        assert_eq!(g2_heralded(0.0, 100.0, 10.0, 10.0).unwrap(), 0.0);
        assert!(g2_heralded(1.0, 1.0, 0.0, 1.0).is_err());
        let a2 = 0.08;
        let pts: Vec<(f64, f64)> = (1..=10)
            .map(|k| {
                let p = 0.1 * k as f64;
                (p, a2 * p * p / (1.0 + a2 * p * p))
            })
            .collect();
        let f = g2_fit(&pts, &[2]).unwrap();
        assert!(((f.coefficients[0] - a2) / a2).abs() < 0.01);
    }

    #[test]
    fn visibility_cases() {
        assert_eq!(visibility(5.0, 0.0).unwrap(), 1.0);
        assert_eq!(visibility(5.0, 5.0).unwrap(), 0.0);
        assert!(visibility(0.0, 0.0).is_err());
        assert!(visibility(1.0, 2.0).is_err());
    }
}
