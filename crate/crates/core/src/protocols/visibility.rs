use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::chip::{expand_sources, Efficiencies, PairSource};
use super::{ProtocolError, ProtocolResult};
use crate::circuits::mmi_unitary;
use crate::fock::{click_probability, DetectionPattern, PureState};
use crate::source::SchmidtSpectrum;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomOptions {
    pub efficiency: Efficiencies,
}

impl Default for HomOptions {
    /// Measured channel efficiencies: loss changes how strongly double pairs fake coincidences.
    fn default() -> Self {
        Self {
            efficiency: Efficiencies::paper(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomVisibility {
    pub raw: f64,
    /// Leading order only: no multi-pair events.
    pub corrected: f64,
}

/// Fourfold rate of two heralded sources (signals on modes 0/1, idlers on 2/3)
/// whose signals meet at a balanced coupler.
fn heralded_fourfold(nbar: f64, schmidt: &SchmidtSpectrum, distinct: bool, eta: &[f64]) -> ProtocolResult<f64> {
    let src = |sig, idl, d: f64| PairSource {
        signal_mode: sig,
        idler_mode: idl,
        weight: C64::new(1.0, 0.0),
        nbar,
        spectrum: schmidt.clone(),
        distinguishability: d,
    };
    let st = expand_sources(&[src(0, 2, 0.0), src(1, 3, if distinct { 1.0 } else { 0.0 })], 4, 2)?;
    let st = crate::fock::apply_transform(&st, &mmi_unitary(), &[0, 1])?;
    Ok(click_probability(&st, &DetectionPattern::clicks(&[0, 1, 2, 3], &[])?, eta)?)
}

/// Heralded two-source HOM visibility `1 − C_indist / C_dist`, with both sources
/// expanded to one extra pair at mean photon number `n̄`.
pub fn heralded_hom_visibility(nbar: f64, schmidt: &SchmidtSpectrum, opts: &HomOptions) -> ProtocolResult<HomVisibility> {
    if !(nbar.is_finite() && (0.0..0.2).contains(&nbar)) {
        return Err(ProtocolError::OutOfRange(format!("n̄ = {nbar} outside the perturbative range [0, 0.2)")));
    }
    let e = opts.efficiency;
    let eta = [e.signal, e.signal, e.idler, e.idler];
    let vis = |n: f64| -> ProtocolResult<f64> {
        let same = heralded_fourfold(n, schmidt, false, &eta)?;
        let diff = heralded_fourfold(n, schmidt, true, &eta)?;
        if diff <= 0.0 {
            return Err(ProtocolError::ZeroSuccess);
        }
        Ok(1.0 - same / diff)
    };
    Ok(HomVisibility {
        raw: vis(nbar)?,
        corrected: vis(0.0)?,
    })
}

/// Heralded `g²(0)` of one source: the idler (mode 2) heralds, the signal is split
/// by a balanced coupler onto modes 0 and 1, and `g² = P₀₁₂ P₂ / (P₀₂ P₁₂)`.
/// The expansion keeps one and two pairs, so `g²` grows linearly in `n̄`.
pub fn heralded_g2(nbar: f64, schmidt: &SchmidtSpectrum, efficiency: Efficiencies) -> ProtocolResult<f64> {
    if !(nbar.is_finite() && (0.0..0.2).contains(&nbar)) {
        return Err(ProtocolError::OutOfRange(format!("n̄ = {nbar} outside the perturbative range [0, 0.2)")));
    }
    let src = PairSource {
        signal_mode: 0,
        idler_mode: 2,
        weight: C64::new(1.0, 0.0),
        nbar,
        spectrum: schmidt.clone(),
        distinguishability: 0.0,
    };
    let st = expand_sources(&[src], 3, 1)?;
    let st = crate::fock::apply_transform(&st, &mmi_unitary(), &[0, 1])?;
    let eta = [efficiency.signal, efficiency.signal, efficiency.idler];
    let p = |clicks: &[usize]| -> ProtocolResult<f64> {
        Ok(click_probability(&st, &DetectionPattern::clicks(clicks, &[])?, &eta)?)
    };
    let (d12, d13) = (p(&[2, 0])?, p(&[2, 1])?);
    if d12 <= 0.0 || d13 <= 0.0 {
        return Err(ProtocolError::ZeroSuccess);
    }
    Ok(p(&[0, 1, 2])? * p(&[2])? / (d12 * d13))
}

const FRINGE_SAMPLES: usize = 8;

/// Interference visibility of two sources whose pairs occupy `d` equally weighted,
/// perfectly correlated spectral modes, against the relative pump phase.
///
/// Signals (modes 0/1) and idlers (modes 2/3) each meet at a balanced coupler;
/// exactly two pairs are emitted and fourfold coincidences are recorded. The
/// fringe is sampled at eight phases, fitted by its Fourier series (which is
/// exact: the fringe has no harmonic above the second) and its extrema taken.
pub fn spectral_correlation_visibility(d: usize) -> ProtocolResult<f64> {
    if d == 0 {
        return Err(ProtocolError::OutOfRange("spectral dimension must be at least 1".into()));
    }
    let spectrum = SchmidtSpectrum::uniform(d)?;
    let rate = |phi: f64| -> ProtocolResult<f64> {
        let src = |sig, idl, w| PairSource {
            signal_mode: sig,
            idler_mode: idl,
            weight: w,
            nbar: 0.0,
            spectrum: spectrum.clone(),
            distinguishability: 0.0,
        };
        let st: PureState = expand_sources(&[src(0, 2, C64::new(1.0, 0.0)), src(1, 3, C64::from_polar(1.0, phi))], 4, 2)?;
        let st = crate::fock::apply_transform(&st, &mmi_unitary(), &[0, 1])?;
        let st = crate::fock::apply_transform(&st, &mmi_unitary(), &[2, 3])?;
        Ok(click_probability(&st, &DetectionPattern::clicks(&[0, 1, 2, 3], &[])?, &[1.0; 4])?)
    };
    let samples: Vec<f64> = (0..FRINGE_SAMPLES)
        .map(|k| rate(TAU * k as f64 / FRINGE_SAMPLES as f64))
        .collect::<ProtocolResult<_>>()?;
    let coef = |h: usize| {
        let (mut c, mut s) = (0.0, 0.0);
        for (k, y) in samples.iter().enumerate() {
            let a = TAU * (h * k) as f64 / FRINGE_SAMPLES as f64;
            c += y * a.cos();
            s += y * a.sin();
        }
        let w = if h == 0 { 1.0 } else { 2.0 } / FRINGE_SAMPLES as f64;
        (c * w, s * w)
    };
    let harmonics: Vec<(f64, f64)> = (0..=2).map(coef).collect();
    let curve = |phi: f64| {
        harmonics
            .iter()
            .enumerate()
            .map(|(h, &(c, s))| c * (h as f64 * phi).cos() + s * (h as f64 * phi).sin())
            .sum::<f64>()
    };
    let dense: Vec<f64> = (0..3600).map(|k| curve(TAU * k as f64 / 3600.0)).collect();
    let hi = dense.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = dense.iter().copied().fold(f64::INFINITY, f64::min);
    if hi + lo <= 0.0 {
        return Err(ProtocolError::ZeroSuccess);
    }
    Ok((hi - lo) / (hi + lo))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g2_vanishes_without_multipairs_and_grows_with_nbar() {
        let pure = SchmidtSpectrum::pure();
        let e = Efficiencies::paper();
        assert!(heralded_g2(0.0, &pure, e).unwrap().abs() < 1e-15);
        let a = heralded_g2(0.01, &pure, e).unwrap();
        let b = heralded_g2(0.05, &pure, e).unwrap();
        assert!(a > 0.0 && b > a && b < 1.0, "{a} {b}");
        // Mixed pairs bunch less: the twin-beam marginal is less thermal.
        let mixed = heralded_g2(0.05, &SchmidtSpectrum::uniform(4).unwrap(), e).unwrap();
        assert!(mixed < b);
        assert!(heralded_g2(0.3, &pure, e).is_err());
    }
}
