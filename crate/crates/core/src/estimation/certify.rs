use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::{bitstrings, parity_sign, Distribution, EstimationError, EstimationResult, MeasurementRecord};

/// Population/coherence estimate of GHZ fidelity and the projector witness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    /// `p(0…0) + p(1…1)` in the σz basis.
    pub population: f64,
    /// `(1/n) Σ_k (−1)^k ⟨Ω_{kπ/n}^{⊗n}⟩`.
    pub coherence: f64,
    pub fidelity: f64,
    /// `1/2 − F`; negative certifies genuine multipartite entanglement.
    pub witness: f64,
}

/// `⟨W⟩ = 1/2 − F` of the witness `I/2 − |GHZ⟩⟨GHZ|`.
pub fn witness_value(fidelity: f64) -> f64 {
    0.5 - fidelity
}

fn check_global(r: &MeasurementRecord, n: usize, theta: f64, phi: f64, what: &str) -> EstimationResult<()> {
    r.validate()?;
    if r.qubits() != n {
        return Err(EstimationError::Dimension(format!("{what} record over {} qubits, expected {n}", r.qubits())));
    }
    if !r.uses_setting(theta, phi) {
        return Err(EstimationError::SettingMismatch(format!("{what} record has the wrong projectors")));
    }
    Ok(())
}

/// GHZ fidelity from one σz⊗n record and the `n` records `Ω_{kπ/n}⊗n`, k = 0…n−1, in any order.
pub fn ghz_fidelity_witness(
    z_record: &MeasurementRecord,
    omega_records: &[MeasurementRecord],
) -> EstimationResult<WitnessReport> {
    let n = z_record.qubits();
    if n < 2 {
        return Err(EstimationError::WrongQubitCount(n));
    }
    if omega_records.len() != n {
        return Err(EstimationError::SettingMismatch(format!(
            "{} coherence settings, need {n}",
            omega_records.len()
        )));
    }
    check_global(z_record, n, PI, 0.0, "population")?;
    let z = z_record.frequencies()?;
    let population = z[&"0".repeat(n)] + z[&"1".repeat(n)];
    let mut seen = vec![false; n];
    let mut coherence = 0.0;
    for r in omega_records {
        let k = (0..n)
            .find(|&k| r.qubits() == n && r.uses_setting(FRAC_PI_2, k as f64 * PI / n as f64))
            .ok_or_else(|| EstimationError::SettingMismatch("record is not an Ω_{kπ/n} product setting".into()))?;
        if std::mem::replace(&mut seen[k], true) {
            return Err(EstimationError::SettingMismatch(format!("Ω setting k = {k} given twice")));
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        coherence += sign * r.parity_expectation()?;
    }
    coherence /= n as f64;
    let fidelity = 0.5 * (population + coherence);
    Ok(WitnessReport {
        population,
        coherence,
        fidelity,
        witness: witness_value(fidelity),
    })
}

/// Even-minus-odd parity sum of x-basis populations, and the antipodal z-population root sum
/// `Σ √(p_b p_{b̄})` over `b = 0…01 … 01…1`.
fn two_basis_terms(n: usize, z: &MeasurementRecord, x: &MeasurementRecord) -> EstimationResult<(f64, f64, Distribution)> {
    if !(n == 3 || n == 4) {
        return Err(EstimationError::WrongQubitCount(n));
    }
    check_global(z, n, PI, 0.0, "σz")?;
    check_global(x, n, FRAC_PI_2, 0.0, "σx")?;
    let pz = z.frequencies()?;
    let px = x.frequencies()?;
    let c = px.iter().map(|(b, p)| parity_sign(b) * p).sum();
    let all = bitstrings(n);
    let half = 1usize << (n - 1);
    let roots = (1..half)
        .map(|i| {
            let b = &all[i];
            let flip = &all[all.len() - 1 - i];
            (pz[b] * pz[flip]).sqrt()
        })
        .sum();
    Ok((c, roots, pz))
}

/// Lower bound on the GME-concurrence from σz⊗n and σx⊗n populations (n = 3 or 4).
pub fn gme_concurrence_bound(n: usize, z: &MeasurementRecord, x: &MeasurementRecord) -> EstimationResult<f64> {
    let (c, roots, _) = two_basis_terms(n, z, x)?;
    Ok(c - 4.0 * roots)
}

/// Lower bound on the GHZ fidelity from the same two settings.
pub fn fidelity_lower_bound_two_basis(n: usize, z: &MeasurementRecord, x: &MeasurementRecord) -> EstimationResult<f64> {
    let (c, roots, pz) = two_basis_terms(n, z, x)?;
    Ok(0.5 * c - roots + 0.5 * (pz[&"0".repeat(n)] + pz[&"1".repeat(n)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::ProjectorSetting;
    use std::collections::BTreeMap;

    fn rec(setting: ProjectorSetting, n: usize, counts: &[(&str, f64)]) -> MeasurementRecord {
        let c: BTreeMap<String, f64> = counts.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        MeasurementRecord::new(vec![setting; n], c).unwrap()
    }

    fn uniform(setting: ProjectorSetting, n: usize) -> MeasurementRecord {
        let c = bitstrings(n).into_iter().map(|b| (b, 10.0)).collect();
        MeasurementRecord::new(vec![setting; n], c).unwrap()
    }

    #[test]
    fn mixed_state_bounds() {
        let z = uniform(ProjectorSetting::sigma_z(), 3);
        let x = uniform(ProjectorSetting::sigma_x(), 3);
        assert!((gme_concurrence_bound(3, &z, &x).unwrap() + 1.5).abs() < 1e-12);
        assert!((fidelity_lower_bound_two_basis(3, &z, &x).unwrap() + 0.25).abs() < 1e-12);
        assert!(gme_concurrence_bound(2, &z, &x).is_err());
        assert!(gme_concurrence_bound(3, &x, &z).is_err());
    }

    #[test]
    fn ideal_ghz3_bounds() {
        let z = rec(ProjectorSetting::sigma_z(), 3, &[("000", 1.0), ("111", 1.0)]);
        let x = rec(
            ProjectorSetting::sigma_x(),
            3,
            &[("000", 1.0), ("011", 1.0), ("101", 1.0), ("110", 1.0)],
        );
        assert!((gme_concurrence_bound(3, &z, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((fidelity_lower_bound_two_basis(3, &z, &x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn witness_setting_checks() {
        let z = rec(ProjectorSetting::sigma_z(), 2, &[("00", 1.0), ("11", 1.0)]);
        let o0 = rec(ProjectorSetting::omega(0.0), 2, &[("00", 1.0), ("11", 1.0)]);
        let o1 = rec(ProjectorSetting::omega(FRAC_PI_2), 2, &[("01", 1.0), ("10", 1.0)]);
        let w = ghz_fidelity_witness(&z, &[o1.clone(), o0.clone()]).unwrap();
        assert!((w.fidelity - 1.0).abs() < 1e-12 && (w.witness + 0.5).abs() < 1e-12);
        assert!(ghz_fidelity_witness(&z, std::slice::from_ref(&o0)).is_err());
        assert!(ghz_fidelity_witness(&z, &[o0.clone(), o0]).is_err());
        assert!(ghz_fidelity_witness(&o1, &[o1.clone(), o1.clone()]).is_err());
    }
}
