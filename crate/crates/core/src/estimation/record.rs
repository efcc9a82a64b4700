use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EstimationError, EstimationResult};
use crate::circuits::ProjectorSetting;

/// Outcome bitstring (qubit 1 leftmost) to probability or relative count.
pub type Distribution = BTreeMap<String, f64>;

/// All `2ⁿ` outcome strings in ascending binary order.
pub fn bitstrings(n: usize) -> Vec<String> {
    (0..1usize << n).map(|i| format!("{i:0n$b}")).collect()
}

/// `(−1)^(number of ones)`: the product of ±1 eigenvalues, bit 0 ↦ +1.
pub fn parity_sign(bits: &str) -> f64 {
    if bits.bytes().filter(|&b| b == b'1').count() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Counts of one global measurement setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    /// One projector per qubit, qubit 1 first.
    pub settings: Vec<ProjectorSetting>,
    /// Non-negative counts keyed by outcome bitstring; missing outcomes count zero.
    pub counts: BTreeMap<String, f64>,
}

impl MeasurementRecord {
    pub fn new(settings: Vec<ProjectorSetting>, counts: BTreeMap<String, f64>) -> EstimationResult<Self> {
        let r = Self { settings, counts };
        r.validate()?;
        Ok(r)
    }

    pub fn qubits(&self) -> usize {
        self.settings.len()
    }

    pub fn validate(&self) -> EstimationResult<()> {
        let n = self.qubits();
        if n == 0 {
            return Err(EstimationError::InvalidRecord("no settings".into()));
        }
        for (k, &c) in &self.counts {
            if k.len() != n || !k.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(EstimationError::InvalidRecord(format!(
                    "outcome {k:?} is not a {n}-bit string"
                )));
            }
            if !c.is_finite() || c < 0.0 {
                return Err(EstimationError::InvalidRecord(format!("count {c} for {k}")));
            }
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.counts.values().sum()
    }

    pub fn count(&self, outcome: &str) -> f64 {
        self.counts.get(outcome).copied().unwrap_or(0.0)
    }

    /// Counts divided by their total, over all `2ⁿ` outcomes.
    pub fn frequencies(&self) -> EstimationResult<Distribution> {
        let total = self.total();
        if total <= 0.0 {
            return Err(EstimationError::ZeroTotal);
        }
        Ok(bitstrings(self.qubits())
            .into_iter()
            .map(|b| {
                let f = self.count(&b) / total;
                (b, f)
            })
            .collect())
    }

    /// Expectation of the product of ±1 outcomes.
    pub fn parity_expectation(&self) -> EstimationResult<f64> {
        Ok(self.frequencies()?.iter().map(|(b, f)| parity_sign(b) * f).sum())
    }

    /// True when every qubit's projector matches `(theta, phi)` within `1e-9` (φ mod 2π).
    pub fn uses_setting(&self, theta: f64, phi: f64) -> bool {
        self.settings.iter().all(|s| same_setting(s, theta, phi))
    }
}

pub(crate) fn same_setting(s: &ProjectorSetting, theta: f64, phi: f64) -> bool {
    let tau = std::f64::consts::TAU;
    let dphi = (s.phi - phi).rem_euclid(tau);
    (s.theta - theta).abs() < 1e-9 && dphi.min(tau - dphi) < 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strings_and_parity() {
        assert_eq!(bitstrings(2), ["00", "01", "10", "11"]);
        assert_eq!(parity_sign("0110"), 1.0);
        assert_eq!(parity_sign("100"), -1.0);
    }

    #[test]
    fn validation() {
        let s = vec![ProjectorSetting::sigma_z(); 2];
        let bad = BTreeMap::from([("0".to_string(), 1.0)]);
        assert!(MeasurementRecord::new(s.clone(), bad).is_err());
        let neg = BTreeMap::from([("01".to_string(), -1.0)]);
        assert!(MeasurementRecord::new(s.clone(), neg).is_err());
        let r = MeasurementRecord::new(s, BTreeMap::from([("01".to_string(), 3.0), ("10".to_string(), 1.0)])).unwrap();
        let f = r.frequencies().unwrap();
        assert_eq!(f.len(), 4);
        assert_eq!(f["01"], 0.75);
        assert_eq!(r.parity_expectation().unwrap(), -1.0);
    }
}
