use serde::{Deserialize, Serialize};

use super::{Distribution, EstimationError, EstimationResult, MeasurementRecord};

/// Per-qubit heralding efficiency ratio `η_{q,0}/η_{q,1}`, qubit 1 first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EfficiencyRatios(Vec<f64>);

impl EfficiencyRatios {
    pub fn new(ratios: Vec<f64>) -> EstimationResult<Self> {
        if ratios.is_empty() {
            return Err(EstimationError::InvalidRatio("no ratios".into()));
        }
        if let Some(r) = ratios.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(EstimationError::InvalidRatio(format!("{r} is not positive")));
        }
        Ok(Self(ratios))
    }

    pub fn unit(qubits: usize) -> Self {
        Self(vec![1.0; qubits])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Ratios from absolute per-rail efficiencies `(η_{q,0}, η_{q,1})`.
    pub fn from_efficiencies(eta: &[(f64, f64)]) -> EstimationResult<Self> {
        Self::new(eta.iter().map(|&(e0, e1)| e0 / e1).collect())
    }
}

impl TryFrom<Vec<f64>> for EfficiencyRatios {
    type Error = EstimationError;
    fn try_from(v: Vec<f64>) -> EstimationResult<Self> {
        Self::new(v)
    }
}

impl From<EfficiencyRatios> for Vec<f64> {
    fn from(r: EfficiencyRatios) -> Self {
        r.0
    }
}

/// Counts with every qubit reading 1 multiplied by that qubit's `η₀/η₁`, not
/// normalized. Suitable before likelihood fits, where per-setting scale drops out.
pub fn reweight_counts(raw: &MeasurementRecord, r: &EfficiencyRatios) -> EstimationResult<MeasurementRecord> {
    raw.validate()?;
    let n = raw.qubits();
    if r.as_slice().len() != n {
        return Err(EstimationError::Dimension(format!("{} ratios for {n} qubits", r.as_slice().len())));
    }
    let counts = raw
        .counts
        .iter()
        .map(|(b, &c)| {
            let factor: f64 = b
                .bytes()
                .zip(r.as_slice())
                .filter(|(c, _)| *c == b'1')
                .map(|(_, ratio)| ratio)
                .product();
            (b.clone(), c * factor)
        })
        .collect();
    MeasurementRecord::new(raw.settings.clone(), counts)
}

/// Counts relative to the all-zeros outcome with unequal rail efficiencies undone:
/// each qubit reading 1 multiplies the ratio by that qubit's `η₀/η₁`.
pub fn correct_counts(raw: &MeasurementRecord, r: &EfficiencyRatios) -> EstimationResult<Distribution> {
    raw.validate()?;
    let n = raw.qubits();
    if r.as_slice().len() != n {
        return Err(EstimationError::Dimension(format!("{} ratios for {n} qubits", r.as_slice().len())));
    }
    let reference = raw.count(&"0".repeat(n));
    if reference <= 0.0 {
        return Err(EstimationError::ZeroReference);
    }
    Ok(super::bitstrings(n)
        .into_iter()
        .map(|b| {
            let factor: f64 = b
                .bytes()
                .zip(r.as_slice())
                .filter(|(c, _)| *c == b'1')
                .map(|(_, ratio)| ratio)
                .product();
            let v = raw.count(&b) / reference * factor;
            (b, v)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::ProjectorSetting;
    use std::collections::BTreeMap;

    #[test]
    fn single_ratio_example() {
        let raw = MeasurementRecord::new(
            vec![ProjectorSetting::sigma_z(); 4],
            BTreeMap::from([("0000".into(), 10.0), ("0001".into(), 10.0)]),
        )
        .unwrap();
        let r = EfficiencyRatios::new(vec![1.0, 1.0, 1.0, 2.0]).unwrap();
        let c = correct_counts(&raw, &r).unwrap();
        assert_eq!(c["0001"], 2.0);
        assert_eq!(c["0000"], 1.0);
        assert_eq!(c["1000"], 0.0);
    }

    #[test]
    fn errors() {
        assert!(EfficiencyRatios::new(vec![1.0, 0.0]).is_err());
        let raw = MeasurementRecord::new(vec![ProjectorSetting::sigma_z(); 2], BTreeMap::from([("01".into(), 3.0)])).unwrap();
        assert_eq!(correct_counts(&raw, &EfficiencyRatios::unit(2)), Err(EstimationError::ZeroReference));
        assert!(correct_counts(&raw, &EfficiencyRatios::unit(3)).is_err());
    }
}
