//! File formats: counts CSV, density-matrix JSON, certification JSON and the
//! flat result tables. Every writer has a reader that restores the same values.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuits::ProjectorSetting;
use crate::estimation::{DensityMatrix, MeasurementRecord};
use crate::C64;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

pub type FormatResult<T> = Result<T, FormatError>;

/// Serializes rows with a header line.
pub fn write_rows<T: Serialize>(rows: &[T]) -> FormatResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| FormatError::Invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| FormatError::Invalid(e.to_string()))
}

pub fn read_rows<T: DeserializeOwned>(text: &str) -> FormatResult<Vec<T>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(FormatError::from)).collect()
}

/// Writes records as `setting_id, theta_1…theta_n, phi_1…phi_n, outcome, count`,
/// one line per stored outcome. `probabilities`, when given per record, adds a
/// trailing `probability` column.
pub fn write_counts(records: &[MeasurementRecord], probabilities: Option<&[BTreeMap<String, f64>]>) -> FormatResult<String> {
    let n = records.first().map_or(0, MeasurementRecord::qubits);
    if records.iter().any(|r| r.qubits() != n) {
        return Err(FormatError::Invalid("records over different qubit counts".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["setting_id".to_string()];
    header.extend((1..=n).map(|k| format!("theta_{k}")));
    header.extend((1..=n).map(|k| format!("phi_{k}")));
    header.extend(["outcome".to_string(), "count".to_string()]);
    if probabilities.is_some() {
        header.push("probability".into());
    }
    w.write_record(&header)?;
    for (i, r) in records.iter().enumerate() {
        for (outcome, count) in &r.counts {
            let mut row = vec![i.to_string()];
            row.extend(r.settings.iter().map(|s| s.theta.to_string()));
            row.extend(r.settings.iter().map(|s| s.phi.to_string()));
            row.push(outcome.clone());
            row.push(count.to_string());
            if let Some(p) = probabilities {
                row.push(p[i].get(outcome).copied().unwrap_or(0.0).to_string());
            }
            w.write_record(&row)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| FormatError::Invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| FormatError::Invalid(e.to_string()))
}

/// Parses a counts file; rows sharing a `setting_id` form one record, and
/// records come back ordered by id. Any extra trailing column is ignored.
pub fn read_counts(text: &str) -> FormatResult<Vec<MeasurementRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let n = header.iter().filter(|h| h.starts_with("theta_")).count();
    let expect: Vec<String> = std::iter::once("setting_id".to_string())
        .chain((1..=n).map(|k| format!("theta_{k}")))
        .chain((1..=n).map(|k| format!("phi_{k}")))
        .chain(["outcome".to_string(), "count".to_string()])
        .collect();
    if n == 0 || header.len() < expect.len() || header[..expect.len()] != expect[..] {
        return Err(FormatError::Invalid(format!("counts header must start with {}", expect.join(","))));
    }
    let mut grouped: BTreeMap<u64, MeasurementRecord> = BTreeMap::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let bad = |message: String| FormatError::Row { line, message };
        let num = |k: usize| -> FormatResult<f64> {
            let v: f64 = row.get(k).unwrap_or("").trim().parse().map_err(|_| bad(format!("column {} is not a number", header[k])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(format!("column {} is not finite", header[k])))
            }
        };
        let id: u64 = row.get(0).unwrap_or("").trim().parse().map_err(|_| bad("setting_id is not an integer".into()))?;
        let settings: Vec<ProjectorSetting> = (0..n)
            .map(|q| Ok(ProjectorSetting::new(num(1 + q)?, num(1 + n + q)?)))
            .collect::<FormatResult<_>>()?;
        let outcome = row.get(1 + 2 * n).unwrap_or("").trim().to_string();
        if outcome.len() != n || !outcome.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(bad(format!("outcome {outcome:?} is not a {n}-bit string")));
        }
        let count = num(2 + 2 * n)?;
        if count < 0.0 {
            return Err(bad("negative count".into()));
        }
        let rec = grouped.entry(id).or_insert_with(|| MeasurementRecord {
            settings: settings.clone(),
            counts: BTreeMap::new(),
        });
        if rec.settings != settings {
            return Err(bad(format!("setting {id} changes its angles")));
        }
        if rec.counts.insert(outcome.clone(), count).is_some() {
            return Err(bad(format!("outcome {outcome} repeated in setting {id}")));
        }
    }
    if grouped.is_empty() {
        return Err(FormatError::Invalid("no count rows".into()));
    }
    Ok(grouped.into_values().collect())
}

/// `{n, re, im}` with row-major `2ⁿ×2ⁿ` real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityJson {
    pub n: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&DensityMatrix> for DensityJson {
    fn from(rho: &DensityMatrix) -> Self {
        let m = rho.matrix();
        let d = rho.dim();
        Self {
            n: rho.qubits(),
            re: (0..d).map(|i| (0..d).map(|j| m[(i, j)].re).collect()).collect(),
            im: (0..d).map(|i| (0..d).map(|j| m[(i, j)].im).collect()).collect(),
        }
    }
}

pub fn write_density(rho: &DensityMatrix) -> FormatResult<String> {
    Ok(serde_json::to_string_pretty(&DensityJson::from(rho))? + "\n")
}

pub fn read_density(text: &str) -> FormatResult<DensityMatrix> {
    let j: DensityJson = serde_json::from_str(text)?;
    let d = 1usize << j.n;
    let square = |m: &Vec<Vec<f64>>| m.len() == d && m.iter().all(|r| r.len() == d);
    if !square(&j.re) || !square(&j.im) {
        return Err(FormatError::Invalid(format!("density matrix for n = {} must be {d}x{d}", j.n)));
    }
    let m = DMatrix::from_fn(d, d, |i, k| C64::new(j.re[i][k], j.im[i][k]));
    DensityMatrix::new(m).map_err(|e| FormatError::Invalid(e.to_string()))
}

/// One certified quantity with its Monte-Carlo error bar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificationEntry {
    pub statistic: String,
    pub value: f64,
    pub stderr: f64,
    pub trials: usize,
    pub seed: u64,
}

pub fn write_json<T: Serialize>(value: &T) -> FormatResult<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn read_json<T: DeserializeOwned>(text: &str) -> FormatResult<T> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub x: f64,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub state: String,
    pub quantity: String,
    pub value: f64,
    pub method: String,
    pub settings: usize,
    pub success_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectedRow {
    pub setting_id: usize,
    pub outcome: String,
    pub corrected: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingRow {
    pub ring: String,
    pub tau: f64,
    pub alpha: f64,
    pub fsr_ghz: f64,
    pub fwhm_pm: f64,
    pub fwhm_fit_pm: f64,
    pub linewidth_ghz: f64,
    pub q_factor: f64,
    pub heralding_efficiency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub ring: String,
    pub wavelength_nm: f64,
    pub transmission: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JsdRow {
    pub ring: String,
    pub signal_ghz: f64,
    pub idler_ghz: f64,
    pub intensity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub ring: String,
    pub power_mw: f64,
    /// Photon number from the input power.
    pub nbar: f64,
    /// Photon number from the power coupled into the ring.
    pub nbar_on_chip: f64,
    pub singles_signal: f64,
    pub singles_idler: f64,
    pub coincidences: f64,
    pub accidentals: f64,
    pub car: f64,
    pub klyshko: f64,
    pub g2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeRow {
    pub x: f64,
    pub value: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{bell_state, BellState};

    #[test]
    fn counts_round_trip() {
        let recs = vec![
            MeasurementRecord::new(
                vec![ProjectorSetting::sigma_x(), ProjectorSetting::new(0.1234567890123, -2.5)],
                BTreeMap::from([("00".into(), 12.0), ("11".into(), 0.3333333333333333)]),
            )
            .unwrap(),
            MeasurementRecord::new(vec![ProjectorSetting::sigma_z(); 2], BTreeMap::from([("01".into(), 7.0)])).unwrap(),
        ];
        let text = write_counts(&recs, None).unwrap();
        let back = read_counts(&text).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(a.counts, b.counts);
            for (s, t) in a.settings.iter().zip(&b.settings) {
                assert_eq!((s.theta, s.phi), (t.theta, t.phi));
            }
        }
    }

    #[test]
    fn malformed_counts() {
        assert!(read_counts("a,b\n1,2\n").is_err());
        assert!(read_counts("setting_id,theta_1,phi_1,outcome,count\n0,1,0,2,5\n").is_err());
        assert!(read_counts("setting_id,theta_1,phi_1,outcome,count\n0,1,0,1,-5\n").is_err());
        assert!(read_counts("setting_id,theta_1,phi_1,outcome,count\n0,1,0,1,x\n").is_err());
        assert!(read_counts("setting_id,theta_1,phi_1,outcome,count\n").is_err());
    }

    #[test]
    fn density_round_trip() {
        let rho = DensityMatrix::from_pure(&bell_state(BellState::PsiMinus)).unwrap();
        let back = read_density(&write_density(&rho).unwrap()).unwrap();
        assert_eq!(back.matrix(), rho.matrix());
    }

    #[test]
    fn table_round_trip() {
        let rows = vec![SweepRow { x: 0.1, value: 1.0 / 3.0, stderr: 0.0 }];
        let back: Vec<SweepRow> = read_rows(&write_rows(&rows).unwrap()).unwrap();
        assert_eq!(rows, back);
    }
}
