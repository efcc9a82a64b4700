use nalgebra::{DMatrix, DVector};

use super::density::hermitian_eigenvalues;
use super::{bitstrings, DensityMatrix, Distribution, EstimationError, EstimationResult, MeasurementRecord};
use crate::circuits::ProjectorSetting;
use crate::C64;

/// Rank-one projector vector of `outcome` under per-qubit `settings`, qubit 1 most significant.
pub fn outcome_projector(settings: &[ProjectorSetting], outcome: &str) -> DVector<C64> {
    let mut v = DVector::from_element(1, C64::new(1.0, 0.0));
    for (s, b) in settings.iter().zip(outcome.bytes()) {
        let [a0, a1] = s.outcome_vector(b - b'0');
        let q = DVector::from_vec(vec![a0, a1]);
        v = v.kronecker(&q);
    }
    v
}

/// `Tr(ρ Π_o)` for every outcome of one global setting.
pub fn born_probabilities(rho: &DensityMatrix, settings: &[ProjectorSetting]) -> EstimationResult<Distribution> {
    if settings.len() != rho.qubits() {
        return Err(EstimationError::Dimension(format!(
            "{} settings for a {}-qubit state",
            settings.len(),
            rho.qubits()
        )));
    }
    Ok(bitstrings(rho.qubits())
        .into_iter()
        .map(|o| {
            let v = outcome_projector(settings, &o);
            let p = expectation(rho.matrix(), &v).max(0.0);
            (o, p)
        })
        .collect())
}

fn expectation(m: &DMatrix<C64>, v: &DVector<C64>) -> f64 {
    v.dotc(&(m * v)).re
}

/// All `3ⁿ` products of σx, σy, σz, qubit 1 varying slowest.
pub fn pauli_settings(n: usize) -> Vec<Vec<ProjectorSetting>> {
    let single = [ProjectorSetting::sigma_x(), ProjectorSetting::sigma_y(), ProjectorSetting::sigma_z()];
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                single.iter().map(move |s| {
                    let mut p = prefix.clone();
                    p.push(*s);
                    p
                })
            })
            .collect();
    }
    out
}

/// One row per (setting, outcome): projector vector and observed frequency.
struct Design {
    projectors: Vec<DVector<C64>>,
    frequencies: Vec<f64>,
    settings: usize,
}

fn design(records: &[MeasurementRecord], n: usize) -> EstimationResult<Design> {
    if records.is_empty() {
        return Err(EstimationError::InvalidRecord("no records".into()));
    }
    let mut projectors = Vec::new();
    let mut frequencies = Vec::new();
    for r in records {
        r.validate()?;
        if r.qubits() != n {
            return Err(EstimationError::Dimension(format!("record over {} qubits, expected {n}", r.qubits())));
        }
        for (o, f) in r.frequencies()? {
            projectors.push(outcome_projector(&r.settings, &o));
            frequencies.push(f);
        }
    }
    Ok(Design {
        projectors,
        frequencies,
        settings: records.len(),
    })
}

/// Rank of the map `ρ ↦ (Tr ρΠ)`; full rank `4ⁿ` means the settings are informationally complete.
fn measurement_rank(projectors: &[DVector<C64>], d: usize) -> usize {
    let rows = projectors.len();
    let a = DMatrix::from_fn(rows, d * d, |r, c| {
        let v = &projectors[r];
        v[c / d].conj() * v[c % d]
    });
    let gram = a.adjoint() * &a;
    let ev = hermitian_eigenvalues(&gram);
    let top = ev.iter().copied().fold(0.0, f64::max);
    ev.iter().filter(|&&e| e > top * 1e-12).count()
}

/// Least-squares inversion of exact outcome probabilities. The result is
/// Hermitian with unit trace but need not be positive.
pub fn linear_inversion(records: &[MeasurementRecord], n: usize) -> EstimationResult<DMatrix<C64>> {
    let des = design(records, n)?;
    let d = 1usize << n;
    if measurement_rank(&des.projectors, d) < d * d {
        return Err(EstimationError::SettingMismatch("settings are not informationally complete".into()));
    }
    // ⟨v|ρ|v⟩ = Σ_{ij} conj(v_i) v_j ρ_ij, linear in the entries of ρ.
    let a = DMatrix::from_fn(des.projectors.len(), d * d, |r, c| {
        let v = &des.projectors[r];
        v[c / d].conj() * v[c % d]
    });
    let b = DVector::from_iterator(des.frequencies.len(), des.frequencies.iter().map(|&f| C64::new(f, 0.0)));
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| EstimationError::Numeric(e.to_string()))?;
    let m = DMatrix::from_fn(d, d, |i, j| sol[i * d + j]);
    let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let tr = h.trace().re;
    if tr.abs() < 1e-12 {
        return Err(EstimationError::Numeric("linear inversion gave zero trace".into()));
    }
    Ok(h / C64::new(tr, 0.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Stop once the relative log-likelihood change falls below this.
    pub tolerance: f64,
    /// First dilution tried when a full step would lower the likelihood.
    pub dilution: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            tolerance: 1e-10,
            dilution: 0.1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MleReport {
    pub rho: DensityMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after each accepted step, starting from the initial state.
    pub log_likelihood: Vec<f64>,
    /// Set when the settings do not determine ρ uniquely; ρ is then one maximizer.
    pub rank_deficient: bool,
}

fn log_likelihood(rho: &DMatrix<C64>, des: &Design) -> f64 {
    des.projectors
        .iter()
        .zip(&des.frequencies)
        .filter(|(_, &f)| f > 0.0)
        .map(|(v, &f)| f * expectation(rho, v).max(f64::MIN_POSITIVE).ln())
        .sum()
}

fn r_operator(rho: &DMatrix<C64>, des: &Design) -> DMatrix<C64> {
    let d = rho.nrows();
    let mut r = DMatrix::zeros(d, d);
    for (v, &f) in des.projectors.iter().zip(&des.frequencies) {
        if f == 0.0 {
            continue;
        }
        let p = expectation(rho, v).max(f64::MIN_POSITIVE);
        r += (v * v.adjoint()) * C64::new(f / p, 0.0);
    }
    r / C64::new(des.settings as f64, 0.0)
}

fn normalized_step(rho: &DMatrix<C64>, r: &DMatrix<C64>) -> DMatrix<C64> {
    let next = r * rho * r;
    let next = (&next + next.adjoint()) * C64::new(0.5, 0.0);
    let tr = next.trace().re;
    next / C64::new(tr, 0.0)
}

/// Maximum-likelihood state by the `RρR` fixed-point iteration started at `I/2ⁿ`.
///
/// Every accepted step raises the likelihood or leaves it unchanged: when a
/// full step would lower it, `R` is diluted towards the identity with a
/// halving weight until it does not.
pub fn mle_tomography(records: &[MeasurementRecord], n: usize, opts: MleOptions) -> EstimationResult<MleReport> {
    let des = design(records, n)?;
    let d = 1usize << n;
    let rank_deficient = measurement_rank(&des.projectors, d) < d * d;
    let eye = DMatrix::<C64>::identity(d, d);
    let mut rho = DensityMatrix::maximally_mixed(n).matrix().clone();
    let mut ll = log_likelihood(&rho, &des);
    let mut history = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let r = r_operator(&rho, &des);
        let mut candidate = normalized_step(&rho, &r);
        let mut cand_ll = log_likelihood(&candidate, &des);
        let mut eps = opts.dilution;
        while cand_ll < ll && eps > 1e-12 {
            let rd = (&eye + &r * C64::new(eps, 0.0)) / C64::new(1.0 + eps, 0.0);
            candidate = normalized_step(&rho, &rd);
            cand_ll = log_likelihood(&candidate, &des);
            eps *= 0.5;
        }
        if cand_ll < ll {
            // No ascent direction left at this precision.
            converged = true;
            break;
        }
        let change = (cand_ll - ll).abs() / ll.abs().max(1e-300);
        rho = candidate;
        ll = cand_ll;
        history.push(ll);
        if change < opts.tolerance || ll == 0.0 {
            converged = true;
            break;
        }
    }
    let rho = project_to_density(rho)?;
    Ok(MleReport {
        rho,
        iterations,
        converged,
        log_likelihood: history,
        rank_deficient,
    })
}

/// Clips eigenvalues that rounding pushed below zero and renormalizes.
fn project_to_density(m: DMatrix<C64>) -> EstimationResult<DensityMatrix> {
    match DensityMatrix::from_raw(m.clone()) {
        Ok(r) => Ok(r),
        Err(_) => {
            let d = m.nrows();
            let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
            let shift = hermitian_eigenvalues(&h).into_iter().fold(0.0, f64::min);
            let fixed = h - DMatrix::<C64>::identity(d, d) * C64::new(shift, 0.0);
            DensityMatrix::from_raw(fixed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{bell_state, BellState};
    use std::collections::BTreeMap;

    fn exact_records(rho: &DensityMatrix, scale: f64) -> Vec<MeasurementRecord> {
        pauli_settings(rho.qubits())
            .into_iter()
            .map(|s| {
                let p = born_probabilities(rho, &s).unwrap();
                let counts: BTreeMap<String, f64> = p.into_iter().map(|(o, x)| (o, x * scale)).collect();
                MeasurementRecord::new(s, counts).unwrap()
            })
            .collect()
    }

    #[test]
    fn born_rule_cases() {
        let zero = DensityMatrix::from_pure(&DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)])).unwrap();
        let p = born_probabilities(&zero, &[ProjectorSetting::sigma_z()]).unwrap();
        assert!((p["0"] - 1.0).abs() < 1e-12 && p["1"].abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(1);
        for s in [ProjectorSetting::sigma_x(), ProjectorSetting::sigma_y(), ProjectorSetting::new(0.3, 1.1)] {
            let p = born_probabilities(&mixed, &[s]).unwrap();
            assert!((p["0"] - 0.5).abs() < 1e-12);
        }
        let phi = DensityMatrix::from_pure(&bell_state(BellState::PhiPlus)).unwrap();
        let p = born_probabilities(&phi, &[ProjectorSetting::sigma_x(); 2]).unwrap();
        assert!((p["00"] - 0.5).abs() < 1e-12 && (p["11"] - 0.5).abs() < 1e-12);
        assert!(p["01"].abs() < 1e-12);
    }

    #[test]
    fn pauli_setting_count() {
        assert_eq!(pauli_settings(2).len(), 9);
        assert_eq!(pauli_settings(3).len(), 27);
    }

    #[test]
    fn linear_inversion_recovers_state() {
        let phi = DensityMatrix::from_pure(&bell_state(BellState::PsiMinus)).unwrap();
        let m = linear_inversion(&exact_records(&phi, 1.0), 2).unwrap();
        assert!((&m - phi.matrix()).camax() < 1e-10);
    }

    #[test]
    fn mle_on_exact_and_mixed_data() {
        let target = bell_state(BellState::PhiPlus);
        let phi = DensityMatrix::from_pure(&target).unwrap();
        let rep = mle_tomography(&exact_records(&phi, 1e6), 2, MleOptions::default()).unwrap();
        assert!(rep.rho.fidelity(&target).unwrap() > 0.9999);
        assert!(rep.log_likelihood.windows(2).all(|w| w[1] >= w[0]));
        assert!(!rep.rank_deficient);
        let mixed = DensityMatrix::maximally_mixed(2);
        let rep = mle_tomography(&exact_records(&mixed, 1e4), 2, MleOptions::default()).unwrap();
        assert!((rep.rho.matrix() - mixed.matrix()).camax() < 1e-3);
    }

    #[test]
    fn incomplete_settings_are_flagged() {
        let rho = DensityMatrix::maximally_mixed(1);
        let s = vec![ProjectorSetting::sigma_z()];
        let p = born_probabilities(&rho, &s).unwrap();
        let rec = MeasurementRecord::new(s, p).unwrap();
        let rep = mle_tomography(std::slice::from_ref(&rec), 1, MleOptions::default()).unwrap();
        assert!(rep.rank_deficient);
        assert!(linear_inversion(&[rec], 1).is_err());
    }
}
