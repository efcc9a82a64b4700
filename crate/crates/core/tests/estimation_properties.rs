use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use qpsim::circuits::ProjectorSetting;
use qpsim::estimation::{
    bitstrings, born_probabilities, correct_counts, fidelity_lower_bound_two_basis, ghz_fidelity_witness, ghz_state,
    gme_concurrence_bound, mle_tomography, pauli_settings, qubit_ket, DensityMatrix, EfficiencyRatios,
    MeasurementRecord, MleOptions,
};
use qpsim::protocols::{ghz_witness_settings, sample_shots};
use qpsim::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `A A† / tr` for a complex Gaussian `A` of the given rank.
fn random_density(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let d = 1 << n;
    let a = DMatrix::from_fn(d, rank, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let m = &a * a.adjoint();
    let tr = m.trace();
    DensityMatrix::new(m / tr).unwrap()
}

/// `p |GHZ⟩⟨GHZ| + (1 − p) σ` with `σ` random.
fn noisy_ghz(n: usize, p: f64, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let g = ghz_state(n);
    let pure = &g * g.adjoint();
    let sigma = random_density(n, 1 << n, rng);
    let m = pure * C64::new(p, 0.0) + sigma.matrix() * C64::new(1.0 - p, 0.0);
    DensityMatrix::new(m).unwrap()
}

fn exact_record(rho: &DensityMatrix, settings: Vec<ProjectorSetting>) -> MeasurementRecord {
    let p = born_probabilities(rho, &settings).unwrap();
    MeasurementRecord::new(settings, p).unwrap()
}

fn sampled_records(rho: &DensityMatrix, shots: u64, seed: u64) -> Vec<MeasurementRecord> {
    pauli_settings(rho.qubits())
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let p = born_probabilities(rho, &s).unwrap();
            let counts = sample_shots(&p, shots, seed, i as u64).into_iter().map(|(k, v)| (k, v as f64)).collect();
            MeasurementRecord::new(s, counts).unwrap()
        })
        .collect()
}

fn product_state(angles: &[(f64, f64)]) -> DensityMatrix {
    let v = angles.iter().fold(DVector::from_element(1, C64::new(1.0, 0.0)), |acc, &(t, p)| {
        acc.kronecker(&qubit_ket(&ProjectorSetting::new(t, p)))
    });
    DensityMatrix::from_pure(&v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mle_is_a_density_matrix_with_rising_likelihood(
        n in 1usize..=2, rank in 1usize..=4, shots in 50u64..2000, seed in any::<u64>()
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(n, rank, &mut rng);
        let recs = sampled_records(&rho, shots, seed);
        let rep = mle_tomography(&recs, n, MleOptions::default()).unwrap();
        prop_assert!((rep.rho.matrix().trace().re - 1.0).abs() < 1e-9);
        prop_assert!(rep.rho.min_eigenvalue() >= -1e-12);
        prop_assert!(rep.log_likelihood.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn correction_round_trips(
        ratios in proptest::collection::vec(0.2f64..5.0, 1..=4),
        seed in any::<u64>()
    ) {
        let n = ratios.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts: BTreeMap<String, f64> =
            bitstrings(n).into_iter().map(|b| (b, rng.random_range(1..100_000) as f64)).collect();
        let raw = MeasurementRecord::new(vec![ProjectorSetting::sigma_z(); n], counts).unwrap();
        let r = EfficiencyRatios::new(ratios.clone()).unwrap();
        let corrected = correct_counts(&raw, &r).unwrap();
        let reference = raw.count(&"0".repeat(n));
        for (b, c) in &corrected {
            let factor: f64 = b.bytes().zip(&ratios).filter(|(x, _)| *x == b'1').map(|(_, q)| q).product();
            let back = c / factor * reference;
            prop_assert!((back - raw.count(b)).abs() <= 1e-12 * raw.count(b).max(1.0));
        }
    }

    #[test]
    fn two_basis_bound_never_exceeds_fidelity(n in 3usize..=4, p in 0.0f64..=1.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = noisy_ghz(n, p, &mut rng);
        let recs: Vec<MeasurementRecord> =
            ghz_witness_settings(n).into_iter().map(|s| exact_record(&rho, s)).collect();
        let witness = ghz_fidelity_witness(&recs[0], &recs[1..]).unwrap();
        let exact = rho.fidelity(&ghz_state(n)).unwrap();
        prop_assert!((witness.fidelity - exact).abs() < 1e-9);
        let bound = fidelity_lower_bound_two_basis(n, &recs[0], &recs[1]).unwrap();
        prop_assert!(bound <= exact + 1e-9, "bound {} fidelity {}", bound, exact);
    }

    #[test]
    fn product_states_are_not_certified(
        angles in proptest::collection::vec((0.0f64..std::f64::consts::PI, 0.0f64..std::f64::consts::TAU), 3..=4)
    ) {
        let n = angles.len();
        let rho = product_state(&angles);
        let z = exact_record(&rho, vec![ProjectorSetting::sigma_z(); n]);
        let x = exact_record(&rho, vec![ProjectorSetting::sigma_x(); n]);
        prop_assert!(gme_concurrence_bound(n, &z, &x).unwrap() <= 1e-9);
    }
}

#[test]
fn mle_handles_every_setting_of_a_pure_state() {
    let rho = DensityMatrix::from_pure(&ghz_state(2)).unwrap();
    let recs: Vec<MeasurementRecord> = pauli_settings(2).into_iter().map(|s| exact_record(&rho, s)).collect();
    let rep = mle_tomography(&recs, 2, MleOptions::default()).unwrap();
    assert!(!rep.rank_deficient);
    assert!(rep.rho.fidelity(&ghz_state(2)).unwrap() > 0.999);
}
