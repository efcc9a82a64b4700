use proptest::prelude::*;
use qpsim::fock::{
    apply_transform, brute_force_oracle, post_select, random_unitary, DetectionPattern, DetectorModel, LinearTransform,
    ModeConstraint, OccupationState, PureState, Slot, ORACLE_MAX_MODES, ORACLE_MAX_PHOTONS,
};
use qpsim::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A normalized superposition of up to three occupations, each with at most
/// `ORACLE_MAX_PHOTONS` photons spread over `m` modes and two spectral labels.
fn random_state(m: usize, seed: u64) -> PureState {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = rng.random_range(1..=3);
    let occs: Vec<(OccupationState, C64)> = (0..terms)
        .map(|_| {
            let n = rng.random_range(1..=ORACLE_MAX_PHOTONS);
            let slots: Vec<Slot> = (0..n)
                .map(|_| Slot::new(rng.random_range(0..m), rng.random_range(0..2)))
                .collect();
            let amp = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            (OccupationState::from_slots(slots), amp)
        })
        .collect();
    PureState::from_terms(m, occs)
        .unwrap()
        .normalize()
        .unwrap_or_else(|_| PureState::basis(m, OccupationState::from_modes(&[0])).unwrap())
}

fn random_pattern(m: usize, seed: u64) -> DetectionPattern {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let detector = if rng.random_bool(0.5) {
        DetectorModel::Threshold
    } else {
        DetectorModel::NumberResolving
    };
    let resolving = detector == DetectorModel::NumberResolving;
    let mut p = DetectionPattern::new(detector);
    for mode in 0..m {
        let c = match rng.random_range(0..5) {
            0 => ModeConstraint::Zero,
            1 => ModeConstraint::AtLeastOne,
            2 => ModeConstraint::ExactlyK(if resolving { rng.random_range(1..=2) } else { 1 }),
            _ => ModeConstraint::Unconstrained,
        };
        p.set(mode, c).unwrap();
    }
    p
}

fn modes(m: usize) -> Vec<usize> {
    (0..m).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unitaries_preserve_norm(m in 2usize..=ORACLE_MAX_MODES, seed in any::<u64>()) {
        let s = random_state(m, seed);
        let u = random_unitary(m, &mut ChaCha8Rng::seed_from_u64(seed));
        let out = apply_transform(&s, &u, &modes(m)).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-9);
        prop_assert_eq!(out.photon_numbers(), s.photon_numbers());
    }

    #[test]
    fn engine_matches_oracle(m in 2usize..=ORACLE_MAX_MODES, seed in any::<u64>()) {
        let s = random_state(m, seed);
        let u = random_unitary(m, &mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(1)));
        let pat = random_pattern(m, seed);
        let evolved = apply_transform(&s, &u, &modes(m)).unwrap().normalize().unwrap();
        let engine = post_select(&evolved, &pat).unwrap().1;
        let oracle = brute_force_oracle(&s, &u, &pat).unwrap();
        prop_assert!((engine - oracle).abs() < 1e-9, "engine {} oracle {}", engine, oracle);
    }

    #[test]
    fn sequential_transforms_compose(m in 2usize..=6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_unitary(m, &mut rng), random_unitary(m, &mut rng));
        let s = random_state(m, seed);
        let two_step = apply_transform(&apply_transform(&s, &a, &modes(m)).unwrap(), &b, &modes(m)).unwrap();
        let one_step = apply_transform(&s, &b.compose(&a).unwrap(), &modes(m)).unwrap();
        prop_assert!(two_step.max_abs_diff(&one_step) < 1e-9);
    }

    #[test]
    fn adjoint_undoes_transform(m in 2usize..=6, seed in any::<u64>()) {
        let u = random_unitary(m, &mut ChaCha8Rng::seed_from_u64(seed));
        let s = random_state(m, seed);
        let back = apply_transform(&apply_transform(&s, &u, &modes(m)).unwrap(), &u.adjoint(), &modes(m)).unwrap();
        prop_assert!(back.max_abs_diff(&s) < 1e-9);
    }

    #[test]
    fn post_selection_probabilities_partition(m in 2usize..=6, seed in any::<u64>()) {
        // Zero and at-least-one on mode 0 are complementary for any state.
        let s = random_state(m, seed);
        let dark = DetectionPattern::threshold([(0, ModeConstraint::Zero)]).unwrap();
        let lit = DetectionPattern::threshold([(0, ModeConstraint::AtLeastOne)]).unwrap();
        let total = post_select(&s, &dark).unwrap().1 + post_select(&s, &lit).unwrap().1;
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn identity_transform_is_a_no_op() {
    let s = random_state(5, 3);
    let out = apply_transform(&s, &LinearTransform::identity(5), &modes(5)).unwrap();
    assert!(out.max_abs_diff(&s) < 1e-15);
}
