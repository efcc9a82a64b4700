use std::collections::HashMap;

use super::{DetectionPattern, FockError, FockResult, LinearTransform, OccupationState, PureState, Slot};
use crate::C64;

pub const ORACLE_MAX_PHOTONS: u32 = 3;
pub const ORACLE_MAX_MODES: usize = 8;

/// Independent first-quantized evaluation of `pattern` after `u` acts on every mode.
///
/// Each photon-number sector is stored as a dense tensor over ordered slot
/// tuples, `u ⊗ I_labels` is applied to every tensor leg, and output amplitudes
/// are gathered per occupation. No sparsity and no pruning are involved.
pub fn brute_force_oracle(
    state: &PureState,
    u: &LinearTransform,
    pattern: &DetectionPattern,
) -> FockResult<f64> {
    let m = state.mode_count();
    if m > ORACLE_MAX_MODES {
        return Err(FockError::SizeLimit(format!("{m} modes > {ORACLE_MAX_MODES}")));
    }
    if u.dim() != m {
        return Err(FockError::Dimension(format!(
            "oracle needs a {m}-mode transform, got {}",
            u.dim()
        )));
    }
    if let Some(n) = state.photon_numbers().into_iter().find(|&n| n > ORACLE_MAX_PHOTONS) {
        return Err(FockError::SizeLimit(format!("{n} photons > {ORACLE_MAX_PHOTONS}")));
    }
    let n2 = state.norm_sqr();
    if (n2 - 1.0).abs() > 1e-9 {
        return Err(FockError::NotNormalized(n2));
    }
    pattern.check_modes(m)?;

    let mut labels: Vec<usize> = state
        .terms()
        .flat_map(|(o, _)| o.entries().iter().map(|e| e.0.label))
        .collect();
    labels.sort_unstable();
    labels.dedup();
    let nl = labels.len().max(1);
    let slots = m * nl;
    let slot_index = |s: Slot| s.mode * nl + labels.binary_search(&s.label).unwrap_or(0);
    let slot_of = |i: usize| Slot::new(i / nl, labels.get(i % nl).copied().unwrap_or(0));

    let mut total = 0.0;
    for n in 0..=ORACLE_MAX_PHOTONS as usize {
        let size = slots.pow(n as u32);
        let mut tensor = vec![C64::new(0.0, 0.0); size];
        let mut any = false;
        for (occ, amp) in state.terms().filter(|(o, _)| o.photon_count() as usize == n) {
            let idx = occ
                .slots()
                .fold(0usize, |acc, s| acc * slots + slot_index(s));
            tensor[idx] += amp / occ.factorial_product().sqrt();
            any = true;
        }
        if !any {
            continue;
        }
        for axis in 0..n {
            tensor = apply_leg(&tensor, u, nl, slots, n, axis);
        }
        let mut amps: HashMap<OccupationState, C64> = HashMap::new();
        for (idx, c) in tensor.iter().enumerate() {
            if *c == C64::new(0.0, 0.0) {
                continue;
            }
            let mut rem = idx;
            let mut tuple = Vec::with_capacity(n);
            for _ in 0..n {
                tuple.push(slot_of(rem % slots));
                rem /= slots;
            }
            *amps.entry(OccupationState::from_slots(tuple)).or_default() += c;
        }
        for (occ, sum) in amps {
            if pattern.matches(&occ) {
                total += (sum * occ.factorial_product().sqrt()).norm_sqr();
            }
        }
    }
    Ok(total)
}

/// Contracts `u ⊗ I_labels` into leg `axis` of a rank-`n` tensor.
fn apply_leg(t: &[C64], u: &LinearTransform, nl: usize, slots: usize, n: usize, axis: usize) -> Vec<C64> {
    let stride = slots.pow((n - 1 - axis) as u32);
    let mut out = vec![C64::new(0.0, 0.0); t.len()];
    for (idx, &c) in t.iter().enumerate() {
        if c == C64::new(0.0, 0.0) {
            continue;
        }
        let j = (idx / stride) % slots;
        let (jm, jl) = (j / nl, j % nl);
        let base = idx - j * stride;
        for km in 0..u.dim() {
            let z = u.entry(km, jm);
            if z != C64::new(0.0, 0.0) {
                out[base + (km * nl + jl) * stride] += z * c;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{apply_transform, post_select, ModeConstraint};

    #[test]
    fn hom_coincidence_is_zero() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u = LinearTransform::from_rows(&[
            &[C64::new(0.0, h), C64::new(h, 0.0)],
            &[C64::new(h, 0.0), C64::new(0.0, h)],
        ])
        .unwrap();
        let s = PureState::basis(2, OccupationState::from_modes(&[0, 1])).unwrap();
        let pat = DetectionPattern::clicks(&[0, 1], &[]).unwrap();
        assert!(brute_force_oracle(&s, &u, &pat).unwrap().abs() < 1e-15);
    }

    #[test]
    fn identity_gives_born_probability() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = PureState::from_terms(
            3,
            [
                (OccupationState::from_modes(&[0, 0]), C64::new(h, 0.0)),
                (OccupationState::from_slots([Slot::new(1, 0), Slot::new(2, 4)]), C64::new(0.0, h)),
            ],
        )
        .unwrap();
        let pat = DetectionPattern::number_resolving([(0, ModeConstraint::ExactlyK(2))]).unwrap();
        let p = brute_force_oracle(&s, &LinearTransform::identity(3), &pat).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        let direct = post_select(&s, &pat).unwrap().1;
        assert!((p - direct).abs() < 1e-15);
    }

    #[test]
    fn size_limits_enforced() {
        let s = PureState::basis(2, OccupationState::from_modes(&[0, 0, 1, 1])).unwrap();
        let r = brute_force_oracle(&s, &LinearTransform::identity(2), &DetectionPattern::default());
        assert!(matches!(r, Err(FockError::SizeLimit(_))));
        let big = PureState::basis(9, OccupationState::from_modes(&[0])).unwrap();
        let r = brute_force_oracle(&big, &LinearTransform::identity(9), &DetectionPattern::default());
        assert!(matches!(r, Err(FockError::SizeLimit(_))));
    }

    #[test]
    fn agrees_with_main_path_on_labelled_photons() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(7);
        let u = crate::fock::random_unitary(4, &mut rng);
        let s = PureState::basis(
            4,
            OccupationState::from_slots([Slot::new(0, 0), Slot::new(1, 1), Slot::new(1, 0)]),
        )
        .unwrap();
        let evolved = apply_transform(&s, &u, &[0, 1, 2, 3]).unwrap();
        let pat = DetectionPattern::number_resolving([
            (0, ModeConstraint::ExactlyK(1)),
            (2, ModeConstraint::ExactlyK(1)),
        ])
        .unwrap();
        let main = post_select(&evolved.normalize().unwrap(), &pat).unwrap().1;
        let oracle = brute_force_oracle(&s, &u, &pat).unwrap();
        assert!((main - oracle).abs() < 1e-12);
    }
}
