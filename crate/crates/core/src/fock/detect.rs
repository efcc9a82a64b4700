use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FockError, FockResult, OccupationState, PureState};

/// Tolerance on `norm² = 1` for operations that require a normalized state.
const NORM_TOLERANCE: f64 = 1e-9;

/// Requirement placed on the photon number seen in one spatial mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConstraint {
    ExactlyK(u32),
    AtLeastOne,
    Unconstrained,
    Zero,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorModel {
    /// Click / no-click detectors.
    #[default]
    Threshold,
    NumberResolving,
}

/// Per-mode constraints plus a detector model. Unlisted modes are unconstrained.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionPattern {
    constraints: BTreeMap<usize, ModeConstraint>,
    detector: DetectorModel,
}

impl DetectionPattern {
    pub fn new(detector: DetectorModel) -> Self {
        Self {
            constraints: BTreeMap::new(),
            detector,
        }
    }

    /// Threshold detectors with the listed constraints.
    pub fn threshold(constraints: impl IntoIterator<Item = (usize, ModeConstraint)>) -> FockResult<Self> {
        let mut p = Self::new(DetectorModel::Threshold);
        for (mode, c) in constraints {
            p.set(mode, c)?;
        }
        Ok(p)
    }

    /// Number-resolving detectors with the listed constraints.
    pub fn number_resolving(
        constraints: impl IntoIterator<Item = (usize, ModeConstraint)>,
    ) -> FockResult<Self> {
        let mut p = Self::new(DetectorModel::NumberResolving);
        for (mode, c) in constraints {
            p.set(mode, c)?;
        }
        Ok(p)
    }

    /// Clicks on `click_modes`, silence on `dark_modes`, threshold detectors.
    pub fn clicks(click_modes: &[usize], dark_modes: &[usize]) -> FockResult<Self> {
        Self::threshold(
            click_modes
                .iter()
                .map(|&m| (m, ModeConstraint::AtLeastOne))
                .chain(dark_modes.iter().map(|&m| (m, ModeConstraint::Zero))),
        )
    }

    /// Adds a constraint; a mode may be constrained only once.
    pub fn set(&mut self, mode: usize, c: ModeConstraint) -> FockResult<()> {
        if self.detector == DetectorModel::Threshold {
            if let ModeConstraint::ExactlyK(k) = c {
                if k > 1 {
                    return Err(FockError::InvalidPattern(format!(
                        "threshold detectors cannot resolve {k} photons in mode {mode}"
                    )));
                }
            }
        }
        if self.constraints.insert(mode, c).is_some() {
            return Err(FockError::InvalidPattern(format!(
                "mode {mode} constrained twice"
            )));
        }
        Ok(())
    }

    pub fn detector(&self) -> DetectorModel {
        self.detector
    }

    pub fn constraints(&self) -> &BTreeMap<usize, ModeConstraint> {
        &self.constraints
    }

    pub fn max_mode(&self) -> Option<usize> {
        self.constraints.keys().next_back().copied()
    }

    pub(crate) fn check_modes(&self, modes: usize) -> FockResult<()> {
        match self.max_mode() {
            Some(m) if m >= modes => Err(FockError::ModeOutOfRange { mode: m, modes }),
            _ => Ok(()),
        }
    }

    /// Whether a photon number `n` in `mode` satisfies the pattern, ideal detectors.
    fn accepts(&self, c: ModeConstraint, n: u32) -> bool {
        match (c, self.detector) {
            (ModeConstraint::Unconstrained, _) => true,
            (ModeConstraint::Zero, _) => n == 0,
            (ModeConstraint::AtLeastOne, _) => n >= 1,
            (ModeConstraint::ExactlyK(0), _) => n == 0,
            (ModeConstraint::ExactlyK(_), DetectorModel::Threshold) => n >= 1,
            (ModeConstraint::ExactlyK(k), DetectorModel::NumberResolving) => n == k,
        }
    }

    /// Whether an occupation matches with ideal detectors; labels are summed.
    pub fn matches(&self, occ: &OccupationState) -> bool {
        self.constraints
            .iter()
            .all(|(&mode, &c)| self.accepts(c, occ.mode_count(mode)))
    }

    /// Probability that a mode holding `n` photons satisfies the constraint when
    /// each photon is detected independently with probability `eta`.
    fn lossy_accept(&self, c: ModeConstraint, n: u32, eta: f64) -> f64 {
        let miss = (1.0 - eta).powi(n as i32);
        match (c, self.detector) {
            (ModeConstraint::Unconstrained, _) => 1.0,
            (ModeConstraint::Zero, _) | (ModeConstraint::ExactlyK(0), _) => miss,
            (ModeConstraint::AtLeastOne, _) | (ModeConstraint::ExactlyK(_), DetectorModel::Threshold) => {
                1.0 - miss
            }
            (ModeConstraint::ExactlyK(k), DetectorModel::NumberResolving) => {
                if k > n {
                    0.0
                } else {
                    binomial(n, k) * eta.powi(k as i32) * (1.0 - eta).powi((n - k) as i32)
                }
            }
        }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

fn require_normalized(state: &PureState) -> FockResult<()> {
    let n2 = state.norm_sqr();
    if (n2 - 1.0).abs() > NORM_TOLERANCE {
        return Err(FockError::NotNormalized(n2));
    }
    Ok(())
}

/// Conditions a normalized state on `pattern` with ideal detectors.
///
/// Returns the renormalized conditional state and the selection probability.
/// A pattern that nothing satisfies yields probability 0 and an empty state.
pub fn post_select(state: &PureState, pattern: &DetectionPattern) -> FockResult<(PureState, f64)> {
    require_normalized(state)?;
    pattern.check_modes(state.mode_count())?;
    let kept = state.filter(|occ| pattern.matches(occ));
    let p = kept.norm_sqr();
    if p == 0.0 {
        return Ok((PureState::empty(state.mode_count()), 0.0));
    }
    Ok((kept.normalize()?, p))
}

/// Probability that `pattern` fires when mode `k` has detection efficiency `efficiency[k]`.
///
/// Loss directly before a detector commutes with the Fock-diagonal detection
/// measurement, so no dilation modes are needed. `state` need not be
/// normalized; the result scales with its norm.
pub fn click_probability(
    state: &PureState,
    pattern: &DetectionPattern,
    efficiency: &[f64],
) -> FockResult<f64> {
    pattern.check_modes(state.mode_count())?;
    if efficiency.len() < state.mode_count() {
        return Err(FockError::Dimension(format!(
            "{} efficiencies for {} modes",
            efficiency.len(),
            state.mode_count()
        )));
    }
    let mut total = 0.0;
    for (occ, amp) in state.terms() {
        let w: f64 = pattern
            .constraints
            .iter()
            .map(|(&mode, &c)| pattern.lossy_accept(c, occ.mode_count(mode), efficiency[mode]))
            .product();
        total += w * amp.norm_sqr();
    }
    Ok(total)
}

/// Photon-number distribution over `modes` (labels marginalized).
///
/// Keys list the counts in the order of `modes`.
pub fn outcome_distribution(
    state: &PureState,
    modes: &[usize],
) -> FockResult<BTreeMap<Vec<u32>, f64>> {
    require_normalized(state)?;
    if let Some(&m) = modes.iter().find(|&&m| m >= state.mode_count()) {
        return Err(FockError::ModeOutOfRange {
            mode: m,
            modes: state.mode_count(),
        });
    }
    let mut dist: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for (occ, amp) in state.terms() {
        let key: Vec<u32> = modes.iter().map(|&m| occ.mode_count(m)).collect();
        *dist.entry(key).or_default() += amp.norm_sqr();
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Slot;
    use crate::C64;

    fn hom_output() -> PureState {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        PureState::from_terms(
            2,
            [
                (OccupationState::new([(Slot::new(0, 0), 2)]), C64::new(0.0, h)),
                (OccupationState::new([(Slot::new(1, 0), 2)]), C64::new(0.0, h)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn bunched_state_never_coincides() {
        let pat = DetectionPattern::threshold([
            (0, ModeConstraint::ExactlyK(1)),
            (1, ModeConstraint::ExactlyK(1)),
        ])
        .unwrap();
        let (s, p) = post_select(&hom_output(), &pat).unwrap();
        assert_eq!(p, 0.0);
        assert!(s.is_empty());
    }

    #[test]
    fn unconstrained_pattern_keeps_state() {
        let (s, p) = post_select(&hom_output(), &DetectionPattern::default()).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert!(s.max_abs_diff(&hom_output()) < 1e-15);
    }

    #[test]
    fn threshold_and_resolving_differ_on_pairs() {
        let thr = DetectionPattern::threshold([(0, ModeConstraint::ExactlyK(1))]).unwrap();
        let pnr = DetectionPattern::number_resolving([(0, ModeConstraint::ExactlyK(1))]).unwrap();
        assert!((post_select(&hom_output(), &thr).unwrap().1 - 0.5).abs() < 1e-15);
        assert_eq!(post_select(&hom_output(), &pnr).unwrap().1, 0.0);
        assert!(DetectionPattern::threshold([(0, ModeConstraint::ExactlyK(2))]).is_err());
    }

    #[test]
    fn duplicate_constraint_rejected() {
        let mut p = DetectionPattern::default();
        p.set(0, ModeConstraint::Zero).unwrap();
        assert!(p.set(0, ModeConstraint::AtLeastOne).is_err());
    }

    #[test]
    fn lossy_clicks_follow_binomial_miss() {
        let pat = DetectionPattern::clicks(&[0], &[]).unwrap();
        let p = click_probability(&hom_output(), &pat, &[0.5, 0.5]).unwrap();
        assert!((p - 0.5 * 0.75).abs() < 1e-15);
        let ideal = click_probability(&hom_output(), &pat, &[1.0, 1.0]).unwrap();
        assert!((ideal - post_select(&hom_output(), &pat).unwrap().1).abs() < 1e-15);
    }

    #[test]
    fn distribution_sums_to_one() {
        let d = outcome_distribution(&hom_output(), &[0, 1]).unwrap();
        assert_eq!(d.len(), 2);
        assert!((d.values().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(outcome_distribution(&hom_output().scale(C64::new(2.0, 0.0)), &[0]).is_err());
    }
}
