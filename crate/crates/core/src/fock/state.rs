use std::collections::{BTreeMap, HashMap};

use super::{FockError, FockResult, OccupationState, Slot};
use crate::C64;

/// Amplitudes with modulus below this are dropped after every operation.
pub const PRUNE_THRESHOLD: f64 = 1e-14;

/// Sparse superposition of occupation states over `mode_count` spatial modes.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    terms: BTreeMap<OccupationState, C64>,
    mode_count: usize,
}

impl PureState {
    /// The vacuum with amplitude one.
    pub fn vacuum(mode_count: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(OccupationState::vacuum(), C64::new(1.0, 0.0));
        Self { terms, mode_count }
    }

    /// The zero vector; returned by post-selection when nothing matches.
    pub fn empty(mode_count: usize) -> Self {
        Self {
            terms: BTreeMap::new(),
            mode_count,
        }
    }

    /// Sums amplitudes of repeated occupations, prunes small ones and checks modes.
    pub fn from_terms(
        mode_count: usize,
        terms: impl IntoIterator<Item = (OccupationState, C64)>,
    ) -> FockResult<Self> {
        let mut acc: BTreeMap<OccupationState, C64> = BTreeMap::new();
        for (occ, amp) in terms {
            if let Some(mode) = occ.max_mode().filter(|&m| m >= mode_count) {
                return Err(FockError::ModeOutOfRange {
                    mode,
                    modes: mode_count,
                });
            }
            *acc.entry(occ).or_default() += amp;
        }
        acc.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
        Ok(Self {
            terms: acc,
            mode_count,
        })
    }

    /// A single basis state with amplitude one.
    pub fn basis(mode_count: usize, occ: OccupationState) -> FockResult<Self> {
        Self::from_terms(mode_count, [(occ, C64::new(1.0, 0.0))])
    }

    pub(crate) fn from_map_unchecked(mode_count: usize, map: HashMap<OccupationState, C64>) -> Self {
        let terms = map
            .into_iter()
            .filter(|(_, a)| a.norm() >= PRUNE_THRESHOLD)
            .collect();
        Self { terms, mode_count }
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn terms(&self) -> impl ExactSizeIterator<Item = (&OccupationState, &C64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn amplitude(&self, occ: &OccupationState) -> C64 {
        self.terms.get(occ).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    /// Rescales to unit norm.
    pub fn normalize(&self) -> FockResult<Self> {
        let n2 = self.norm_sqr();
        if n2 <= 0.0 || !n2.is_finite() {
            return Err(FockError::ZeroNorm);
        }
        Ok(self.scale(C64::new(1.0 / n2.sqrt(), 0.0)))
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    pub fn scale(&self, factor: C64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(o, a)| (o.clone(), a * factor))
            .filter(|(_, a)| a.norm() >= PRUNE_THRESHOLD)
            .collect();
        Self {
            terms,
            mode_count: self.mode_count,
        }
    }

    /// Termwise sum of two states on the same register.
    pub fn add(&self, other: &Self) -> FockResult<Self> {
        if self.mode_count != other.mode_count {
            return Err(FockError::Dimension(format!(
                "cannot add states on {} and {} modes",
                self.mode_count, other.mode_count
            )));
        }
        Self::from_terms(
            self.mode_count,
            self.terms
                .iter()
                .chain(other.terms.iter())
                .map(|(o, a)| (o.clone(), *a)),
        )
    }

    /// Inner product ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> C64 {
        self.terms
            .iter()
            .map(|(o, a)| a.conj() * other.amplitude(o))
            .sum()
    }

    /// Applies the creation operator `coef · a†(slot)`.
    pub fn create(&self, slot: Slot, coef: C64) -> FockResult<Self> {
        if slot.mode >= self.mode_count {
            return Err(FockError::ModeOutOfRange {
                mode: slot.mode,
                modes: self.mode_count,
            });
        }
        let mut out: HashMap<OccupationState, C64> = HashMap::with_capacity(self.terms.len());
        for (occ, amp) in &self.terms {
            let n = occ.count(slot);
            *out.entry(occ.with_photon(slot)).or_default() += amp * coef * f64::from(n + 1).sqrt();
        }
        Ok(Self::from_map_unchecked(self.mode_count, out))
    }

    /// Applies `Σ_k c_k a†(x_k) a†(y_k)`, a sum of pair-creation monomials.
    pub fn create_pairs(&self, pairs: &[(Slot, Slot, C64)]) -> FockResult<Self> {
        let mut out: HashMap<OccupationState, C64> = HashMap::new();
        for &(x, y, c) in pairs {
            let partial = self.create(y, c)?.create(x, C64::new(1.0, 0.0))?;
            for (occ, amp) in partial.terms {
                *out.entry(occ).or_default() += amp;
            }
        }
        Ok(Self::from_map_unchecked(self.mode_count, out))
    }

    /// Product state on disjoint spatial modes.
    pub fn tensor(&self, other: &Self) -> FockResult<Self> {
        let used = |s: &Self| {
            let mut modes: Vec<usize> = s
                .terms
                .keys()
                .flat_map(|o| o.entries().iter().map(|e| e.0.mode))
                .collect();
            modes.sort_unstable();
            modes.dedup();
            modes
        };
        let mine = used(self);
        if let Some(&m) = used(other).iter().find(|m| mine.binary_search(m).is_ok()) {
            return Err(FockError::Overlap(m));
        }
        let modes = self.mode_count.max(other.mode_count);
        let mut out: HashMap<OccupationState, C64> = HashMap::new();
        for (oa, aa) in &self.terms {
            for (ob, ab) in &other.terms {
                let occ = OccupationState::new(oa.entries().iter().chain(ob.entries()).copied());
                *out.entry(occ).or_default() += aa * ab;
            }
        }
        Ok(Self::from_map_unchecked(modes, out))
    }

    /// Keeps only terms satisfying `pred`.
    pub fn filter(&self, pred: impl Fn(&OccupationState) -> bool) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(o, _)| pred(o))
                .map(|(o, a)| (o.clone(), *a))
                .collect(),
            mode_count: self.mode_count,
        }
    }

    /// Relabels every slot through `f`, merging terms that collide.
    pub fn map_slots(&self, f: impl Fn(Slot) -> Slot) -> FockResult<Self> {
        let terms = self.terms.iter().map(|(o, a)| {
            (
                OccupationState::new(o.entries().iter().map(|&(s, n)| (f(s), n))),
                *a,
            )
        });
        Self::from_terms(self.mode_count, terms)
    }

    /// Largest termwise amplitude difference, ignoring global phase only if asked.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let keys: std::collections::BTreeSet<&OccupationState> =
            self.terms.keys().chain(other.terms.keys()).collect();
        keys.into_iter()
            .map(|k| (self.amplitude(k) - other.amplitude(k)).norm())
            .fold(0.0, f64::max)
    }

    /// Photon-number sectors present in the state.
    pub fn photon_numbers(&self) -> Vec<u32> {
        let mut n: Vec<u32> = self.terms.keys().map(|o| o.photon_count()).collect();
        n.sort_unstable();
        n.dedup();
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn repeated_creation_gives_factorial_normalization() {
        let s = PureState::vacuum(2)
            .create(Slot::new(0, 0), c(1.0))
            .unwrap()
            .create(Slot::new(0, 0), c(1.0))
            .unwrap();
        let occ = OccupationState::new([(Slot::new(0, 0), 2)]);
        assert!((s.amplitude(&occ).re - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn tensor_of_single_photons() {
        let a = PureState::basis(2, OccupationState::from_modes(&[0])).unwrap();
        let b = PureState::basis(2, OccupationState::from_modes(&[1])).unwrap();
        let ab = a.tensor(&b).unwrap();
        assert_eq!(ab.len(), 1);
        assert_eq!(ab.amplitude(&OccupationState::from_modes(&[0, 1])), c(1.0));
        assert!(a.tensor(&a).is_err());
    }

    #[test]
    fn tensor_of_bell_pairs_has_four_equal_terms() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = |m: usize| {
            PureState::from_terms(
                8,
                [
                    (OccupationState::from_modes(&[m, m + 2]), c(h)),
                    (OccupationState::from_modes(&[m + 1, m + 3]), c(h)),
                ],
            )
            .unwrap()
        };
        let prod = bell(0).tensor(&bell(4)).unwrap();
        assert_eq!(prod.len(), 4);
        for (_, a) in prod.terms() {
            assert!((a.re - 0.5).abs() < 1e-15);
        }
        assert!((prod.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pruning_drops_cancelled_terms() {
        let occ = OccupationState::from_modes(&[0]);
        let s = PureState::from_terms(1, [(occ.clone(), c(0.5)), (occ, c(-0.5))]).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn out_of_range_mode_rejected() {
        assert!(PureState::basis(2, OccupationState::from_modes(&[2])).is_err());
    }
}
