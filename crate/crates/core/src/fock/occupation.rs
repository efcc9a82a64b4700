use serde::{Deserialize, Serialize};

/// A photon slot: spatial mode plus discrete spectral label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub mode: usize,
    pub label: usize,
}

impl Slot {
    pub const fn new(mode: usize, label: usize) -> Self {
        Self { mode, label }
    }
}

/// Occupation numbers over slots.
///
/// Entries are sorted by slot, unique, and never zero.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OccupationState {
    entries: Vec<(Slot, u32)>,
}

impl OccupationState {
    pub fn vacuum() -> Self {
        Self::default()
    }

    /// Builds a canonical occupation, merging repeated slots and dropping zeros.
    pub fn new(entries: impl IntoIterator<Item = (Slot, u32)>) -> Self {
        let mut raw: Vec<(Slot, u32)> = entries.into_iter().filter(|e| e.1 > 0).collect();
        raw.sort_by_key(|e| e.0);
        let mut merged: Vec<(Slot, u32)> = Vec::with_capacity(raw.len());
        for (slot, n) in raw {
            match merged.last_mut() {
                Some(last) if last.0 == slot => last.1 += n,
                _ => merged.push((slot, n)),
            }
        }
        Self { entries: merged }
    }

    /// One photon per listed slot (repeats add up).
    pub fn from_slots(slots: impl IntoIterator<Item = Slot>) -> Self {
        Self::new(slots.into_iter().map(|s| (s, 1)))
    }

    /// One photon per listed mode, all carrying spectral label 0.
    pub fn from_modes(modes: &[usize]) -> Self {
        Self::from_slots(modes.iter().map(|&m| Slot::new(m, 0)))
    }

    pub fn entries(&self) -> &[(Slot, u32)] {
        &self.entries
    }

    pub fn is_vacuum(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn photon_count(&self) -> u32 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn count(&self, slot: Slot) -> u32 {
        self.entries
            .binary_search_by_key(&slot, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    /// Photons in a spatial mode summed over spectral labels.
    pub fn mode_count(&self, mode: usize) -> u32 {
        self.entries
            .iter()
            .filter(|e| e.0.mode == mode)
            .map(|e| e.1)
            .sum()
    }

    /// Per-mode photon numbers for modes `0..modes`, labels summed.
    pub fn mode_counts(&self, modes: usize) -> Vec<u32> {
        let mut counts = vec![0; modes];
        for (slot, n) in &self.entries {
            if slot.mode < modes {
                counts[slot.mode] += n;
            }
        }
        counts
    }

    pub fn max_mode(&self) -> Option<usize> {
        self.entries.iter().map(|e| e.0.mode).max()
    }

    /// Product of factorials of the occupation numbers.
    pub fn factorial_product(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, n)| (1..=n).map(f64::from).product::<f64>())
            .product()
    }

    /// Occupation with one more photon in `slot`.
    pub fn with_photon(&self, slot: Slot) -> Self {
        let mut entries = self.entries.clone();
        match entries.binary_search_by_key(&slot, |e| e.0) {
            Ok(i) => entries[i].1 += 1,
            Err(i) => entries.insert(i, (slot, 1)),
        }
        Self { entries }
    }

    /// Slots with multiplicity, in canonical order.
    pub fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        self.entries
            .iter()
            .flat_map(|&(slot, n)| std::iter::repeat(slot).take(n as usize))
    }

    /// Splits into entries whose mode satisfies `pred` and the rest.
    pub(crate) fn partition(&self, pred: impl Fn(usize) -> bool) -> (Vec<(Slot, u32)>, Self) {
        let (inside, outside): (Vec<_>, Vec<_>) =
            self.entries.iter().copied().partition(|e| pred(e.0.mode));
        (inside, Self { entries: outside })
    }
}

impl std::fmt::Display for OccupationState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.entries.is_empty() {
            return write!(f, "|vac>");
        }
        write!(f, "|")?;
        for (i, (slot, n)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}:{}^{}", slot.mode, slot.label, n)?;
        }
        write!(f, ">")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_merges_and_drops_zeros() {
        let a = OccupationState::new([
            (Slot::new(3, 0), 1),
            (Slot::new(1, 2), 0),
            (Slot::new(0, 0), 2),
            (Slot::new(3, 0), 1),
        ]);
        assert_eq!(a.entries(), &[(Slot::new(0, 0), 2), (Slot::new(3, 0), 2)]);
        assert_eq!(a.photon_count(), 4);
        assert_eq!(a.factorial_product(), 4.0);
    }

    #[test]
    fn with_photon_keeps_order() {
        let a = OccupationState::from_modes(&[2]).with_photon(Slot::new(0, 1));
        assert_eq!(a, OccupationState::new([(Slot::new(0, 1), 1), (Slot::new(2, 0), 1)]));
        assert_eq!(a.with_photon(Slot::new(2, 0)).count(Slot::new(2, 0)), 2);
    }

    #[test]
    fn mode_count_sums_labels() {
        let a = OccupationState::from_slots([Slot::new(1, 0), Slot::new(1, 5), Slot::new(2, 0)]);
        assert_eq!(a.mode_count(1), 2);
        assert_eq!(a.mode_counts(3), vec![0, 2, 1]);
    }
}
