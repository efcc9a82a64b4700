use serde::{Deserialize, Serialize};

use super::{ProtocolError, ProtocolResult};
use crate::circuits::ProjectorSetting;
use crate::fock::{PureState, Slot};
use crate::source::SchmidtSpectrum;
use crate::C64;

/// Spatial modes of the four-qubit register: qubit `k` owns modes `2k−2` and `2k−1`.
pub const MODES: usize = 8;
pub const QUBITS: usize = 4;

/// Channel efficiencies measured for the on-chip sources.
pub const PAPER_SIGNAL_EFFICIENCY: f64 = 0.03232;
pub const PAPER_IDLER_EFFICIENCY: f64 = 0.04127;

/// The four microring sources. Each emits its idler into one of qubits 1/4 and
/// its signal into one of qubits 2/3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Ring {
    #[serde(rename = "MRR1")]
    Mrr1,
    #[serde(rename = "MRR2")]
    Mrr2,
    #[serde(rename = "MRR3")]
    Mrr3,
    #[serde(rename = "MRR4")]
    Mrr4,
}

impl Ring {
    pub const ALL: [Ring; 4] = [Ring::Mrr1, Ring::Mrr2, Ring::Mrr3, Ring::Mrr4];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["MRR1", "MRR2", "MRR3", "MRR4"][self.index()]
    }

    pub fn idler_mode(self) -> usize {
        [0, 1, 6, 7][self.index()]
    }

    pub fn signal_mode(self) -> usize {
        [2, 3, 4, 5][self.index()]
    }

    /// Sources sharing a qubit pair: {MRR1, MRR2} feed qubits 1–2, {MRR3, MRR4} feed 3–4.
    pub fn group(self) -> usize {
        self.index() / 2
    }
}

/// Detection efficiencies of the signal and idler channels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Efficiencies {
    pub signal: f64,
    pub idler: f64,
}

impl Efficiencies {
    pub fn ideal() -> Self {
        Self { signal: 1.0, idler: 1.0 }
    }

    pub fn paper() -> Self {
        Self {
            signal: PAPER_SIGNAL_EFFICIENCY,
            idler: PAPER_IDLER_EFFICIENCY,
        }
    }
}

impl Default for Efficiencies {
    fn default() -> Self {
        Self::ideal()
    }
}

/// Chip-to-chip link: pure loss plus a polarization rotation undone by its inverse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interconnect {
    pub loss_db: f64,
    /// Qubits (1-based) that cross the link.
    #[serde(default = "default_link_qubits")]
    pub qubits: Vec<usize>,
    /// Rotation applied on entry, as the matrix of a single-qubit stage.
    #[serde(default = "default_link_rotation")]
    pub rotation: ProjectorSetting,
}

fn default_link_qubits() -> Vec<usize> {
    vec![4]
}

fn default_link_rotation() -> ProjectorSetting {
    ProjectorSetting::new(1.1, 0.4)
}

impl Interconnect {
    pub fn new(loss_db: f64) -> Self {
        Self {
            loss_db,
            qubits: default_link_qubits(),
            rotation: default_link_rotation(),
        }
    }

    pub fn transmission(&self) -> f64 {
        10f64.powf(-self.loss_db / 10.0)
    }
}

/// Imperfections layered on the ideal circuit. The default is noiseless.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseKnobs {
    /// Mean photon number per unit pump share, one per ring.
    pub nbar: [f64; 4],
    /// Schmidt spectrum of each ring's pairs.
    pub schmidt: [SchmidtSpectrum; 4],
    pub interconnect: Option<Interconnect>,
    /// Extra distinguishability `δ` of the signal photons: pairwise HOM overlap `1 − δ`.
    pub distinguishability: f64,
    pub efficiency: Efficiencies,
}

impl Default for NoiseKnobs {
    fn default() -> Self {
        Self {
            nbar: [0.0; 4],
            schmidt: std::array::from_fn(|_| SchmidtSpectrum::pure()),
            interconnect: None,
            distinguishability: 0.0,
            efficiency: Efficiencies::ideal(),
        }
    }
}

impl NoiseKnobs {
    pub fn ideal() -> Self {
        Self::default()
    }

    /// Paper-like operating point: `n̄` on every ring, purity-0.92 pairs and measured efficiencies.
    pub fn paper(nbar: f64) -> Self {
        let spec = SchmidtSpectrum::two_mode_with_purity(0.92).expect("valid purity");
        Self {
            nbar: [nbar; 4],
            schmidt: std::array::from_fn(|_| spec.clone()),
            interconnect: None,
            distinguishability: 0.0,
            efficiency: Efficiencies::paper(),
        }
    }

    pub fn validate(&self) -> ProtocolResult<()> {
        let bad = |m: String| Err(ProtocolError::OutOfRange(m));
        if let Some(n) = self.nbar.iter().find(|n| !(n.is_finite() && (0.0..=0.5).contains(*n))) {
            return bad(format!("n̄ = {n} outside [0, 0.5]"));
        }
        if !(0.0..=1.0).contains(&self.distinguishability) {
            return bad(format!("distinguishability {} outside [0, 1]", self.distinguishability));
        }
        for e in [self.efficiency.signal, self.efficiency.idler] {
            if !(e > 0.0 && e <= 1.0) {
                return bad(format!("efficiency {e} outside (0, 1]"));
            }
        }
        if let Some(link) = &self.interconnect {
            if !(link.loss_db.is_finite() && link.loss_db >= 0.0) {
                return bad(format!("interconnect loss {} dB", link.loss_db));
            }
            if link.qubits.iter().any(|q| !(1..=QUBITS).contains(q)) {
                return bad(format!("interconnect qubits {:?}", link.qubits));
            }
        }
        Ok(())
    }

    /// Per-mode detection efficiency of the register.
    pub fn mode_efficiencies(&self) -> Vec<f64> {
        let mut eta = vec![0.0; MODES];
        for r in Ring::ALL {
            eta[r.signal_mode()] = self.efficiency.signal;
            eta[r.idler_mode()] = self.efficiency.idler;
        }
        if let Some(link) = &self.interconnect {
            let t = link.transmission();
            for &q in &link.qubits {
                eta[2 * q - 2] *= t;
                eta[2 * q - 1] *= t;
            }
        }
        eta
    }

    pub fn is_ideal(&self) -> bool {
        *self == Self::ideal()
    }
}

/// One pair source wired to a signal and an idler mode.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSource {
    pub signal_mode: usize,
    pub idler_mode: usize,
    /// Complex pump amplitude; zero switches the source off.
    pub weight: C64,
    pub nbar: f64,
    pub spectrum: SchmidtSpectrum,
    /// Distinguishability `δ` of this source's signal photon.
    pub distinguishability: f64,
}

/// Pair-creation monomials of one source. Signal photons of every source
/// share labels `0..K`; with `δ > 0` a signal also gets a private label
/// `K + s·K + j`, splitting amplitude so two sources overlap by `√(1−δ)`.
fn pair_monomials(src: &PairSource, s: usize, k: usize, scale: C64) -> Vec<(Slot, Slot, C64)> {
    let matched = (1.0 - src.distinguishability).powf(0.25);
    let private = (1.0 - (1.0 - src.distinguishability).sqrt()).max(0.0).sqrt();
    let mut out = Vec::new();
    for (j, &lam) in src.spectrum.coefficients().iter().enumerate() {
        let idler = Slot::new(src.idler_mode, j);
        if src.distinguishability == 0.0 {
            out.push((Slot::new(src.signal_mode, j), idler, scale * lam));
        } else {
            out.push((Slot::new(src.signal_mode, j), idler, scale * lam * matched));
            out.push((Slot::new(src.signal_mode, k + s * k + j), idler, scale * lam * private));
        }
    }
    out
}

/// Truncated expansion of the joint squeezed state of `sources` around `pairs` pairs.
///
/// With pump weights rescaled so that `Σ|w|² = pairs` and `g_s = √(n̄_s/(1+n̄_s))`,
/// the term with `k_s` pairs from source `s` has amplitude
/// `Π_s (w_s g_s P_s)^{k_s} / k_s!`, reported relative to `ε^pairs` with `ε = max g_s`.
/// Orders below `pairs` cannot fire the required detectors and are dropped; one
/// extra pair is kept, with at most two pairs per source. When every `n̄` is zero
/// only the leading order remains.
pub fn expand_sources(sources: &[PairSource], modes: usize, pairs: usize) -> ProtocolResult<PureState> {
    let active: Vec<(usize, &PairSource)> = sources.iter().enumerate().filter(|(_, s)| s.weight.norm() > 0.0).collect();
    if active.is_empty() {
        return Err(ProtocolError::InvalidSpec("no active source".into()));
    }
    for (_, s) in &active {
        if s.signal_mode >= modes || s.idler_mode >= modes || s.signal_mode == s.idler_mode {
            return Err(ProtocolError::InvalidSpec(format!(
                "source modes ({}, {}) in a {modes}-mode register",
                s.signal_mode, s.idler_mode
            )));
        }
        if !(0.0..=1.0).contains(&s.distinguishability) || !(s.nbar >= 0.0 && s.nbar.is_finite()) {
            return Err(ProtocolError::OutOfRange("source noise parameters".into()));
        }
    }
    let norm2: f64 = active.iter().map(|(_, s)| s.weight.norm_sqr()).sum();
    let rescale = (pairs as f64 / norm2).sqrt();
    let g: Vec<f64> = active.iter().map(|(_, s)| (s.nbar / (1.0 + s.nbar)).sqrt()).collect();
    let eps = g.iter().copied().fold(0.0, f64::max);
    let k_labels = active.iter().map(|(_, s)| s.spectrum.len()).max().unwrap_or(1);
    let ops: Vec<Vec<(Slot, Slot, C64)>> = active
        .iter()
        .zip(&g)
        .map(|(&(idx, s), &gs)| {
            let r = if eps > 0.0 { gs / eps } else { 1.0 };
            pair_monomials(s, idx, k_labels, s.weight * rescale * r)
        })
        .collect();
    let max_total = if eps > 0.0 { pairs + 1 } else { pairs };
    let mut total = PureState::empty(modes);
    let mut config = vec![0usize; active.len()];
    loop {
        let n: usize = config.iter().sum();
        if n >= pairs && n <= max_total {
            let mut st = PureState::vacuum(modes);
            for (s, &k) in config.iter().enumerate() {
                for _ in 0..k {
                    st = st.create_pairs(&ops[s])?;
                }
                if k == 2 {
                    st = st.scale(C64::new(0.5, 0.0));
                }
            }
            if n > pairs {
                st = st.scale(C64::new(eps.powi((n - pairs) as i32), 0.0));
            }
            total = total.add(&st)?;
        }
        // Odometer over k_s ∈ {0, 1, 2}.
        let mut i = 0;
        while i < config.len() {
            config[i] += 1;
            if config[i] <= 2 {
                break;
            }
            config[i] = 0;
            i += 1;
        }
        if i == config.len() {
            break;
        }
    }
    if total.is_empty() {
        return Err(ProtocolError::ZeroSuccess);
    }
    Ok(total)
}

/// Pair sources of the chip for the given pump weights and noise.
pub(crate) fn chip_sources(pump: &[C64; 4], noise: &NoiseKnobs) -> Vec<PairSource> {
    Ring::ALL
        .iter()
        .map(|&r| PairSource {
            signal_mode: r.signal_mode(),
            idler_mode: r.idler_mode(),
            weight: pump[r.index()],
            nbar: noise.nbar[r.index()],
            spectrum: noise.schmidt[r.index()].clone(),
            distinguishability: noise.distinguishability,
        })
        .collect()
}

/// Photon count per mode of each basis term.
#[cfg(test)]
fn mode_histogram(state: &PureState) -> std::collections::BTreeMap<Vec<u32>, f64> {
    let mut out = std::collections::BTreeMap::new();
    for (occ, a) in state.terms() {
        *out.entry(occ.mode_counts(state.mode_count())).or_insert(0.0) += a.norm_sqr();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src(sig: usize, idl: usize, w: f64, nbar: f64) -> PairSource {
        PairSource {
            signal_mode: sig,
            idler_mode: idl,
            weight: C64::new(w, 0.0),
            nbar,
            spectrum: SchmidtSpectrum::pure(),
            distinguishability: 0.0,
        }
    }

    #[test]
    fn ideal_expansion_is_leading_order_only() {
        let st = expand_sources(&[src(0, 1, 1.0, 0.0), src(2, 3, 1.0, 0.0)], 4, 1).unwrap();
        assert!(st.photon_numbers().iter().all(|&n| n == 2));
        // Σ|w|² rescaled to one pair: each source carries 1/2.
        assert!((st.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_expansion_adds_one_extra_pair() {
        let st = expand_sources(&[src(0, 1, 1.0, 0.05)], 2, 1).unwrap();
        let hist = mode_histogram(&st);
        let nbar: f64 = 0.05;
        let lam = nbar / (1.0 + nbar);
        // |1,1⟩ weight 1, |2,2⟩ weight λ (two pairs from one source, (a†b†)²/2 has norm 1).
        assert!((hist[&vec![1, 1]] - 1.0).abs() < 1e-12);
        assert!((hist[&vec![2, 2]] - lam).abs() < 1e-12);
        assert_eq!(hist.len(), 2);
    }

    #[test]
    fn private_labels_split_signal_amplitude() {
        let mut s = src(0, 1, 1.0, 0.0);
        s.distinguishability = 0.36;
        let st = expand_sources(&[s], 2, 1).unwrap();
        let amps: Vec<f64> = st.terms().map(|(_, a)| a.norm_sqr()).collect();
        assert_eq!(amps.len(), 2);
        assert!((amps[0] - 0.8).abs() < 1e-12 && (amps[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn knob_validation() {
        let mut k = NoiseKnobs::ideal();
        assert!(k.validate().is_ok() && k.is_ideal());
        k.distinguishability = 1.5;
        assert!(k.validate().is_err());
        let mut k = NoiseKnobs::paper(0.05);
        k.interconnect = Some(Interconnect::new(3.0));
        let eta = k.mode_efficiencies();
        assert!((eta[6] / PAPER_IDLER_EFFICIENCY - 0.501).abs() < 1e-3);
        assert_eq!(eta[2], PAPER_SIGNAL_EFFICIENCY);
    }
}
