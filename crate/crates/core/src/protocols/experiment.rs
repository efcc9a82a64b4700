use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution as _};
use serde::{Deserialize, Serialize};

use super::chip::{chip_sources, expand_sources, NoiseKnobs, MODES, QUBITS};
use super::{ProtocolError, ProtocolResult};
use crate::circuits::{measure_stage, o_bell_unitary, o_fusion_unitary, prep_stage, ModeOperation, ProjectorSetting, QubitLayout};
use crate::estimation::{bitstrings, Distribution};
use crate::fock::{click_probability, DetectionPattern, ModeConstraint, PureState};
use crate::C64;

/// Two-qubit operator acting on qubits 2 and 3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorSetting {
    Off,
    Bell,
    Fusion,
}

/// A qubit measured in a fixed setting whose outcome is part of the herald.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub qubit: usize,
    pub setting: ProjectorSetting,
    pub outcome: u8,
}

/// Conditioning event beyond the read-out qubits: fixed detector clicks and
/// fixed projective outcomes. Every other register mode must stay dark.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Herald {
    pub clicks: Vec<usize>,
    pub projections: Vec<Projection>,
}

/// A full chip configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    /// Complex pump amplitude per ring; zero leaves the ring off. Rescaled so
    /// each detected pair carries unit pump share.
    pub pump: [C64; 4],
    pub operator: OperatorSetting,
    pub prep: [Option<ProjectorSetting>; 4],
    pub herald: Herald,
    /// Qubits (1-based, ascending) whose outcomes form the tallied bitstring.
    pub measured: Vec<usize>,
    pub noise: NoiseKnobs,
    pub shots: u64,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> ProtocolResult<()> {
        self.noise.validate()?;
        if self.pump.iter().all(|w| w.norm() == 0.0) || self.pump.iter().any(|w| !(w.re.is_finite() && w.im.is_finite())) {
            return Err(ProtocolError::InvalidSpec("pump weights must be finite and not all zero".into()));
        }
        let mut seen = [false; QUBITS + 1];
        let proj = self.herald.projections.iter().map(|p| p.qubit);
        for q in self.measured.iter().copied().chain(proj) {
            if !(1..=QUBITS).contains(&q) || std::mem::replace(&mut seen[q], true) {
                return Err(ProtocolError::InvalidSpec(format!("qubit {q} is out of range or read twice")));
            }
        }
        if !self.measured.windows(2).all(|w| w[0] < w[1]) {
            return Err(ProtocolError::InvalidSpec("measured qubits must be ascending".into()));
        }
        for &m in &self.herald.clicks {
            if m >= MODES || seen[m / 2 + 1] {
                return Err(ProtocolError::InvalidSpec(format!("herald mode {m} overlaps a read-out qubit")));
            }
        }
        if self.herald.projections.iter().any(|p| p.outcome > 1) {
            return Err(ProtocolError::InvalidSpec("projection outcome must be 0 or 1".into()));
        }
        if self.detected_photons() % 2 != 0 {
            return Err(ProtocolError::InvalidSpec("odd number of detected photons".into()));
        }
        Ok(())
    }

    fn detected_photons(&self) -> usize {
        self.herald.clicks.len() + self.herald.projections.len() + self.measured.len()
    }

    /// Pairs needed for one coincidence.
    pub fn pairs(&self) -> usize {
        self.detected_photons() / 2
    }

    /// Qubits that receive a photon from an active ring.
    fn fed_qubits(&self) -> Vec<usize> {
        let mut q: Vec<usize> = chip_sources(&self.pump, &self.noise)
            .iter()
            .filter(|s| s.weight.norm() > 0.0)
            .flat_map(|s| [s.signal_mode / 2 + 1, s.idler_mode / 2 + 1])
            .collect();
        q.sort_unstable();
        q.dedup();
        q
    }
}

/// Experiment state after the sources, preparation and two-qubit operator,
/// ready for any read-out setting.
#[derive(Clone, Debug)]
pub struct Prepared {
    spec: ExperimentSpec,
    layout: QubitLayout,
    state: PureState,
    efficiency: Vec<f64>,
    reference: f64,
}

/// Probabilities of one read-out setting, relative to the input-stage rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceTally {
    pub settings: Vec<ProjectorSetting>,
    /// Sums to the post-selection success probability.
    pub probabilities: Distribution,
    /// Present when shots were requested.
    pub counts: Option<BTreeMap<String, u64>>,
}

impl CoincidenceTally {
    pub fn success_probability(&self) -> f64 {
        self.probabilities.values().sum()
    }
}

fn link_rotation(spec: &ExperimentSpec, layout: &QubitLayout, inverse: bool) -> ProtocolResult<Option<ModeOperation>> {
    let Some(link) = &spec.noise.interconnect else { return Ok(None) };
    let mut settings = vec![None; QUBITS];
    for &q in &link.qubits {
        settings[q - 1] = Some(link.rotation);
    }
    let op = measure_stage(layout, &settings)?;
    Ok(Some(if inverse {
        ModeOperation::new(op.transform.adjoint(), op.modes)
    } else {
        op
    }))
}

impl Prepared {
    pub fn new(spec: &ExperimentSpec) -> ProtocolResult<Self> {
        spec.validate()?;
        let layout = QubitLayout::standard(QUBITS);
        let sources = chip_sources(&spec.pump, &spec.noise);
        let mut state = expand_sources(&sources, MODES, spec.pairs())?;
        let efficiency = spec.noise.mode_efficiencies();
        let reference = one_per_qubit_probability(&state, &layout, &spec.fed_qubits(), &efficiency)?;
        if reference <= 0.0 {
            return Err(ProtocolError::ZeroSuccess);
        }
        if let Some(r) = link_rotation(spec, &layout, false)? {
            state = r.apply(&state)?;
        }
        if spec.prep.iter().any(Option::is_some) {
            state = prep_stage(&layout, &spec.prep)?.apply(&state)?;
        }
        match spec.operator {
            OperatorSetting::Off => {}
            OperatorSetting::Bell => state = o_bell_unitary(&layout)?.apply(&state)?,
            OperatorSetting::Fusion => state = o_fusion_unitary(&layout)?.apply(&state)?,
        }
        if let Some(r) = link_rotation(spec, &layout, true)? {
            state = r.apply(&state)?;
        }
        Ok(Self {
            spec: spec.clone(),
            layout,
            state,
            efficiency,
            reference,
        })
    }

    pub fn spec(&self) -> &ExperimentSpec {
        &self.spec
    }

    /// Probability that every fed qubit holds one photon before the operator acts.
    pub fn reference_probability(&self) -> f64 {
        self.reference
    }

    /// Applies the read-out stage; `None` leaves the read-out qubits unmeasured.
    fn measured_state(&self, settings: Option<&[ProjectorSetting]>) -> ProtocolResult<PureState> {
        let mut stage = vec![None; QUBITS];
        if let Some(settings) = settings {
            self.check_settings(settings)?;
            for (&q, s) in self.spec.measured.iter().zip(settings) {
                stage[q - 1] = Some(*s);
            }
        }
        for p in &self.spec.herald.projections {
            stage[p.qubit - 1] = Some(p.setting);
        }
        if stage.iter().all(Option::is_none) {
            return Ok(self.state.clone());
        }
        Ok(measure_stage(&self.layout, &stage)?.apply(&self.state)?)
    }

    fn check_settings(&self, settings: &[ProjectorSetting]) -> ProtocolResult<()> {
        if settings.len() != self.spec.measured.len() {
            return Err(ProtocolError::InvalidSpec(format!(
                "{} settings for {} read-out qubits",
                settings.len(),
                self.spec.measured.len()
            )));
        }
        Ok(())
    }

    fn pattern(&self, bits: &str) -> ProtocolResult<DetectionPattern> {
        let mut clicks: Vec<usize> = self.spec.herald.clicks.clone();
        for p in &self.spec.herald.projections {
            let (r0, r1) = self.layout.rails(p.qubit)?;
            clicks.push(if p.outcome == 0 { r0 } else { r1 });
        }
        for (&q, b) in self.spec.measured.iter().zip(bits.bytes()) {
            let (r0, r1) = self.layout.rails(q)?;
            clicks.push(if b == b'0' { r0 } else { r1 });
        }
        let dark: Vec<usize> = (0..MODES).filter(|m| !clicks.contains(m)).collect();
        Ok(DetectionPattern::clicks(&clicks, &dark)?)
    }

    /// Outcome probabilities for one read-out setting, divided by the reference probability.
    pub fn tally(&self, settings: &[ProjectorSetting]) -> ProtocolResult<CoincidenceTally> {
        let st = self.measured_state(Some(settings))?;
        let mut probabilities = Distribution::new();
        for bits in bitstrings(self.spec.measured.len()) {
            let p = click_probability(&st, &self.pattern(&bits)?, &self.efficiency)? / self.reference;
            probabilities.insert(bits, p);
        }
        Ok(CoincidenceTally {
            settings: settings.to_vec(),
            probabilities,
            counts: None,
        })
    }

    /// Tallies for a list of settings; setting `i` samples its shots from stream `i` of the seed.
    pub fn tallies(&self, settings: &[Vec<ProjectorSetting>]) -> ProtocolResult<Vec<CoincidenceTally>> {
        settings
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut t = self.tally(s)?;
                if self.spec.shots > 0 {
                    t.counts = Some(sample_shots(&t.probabilities, self.spec.shots, self.spec.seed, i as u64));
                }
                Ok(t)
            })
            .collect()
    }

    /// Heralded state of the unmeasured read-out qubits under ideal detection, as a qubit vector.
    pub fn ideal_qubit_state(&self) -> ProtocolResult<DVector<C64>> {
        qubit_vector(&self.ideal_heralded_state()?, &self.spec.measured)
    }

    /// Normalized Fock state left after an ideal herald with one photon per read-out qubit.
    pub fn ideal_heralded_state(&self) -> ProtocolResult<PureState> {
        let st = self.measured_state(None)?;
        let mut pattern = DetectionPattern::clicks(&self.spec.herald.clicks, &[])?;
        for p in &self.spec.herald.projections {
            let (r0, r1) = self.layout.rails(p.qubit)?;
            let (on, off) = if p.outcome == 0 { (r0, r1) } else { (r1, r0) };
            pattern.set(on, ModeConstraint::ExactlyK(1))?;
            pattern.set(off, ModeConstraint::Zero)?;
        }
        let keep = st.filter(|occ| {
            pattern.matches(occ)
                && self.spec.measured.iter().all(|&q| occ.mode_count(2 * q - 2) + occ.mode_count(2 * q - 1) == 1)
                && (0..MODES).all(|m| {
                    let q = m / 2 + 1;
                    self.spec.measured.contains(&q)
                        || pattern.constraints().contains_key(&m)
                        || occ.mode_count(m) == 0
                })
        });
        let norm = keep.norm_sqr();
        if norm == 0.0 {
            return Err(ProtocolError::ZeroSuccess);
        }
        Ok(keep.scale(C64::new(1.0 / norm.sqrt(), 0.0)))
    }

    /// Success probability of the herald under ideal detection, ignoring efficiency.
    pub fn ideal_success(&self) -> ProtocolResult<f64> {
        let eta = vec![1.0; MODES];
        let st = self.measured_state(Some(&vec![ProjectorSetting::sigma_z(); self.spec.measured.len()]))?;
        let mut total = 0.0;
        for bits in bitstrings(self.spec.measured.len()) {
            total += click_probability(&st, &self.pattern(&bits)?, &eta)?;
        }
        let reference = one_per_qubit_probability(
            &expand_sources(&chip_sources(&self.spec.pump, &self.spec.noise), MODES, self.spec.pairs())?,
            &self.layout,
            &self.spec.fed_qubits(),
            &eta,
        )?;
        Ok(total / reference)
    }
}

fn one_per_qubit_probability(
    state: &PureState,
    layout: &QubitLayout,
    qubits: &[usize],
    efficiency: &[f64],
) -> ProtocolResult<f64> {
    let mut total = 0.0;
    for bits in bitstrings(qubits.len()) {
        let mut clicks = Vec::new();
        for (&q, b) in qubits.iter().zip(bits.bytes()) {
            let (r0, r1) = layout.rails(q)?;
            clicks.push(if b == b'0' { r0 } else { r1 });
        }
        let dark: Vec<usize> = (0..state.mode_count()).filter(|m| !clicks.contains(m)).collect();
        total += click_probability(state, &DetectionPattern::clicks(&clicks, &dark)?, efficiency)?;
    }
    Ok(total)
}

/// Dual-rail amplitudes of `qubits` (ascending, qubit order = bit order) from a
/// Fock state holding exactly one photon per listed qubit, all with label 0.
pub fn qubit_vector(state: &PureState, qubits: &[usize]) -> ProtocolResult<DVector<C64>> {
    let n = qubits.len();
    let mut v = DVector::zeros(1 << n);
    for (occ, &a) in state.terms() {
        let mut idx = 0usize;
        for &q in qubits {
            let (z, o) = (occ.mode_count(2 * q - 2), occ.mode_count(2 * q - 1));
            if z + o != 1 {
                return Err(ProtocolError::InvalidSpec(format!("qubit {q} does not hold one photon")));
            }
            idx = (idx << 1) | usize::from(o == 1);
        }
        if occ.entries().iter().any(|(s, _)| s.label != 0) {
            return Err(ProtocolError::InvalidSpec("photons carry spectral labels".into()));
        }
        v[idx] += a;
    }
    Ok(v)
}

/// Multinomial draw of `shots` trials over the outcomes plus a failure bucket
/// holding the missing probability, from ChaCha stream `stream` of `seed`.
pub fn sample_shots(probabilities: &Distribution, shots: u64, seed: u64, stream: u64) -> BTreeMap<String, u64> {
    if shots == 0 {
        return BTreeMap::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut remaining = shots;
    let mut mass = 1.0f64;
    let mut out = BTreeMap::new();
    for (k, &p) in probabilities {
        let p = p.max(0.0);
        let draw = if remaining == 0 || mass <= 0.0 {
            0
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            Binomial::new(remaining, q).map(|b| b.sample(&mut rng)).unwrap_or(0)
        };
        out.insert(k.clone(), draw);
        remaining -= draw;
        mass -= p;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shots_are_deterministic_and_bounded() {
        let p: Distribution = [("0".to_string(), 0.2), ("1".to_string(), 0.3)].into_iter().collect();
        assert!(sample_shots(&p, 0, 1, 0).is_empty());
        let a = sample_shots(&p, 1_000_000, 42, 0);
        assert_eq!(a, sample_shots(&p, 1_000_000, 42, 0));
        assert_ne!(a, sample_shots(&p, 1_000_000, 42, 1));
        for (k, &pk) in &p {
            let n = 1e6;
            let sd = (n * pk * (1.0 - pk)).sqrt();
            assert!((a[k] as f64 - n * pk).abs() < 5.0 * sd);
        }
    }
}
