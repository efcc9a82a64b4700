use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::chip::{NoiseKnobs, Ring};
use super::experiment::{CoincidenceTally, ExperimentSpec, Herald, OperatorSetting, Prepared, Projection};
use super::{ProtocolError, ProtocolResult};
use crate::circuits::ProjectorSetting;
use crate::estimation::{
    bell_state, fidelity_lower_bound_two_basis, gme_concurrence_bound, ghz_fidelity_witness, ghz_state, linear_inversion,
    mle_tomography, pauli_settings, qubit_ket, BellState, DensityMatrix, MeasurementRecord, MleOptions, WitnessReport,
};
use crate::fock::PureState;
use crate::C64;

const ON: C64 = C64::new(1.0, 0.0);
const OFF: C64 = C64::new(0.0, 0.0);

fn spec(name: &str, pump: [C64; 4], operator: OperatorSetting, noise: &NoiseKnobs) -> ExperimentSpec {
    ExperimentSpec {
        name: name.to_string(),
        pump,
        operator,
        prep: [None; 4],
        herald: Herald::default(),
        measured: Vec::new(),
        noise: noise.clone(),
        shots: 0,
        seed: 0,
    }
}

/// Post-selected `(|00⟩ + e^{iφ}|11⟩)/√2` from two rings feeding the same qubit pair.
pub fn prepare_bell(a: Ring, b: Ring, relative_phase: f64) -> ProtocolResult<PureState> {
    if a == b {
        return Err(ProtocolError::SameSource(a.name().into()));
    }
    if a.group() != b.group() {
        return Err(ProtocolError::InvalidSpec(format!("{} and {} feed different qubit pairs", a.name(), b.name())));
    }
    let mut pump = [OFF; 4];
    let (first, second) = if a < b { (a, b) } else { (b, a) };
    pump[first.index()] = ON;
    pump[second.index()] = C64::from_polar(1.0, relative_phase);
    let mut s = spec("bell", pump, OperatorSetting::Off, &NoiseKnobs::ideal());
    s.measured = if a.group() == 0 { vec![1, 2] } else { vec![3, 4] };
    Prepared::new(&s)?.ideal_heralded_state()
}

/// Which Bell-analyzer outcome heralds teleportation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BellProjection {
    PsiPlus,
    PsiMinus,
}

/// The six input states (name, preparation setting).
pub fn paper_teleport_states() -> [(&'static str, ProjectorSetting); 6] {
    [
        ("0", ProjectorSetting::new(PI, 0.0)),
        ("1", ProjectorSetting::new(0.0, 0.0)),
        ("+", ProjectorSetting::new(FRAC_PI_2, 0.0)),
        ("-", ProjectorSetting::new(FRAC_PI_2, PI)),
        ("+i", ProjectorSetting::new(FRAC_PI_2, FRAC_PI_2)),
        ("-i", ProjectorSetting::new(FRAC_PI_2, -FRAC_PI_2)),
    ]
}

/// ψ on qubit 2 from MRR1 (idler heralded on mode 0), `|Φ⁺⟩` on qubits 3–4 from
/// MRR3/MRR4, Bell analysis of qubits 2–3 and read-out of qubit 4.
///
/// The `Ψ⁺` herald is one photon in each rail of qubit 2; `Ψ⁻` is the upper
/// rail of qubit 2 with the lower rail of qubit 3. Each accepts 1/8 of inputs.
pub fn teleport_spec(psi: ProjectorSetting, projection: BellProjection, noise: &NoiseKnobs) -> ExperimentSpec {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let mut s = spec("teleport", [ON, OFF, h, h], OperatorSetting::Bell, noise);
    s.prep[1] = Some(psi);
    s.herald.clicks = match projection {
        BellProjection::PsiPlus => vec![0, 2, 3],
        BellProjection::PsiMinus => vec![0, 2, 5],
    };
    s.measured = vec![4];
    s
}

#[derive(Clone, Debug)]
pub struct TeleportResult {
    /// Output state after the software correction.
    pub rho: DensityMatrix,
    pub method: Reconstruction,
    pub fidelity: f64,
    pub success_probability: f64,
    pub tallies: Vec<CoincidenceTally>,
}

fn pauli(which: char) -> DMatrix<C64> {
    let (z, o, i) = (OFF, ON, C64::new(0.0, 1.0));
    match which {
        'x' => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        'y' => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        _ => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    }
}

/// Records from tallies: sampled counts when present, else the exact probabilities.
fn records(tallies: &[CoincidenceTally]) -> ProtocolResult<Vec<MeasurementRecord>> {
    tallies
        .iter()
        .map(|t| {
            let counts = match &t.counts {
                Some(c) => c.iter().map(|(k, &v)| (k.clone(), v as f64)).collect(),
                None => t.probabilities.clone(),
            };
            Ok(MeasurementRecord::new(t.settings.clone(), counts)?)
        })
        .collect()
}

/// How a density matrix was obtained from tallies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reconstruction {
    LinearInversion,
    MaximumLikelihood,
}

impl Reconstruction {
    pub fn name(self) -> &'static str {
        match self {
            Reconstruction::LinearInversion => "linear_inversion",
            Reconstruction::MaximumLikelihood => "mle",
        }
    }
}

/// Density matrix from Pauli tallies: linear inversion for exact probabilities
/// when it is positive, maximum likelihood otherwise.
pub(crate) fn reconstruct(tallies: &[CoincidenceTally], n: usize) -> ProtocolResult<(DensityMatrix, Reconstruction)> {
    let recs = records(tallies)?;
    let sampled = tallies.iter().any(|t| t.counts.is_some());
    if !sampled {
        let m = linear_inversion(&recs, n)?;
        if let Ok(rho) = DensityMatrix::new(m) {
            if rho.min_eigenvalue() >= -1e-12 {
                return Ok((rho, Reconstruction::LinearInversion));
            }
        }
    }
    let rho = mle_tomography(&recs, n, MleOptions::default())?.rho;
    Ok((rho, Reconstruction::MaximumLikelihood))
}

pub fn run_teleportation(
    psi: ProjectorSetting,
    projection: BellProjection,
    noise: &NoiseKnobs,
    shots: u64,
    seed: u64,
) -> ProtocolResult<TeleportResult> {
    let mut s = teleport_spec(psi, projection, noise);
    s.shots = shots;
    s.seed = seed;
    let prepared = Prepared::new(&s)?;
    let tallies = prepared.tallies(&pauli_settings(1))?;
    let success_probability = tallies[0].success_probability();
    if success_probability <= 0.0 {
        return Err(ProtocolError::ZeroSuccess);
    }
    let (raw, method) = reconstruct(&tallies, 1)?;
    let correction = match projection {
        BellProjection::PsiPlus => pauli('x'),
        BellProjection::PsiMinus => pauli('y'),
    };
    let rho = raw.transform(&correction)?;
    let fidelity = rho.fidelity(&qubit_ket(&psi))?;
    Ok(TeleportResult {
        rho,
        method,
        fidelity,
        success_probability,
        tallies,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapMode {
    Bell,
    Fusion,
}

/// `|Φ⁺⟩₁₂|Φ⁺⟩₃₄` with qubits 2–3 projected by the Bell analyzer (`Ψ⁺` herald)
/// or fused and measured `++` in σx; qubits 1 and 4 are read out.
pub fn swap_spec(mode: SwapMode, noise: &NoiseKnobs) -> ExperimentSpec {
    let mut s = match mode {
        SwapMode::Bell => {
            let mut s = spec("swap_bell", [ON; 4], OperatorSetting::Bell, noise);
            s.herald.clicks = vec![2, 3];
            s
        }
        SwapMode::Fusion => {
            let mut s = spec("swap_fusion", [ON; 4], OperatorSetting::Fusion, noise);
            s.herald.projections = [2, 3]
                .map(|q| Projection {
                    qubit: q,
                    setting: ProjectorSetting::sigma_x(),
                    outcome: 0,
                })
                .to_vec();
            s
        }
    };
    s.measured = vec![1, 4];
    s
}

#[derive(Clone, Debug)]
pub struct SwapResult {
    pub rho: DensityMatrix,
    pub method: Reconstruction,
    pub target: DVector<C64>,
    pub fidelity: f64,
    pub success_probability: f64,
    pub tallies: Vec<CoincidenceTally>,
}

pub fn run_swapping(mode: SwapMode, noise: &NoiseKnobs, shots: u64, seed: u64) -> ProtocolResult<SwapResult> {
    let mut s = swap_spec(mode, noise);
    s.shots = shots;
    s.seed = seed;
    let prepared = Prepared::new(&s)?;
    let tallies = prepared.tallies(&pauli_settings(2))?;
    let success_probability = tallies[0].success_probability();
    if success_probability <= 0.0 {
        return Err(ProtocolError::ZeroSuccess);
    }
    let (rho, method) = reconstruct(&tallies, 2)?;
    let target = bell_state(match mode {
        SwapMode::Bell => BellState::PsiPlus,
        SwapMode::Fusion => BellState::PhiPlus,
    });
    let fidelity = rho.fidelity(&target)?;
    Ok(SwapResult {
        rho,
        method,
        target,
        fidelity,
        success_probability,
        tallies,
    })
}

/// Fusion of `|Φ⁺⟩₁₂|Φ⁺⟩₃₄` on qubits 2–3. For n = 3 qubit 4 is projected on σx
/// outcome `+`; for n = 2 qubits 2 and 3 are.
pub fn ghz_spec(n: usize, noise: &NoiseKnobs) -> ProtocolResult<ExperimentSpec> {
    let mut s = spec(&format!("ghz{n}"), [ON; 4], OperatorSetting::Fusion, noise);
    let plus = |q| Projection {
        qubit: q,
        setting: ProjectorSetting::sigma_x(),
        outcome: 0,
    };
    match n {
        4 => s.measured = vec![1, 2, 3, 4],
        3 => {
            s.measured = vec![1, 2, 3];
            s.herald.projections = vec![plus(4)];
        }
        2 => {
            s.measured = vec![1, 4];
            s.herald.projections = vec![plus(2), plus(3)];
        }
        _ => return Err(ProtocolError::OutOfRange(format!("GHZ size {n}, expected 2, 3 or 4"))),
    }
    Ok(s)
}

/// σz⊗n followed by `Ω_{kπ/n}⊗n` for k = 0…n−1 (k = 0 is σx⊗n).
pub fn ghz_witness_settings(n: usize) -> Vec<Vec<ProjectorSetting>> {
    std::iter::once(vec![ProjectorSetting::sigma_z(); n])
        .chain((0..n).map(|k| vec![ProjectorSetting::omega(k as f64 * PI / n as f64); n]))
        .collect()
}

#[derive(Clone, Debug)]
pub struct GhzResult {
    pub n: usize,
    pub success_probability: f64,
    /// Tallies in [`ghz_witness_settings`] order.
    pub tallies: Vec<CoincidenceTally>,
    pub witness: WitnessReport,
    /// GME-concurrence and fidelity lower bounds from σz and σx (n = 3, 4).
    pub two_basis: Option<(f64, f64)>,
    /// Witness fidelity, or tomographic fidelity for n = 2.
    pub fidelity: f64,
}

pub fn run_ghz(n: usize, noise: &NoiseKnobs, shots: u64, seed: u64) -> ProtocolResult<GhzResult> {
    let mut s = ghz_spec(n, noise)?;
    s.shots = shots;
    s.seed = seed;
    let prepared = Prepared::new(&s)?;
    let tallies = prepared.tallies(&ghz_witness_settings(n))?;
    let success_probability = tallies[0].success_probability();
    if success_probability <= 0.0 {
        return Err(ProtocolError::ZeroSuccess);
    }
    let recs = records(&tallies)?;
    let witness = ghz_fidelity_witness(&recs[0], &recs[1..])?;
    let two_basis = if n >= 3 {
        Some((
            gme_concurrence_bound(n, &recs[0], &recs[1])?,
            fidelity_lower_bound_two_basis(n, &recs[0], &recs[1])?,
        ))
    } else {
        None
    };
    let fidelity = if n == 2 {
        let t = prepared.tallies(&pauli_settings(2))?;
        reconstruct(&t, 2)?.0.fidelity(&ghz_state(2))?
    } else {
        witness.fidelity
    };
    Ok(GhzResult {
        n,
        success_probability,
        tallies,
        witness,
        two_basis,
        fidelity,
    })
}

/// Two-photon interference fringes on qubits 2–3 fed by MRR1 and MRR3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FringeKind {
    /// Qubit 2 rotated by θ from |1⟩ towards |0⟩ against |0⟩ on qubit 3,
    /// through the Bell operator; total σxσx coincidences.
    BellTheta,
    /// `|+_φ⟩|+⟩` through the fusion operator; the σxσx `++` coincidence.
    FusionPhi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeResult {
    pub samples: Vec<(f64, f64)>,
    pub visibility: f64,
}

pub(crate) fn fringe_spec(kind: FringeKind, x: f64, noise: &NoiseKnobs) -> ExperimentSpec {
    let mut s = match kind {
        FringeKind::BellTheta => {
            let mut s = spec("hom_bell", [ON, OFF, ON, OFF], OperatorSetting::Bell, noise);
            s.prep[1] = Some(ProjectorSetting::new(x, 0.0));
            s
        }
        FringeKind::FusionPhi => {
            let mut s = spec("hom_fusion", [ON, OFF, ON, OFF], OperatorSetting::Fusion, noise);
            s.prep[1] = Some(ProjectorSetting::new(FRAC_PI_2, x));
            s.prep[2] = Some(ProjectorSetting::sigma_x());
            s
        }
    };
    s.herald.clicks = vec![Ring::Mrr1.idler_mode(), Ring::Mrr3.idler_mode()];
    s.measured = vec![2, 3];
    s
}

/// One fringe value per sweep point.
pub fn fringe_value(kind: FringeKind, x: f64, noise: &NoiseKnobs) -> ProtocolResult<f64> {
    let t = Prepared::new(&fringe_spec(kind, x, noise))?.tally(&[ProjectorSetting::sigma_x(); 2])?;
    Ok(match kind {
        FringeKind::BellTheta => t.success_probability(),
        FringeKind::FusionPhi => t.probabilities["00"],
    })
}

/// `(max − min)/(max + min)` over the sampled fringe.
pub fn hom_fringe(kind: FringeKind, points: &[f64], noise: &NoiseKnobs) -> ProtocolResult<FringeResult> {
    if points.is_empty() {
        return Err(ProtocolError::OutOfRange("empty sweep".into()));
    }
    let samples = points
        .iter()
        .map(|&x| Ok((x, fringe_value(kind, x, noise)?)))
        .collect::<ProtocolResult<Vec<_>>>()?;
    let hi = samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let lo = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    if hi + lo <= 0.0 {
        return Err(ProtocolError::ZeroSuccess);
    }
    Ok(FringeResult {
        samples,
        visibility: (hi - lo) / (hi + lo),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{born_probabilities, DensityMatrix};
    use crate::protocols::qubit_vector;

    fn ideal() -> NoiseKnobs {
        NoiseKnobs::ideal()
    }

    #[test]
    fn bell_pairs() {
        let st = prepare_bell(Ring::Mrr1, Ring::Mrr2, 0.0).unwrap();
        let v = qubit_vector(&st, &[1, 2]).unwrap();
        let rho = DensityMatrix::from_pure(&v).unwrap();
        assert!((rho.fidelity(&bell_state(BellState::PhiPlus)).unwrap() - 1.0).abs() < 1e-12);
        let p = born_probabilities(&rho, &[ProjectorSetting::sigma_z(); 2]).unwrap();
        assert!((p["00"] - 0.5).abs() < 1e-12 && (p["11"] - 0.5).abs() < 1e-12);
        let st = prepare_bell(Ring::Mrr4, Ring::Mrr3, PI).unwrap();
        let v = qubit_vector(&st, &[3, 4]).unwrap();
        let rho = DensityMatrix::from_pure(&v).unwrap();
        assert!((rho.fidelity(&bell_state(BellState::PhiMinus)).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(prepare_bell(Ring::Mrr1, Ring::Mrr1, 0.0), Err(ProtocolError::SameSource(_))));
        assert!(prepare_bell(Ring::Mrr1, Ring::Mrr3, 0.0).is_err());
    }

    #[test]
    fn ideal_teleportation() {
        for proj in [BellProjection::PsiPlus, BellProjection::PsiMinus] {
            for (name, psi) in paper_teleport_states() {
                let r = run_teleportation(psi, proj, &ideal(), 0, 0).unwrap();
                assert!((r.fidelity - 1.0).abs() < 1e-9, "{proj:?} {name}: {}", r.fidelity);
                assert!((r.success_probability - 0.125).abs() < 1e-9, "{}", r.success_probability);
            }
        }
    }

    #[test]
    fn ideal_swapping() {
        for mode in [SwapMode::Bell, SwapMode::Fusion] {
            let r = run_swapping(mode, &ideal(), 0, 0).unwrap();
            assert!((r.fidelity - 1.0).abs() < 1e-9, "{mode:?}: {}", r.fidelity);
        }
    }

    #[test]
    fn ideal_ghz() {
        for n in 2..=4 {
            let r = run_ghz(n, &ideal(), 0, 0).unwrap();
            assert!((r.fidelity - 1.0).abs() < 1e-9, "n={n}: {}", r.fidelity);
            assert!((r.witness.witness + 0.5).abs() < 1e-9);
            let v = Prepared::new(&ghz_spec(n, &ideal()).unwrap()).unwrap().ideal_qubit_state().unwrap();
            let f = DensityMatrix::from_pure(&v).unwrap().fidelity(&ghz_state(n)).unwrap();
            assert!((f - 1.0).abs() < 1e-9, "n={n} state fidelity {f}");
        }
        let r = run_ghz(4, &ideal(), 0, 0).unwrap();
        assert!((r.success_probability - 0.5).abs() < 1e-9);
        let (c, fb) = run_ghz(3, &ideal(), 0, 0).unwrap().two_basis.unwrap();
        assert!((c - 1.0).abs() < 1e-9 && (fb - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fringes() {
        let pts: Vec<f64> = (0..16).map(|k| k as f64 * PI / 8.0).collect();
        let b = hom_fringe(FringeKind::BellTheta, &pts, &ideal()).unwrap();
        assert!((b.visibility - 1.0).abs() < 1e-9, "{}", b.visibility);
        let f = hom_fringe(FringeKind::FusionPhi, &pts, &ideal()).unwrap();
        assert!((f.visibility - 1.0).abs() < 1e-9, "{}", f.visibility);
        let mut dist = ideal();
        dist.distinguishability = 1.0;
        let f = hom_fringe(FringeKind::FusionPhi, &pts, &dist).unwrap();
        assert!(f.visibility.abs() < 1e-9, "{}", f.visibility);
    }

    #[test]
    fn noisy_teleportation_band() {
        let noise = NoiseKnobs::paper(0.05);
        let fs: Vec<f64> = paper_teleport_states()
            .iter()
            .map(|(_, psi)| run_teleportation(*psi, BellProjection::PsiPlus, &noise, 0, 0).unwrap().fidelity)
            .collect();
        let mean = fs.iter().sum::<f64>() / 6.0;
        assert!((0.85..=0.97).contains(&mean), "{mean} {fs:?}");
    }
}
