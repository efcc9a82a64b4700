//! Dual-rail circuit elements as [`LinearTransform`] values.
//!
//! Qubit `k` (1-based) occupies modes `(2k−2, 2k−1)`; the first is the zero
//! rail. Two-mode matrices are ordered `(zero rail, one rail)`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{apply_transform, FockError, LinearTransform, PureState};
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("qubit {qubit} not in a {qubits}-qubit layout")]
    UnknownQubit { qubit: usize, qubits: usize },
    #[error("rail {0} used twice")]
    RailCollision(usize),
    #[error("rail {rail} outside register of {modes} modes")]
    RailOutOfRange { rail: usize, modes: usize },
    #[error("expected {expected} settings, got {got}")]
    SettingCount { expected: usize, got: usize },
    #[error(transparent)]
    Fock(#[from] FockError),
}

pub type CircuitResult<T> = Result<T, CircuitError>;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn two_by_two(m: [[C64; 2]; 2]) -> LinearTransform {
    LinearTransform::from_rows(&[&m[0], &m[1]]).expect("closed-form matrix is unitary")
}

/// `diag(1, e^{iθ})`.
pub fn phase_unitary(theta: f64) -> LinearTransform {
    two_by_two([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), C64::from_polar(1.0, theta)]])
}

/// Balanced multimode-interference coupler `(1/√2)[[i, 1], [1, i]]`.
pub fn mmi_unitary() -> LinearTransform {
    let h = FRAC_1_SQRT_2;
    two_by_two([[c(0.0, h), c(h, 0.0)], [c(h, 0.0), c(0.0, h)]])
}

/// `e^{i(θ+π)/2} [[sin θ/2, cos θ/2], [cos θ/2, −sin θ/2]]`, equal to MMI·Phase(θ)·MMI.
pub fn mzi_unitary(theta: f64) -> LinearTransform {
    let g = C64::from_polar(1.0, (theta + PI) / 2.0);
    let (s, co) = ((theta / 2.0).sin(), (theta / 2.0).cos());
    two_by_two([[g * s, g * co], [g * co, -g * s]])
}

/// Waveguide crosser: lossless swap of two modes.
pub fn crosser() -> LinearTransform {
    LinearTransform::permutation(&[1, 0]).expect("fixed permutation")
}

/// Rail assignment of a dual-rail register.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitLayout {
    rails: Vec<(usize, usize)>,
    modes: usize,
}

impl QubitLayout {
    /// Qubit `k` on modes `(2k−2, 2k−1)`.
    pub fn standard(qubits: usize) -> Self {
        Self {
            rails: (0..qubits).map(|q| (2 * q, 2 * q + 1)).collect(),
            modes: 2 * qubits,
        }
    }

    pub fn new(rails: Vec<(usize, usize)>, modes: usize) -> CircuitResult<Self> {
        let mut seen = vec![false; modes];
        for &(a, b) in &rails {
            for r in [a, b] {
                if r >= modes {
                    return Err(CircuitError::RailOutOfRange { rail: r, modes });
                }
                if std::mem::replace(&mut seen[r], true) {
                    return Err(CircuitError::RailCollision(r));
                }
            }
        }
        Ok(Self { rails, modes })
    }

    pub fn qubits(&self) -> usize {
        self.rails.len()
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// `(zero rail, one rail)` of 1-based qubit `k`.
    pub fn rails(&self, k: usize) -> CircuitResult<(usize, usize)> {
        k.checked_sub(1)
            .and_then(|i| self.rails.get(i).copied())
            .ok_or(CircuitError::UnknownQubit {
                qubit: k,
                qubits: self.rails.len(),
            })
    }

    pub fn zero_rail(&self, k: usize) -> CircuitResult<usize> {
        Ok(self.rails(k)?.0)
    }

    pub fn one_rail(&self, k: usize) -> CircuitResult<usize> {
        Ok(self.rails(k)?.1)
    }

    /// `[zero_a, one_a, zero_b, one_b]` for two qubits.
    pub fn pair_rails(&self, a: usize, b: usize) -> CircuitResult<[usize; 4]> {
        let (a0, a1) = self.rails(a)?;
        let (b0, b1) = self.rails(b)?;
        Ok([a0, a1, b0, b1])
    }
}

/// A transform bound to the register modes it acts on.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeOperation {
    pub transform: LinearTransform,
    pub modes: Vec<usize>,
}

impl ModeOperation {
    pub fn new(transform: LinearTransform, modes: Vec<usize>) -> Self {
        Self { transform, modes }
    }

    pub fn apply(&self, state: &PureState) -> CircuitResult<PureState> {
        Ok(apply_transform(state, &self.transform, &self.modes)?)
    }

    /// The operation as an `m×m` register transform.
    pub fn to_register(&self, m: usize) -> CircuitResult<LinearTransform> {
        embed(&self.transform, &self.modes, m)
    }
}

/// Exchange `|1⟩_a ↔ |0⟩_b` on `[zero_a, one_a, zero_b, one_b]`.
fn exchange() -> LinearTransform {
    LinearTransform::permutation(&[0, 2, 1, 3]).expect("fixed permutation")
}

/// Bosonic Bell projector `Ex · (MZI(π/2) ⊕ MZI(π/2)) · Ex` on qubits 2 and 3.
///
/// After post-selection on one photon per output pair of rails, |Ψ⁺⟩ leaves
/// both photons on one qubit (opposite rails), |Ψ⁻⟩ one photon per qubit on
/// opposite rails, and |Φ±⟩ bunch completely.
pub fn o_bell_unitary(layout: &QubitLayout) -> CircuitResult<ModeOperation> {
    let ex = exchange();
    let int = mzi_unitary(FRAC_PI_2).direct_sum(&mzi_unitary(FRAC_PI_2));
    let u = ex.compose(&int)?.compose(&ex)?;
    Ok(ModeOperation::new(u, layout.pair_rails(2, 3)?.to_vec()))
}

/// Fusion coupler on qubits 2 and 3: transmits the zero rails, swaps the one rails.
///
/// Built as `Ex · (MZI(π) ⊕ MZI(0)) · Ex`; the zero-rail box is identity-like
/// and the one-rail box σx-like.
pub fn o_fusion_unitary(layout: &QubitLayout) -> CircuitResult<ModeOperation> {
    let ex = exchange();
    let boxes = mzi_unitary(PI).direct_sum(&mzi_unitary(0.0));
    let u = ex.compose(&boxes)?.compose(&ex)?;
    Ok(ModeOperation::new(u, layout.pair_rails(2, 3)?.to_vec()))
}

/// Named measurement bases.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    SigmaX,
    SigmaY,
    SigmaZ,
    /// `cos ϑ σx + sin ϑ σy`.
    Omega(f64),
}

/// MZI angle `theta` and phase `phi` of a single-qubit stage.
///
/// As a preparation from |0⟩ it yields `sin(θ/2)|0⟩ + e^{iφ} cos(θ/2)|1⟩`; as a
/// measurement, outcome 0 projects onto that same state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectorSetting {
    pub theta: f64,
    pub phi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Basis>,
}

impl ProjectorSetting {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self {
            theta,
            phi,
            basis: None,
        }
    }

    pub fn sigma_x() -> Self {
        Self {
            theta: FRAC_PI_2,
            phi: 0.0,
            basis: Some(Basis::SigmaX),
        }
    }

    pub fn sigma_y() -> Self {
        Self {
            theta: FRAC_PI_2,
            phi: FRAC_PI_2,
            basis: Some(Basis::SigmaY),
        }
    }

    pub fn sigma_z() -> Self {
        Self {
            theta: PI,
            phi: 0.0,
            basis: Some(Basis::SigmaZ),
        }
    }

    pub fn omega(angle: f64) -> Self {
        Self {
            theta: FRAC_PI_2,
            phi: angle,
            basis: Some(Basis::Omega(angle)),
        }
    }

    pub fn of_basis(b: Basis) -> Self {
        match b {
            Basis::SigmaX => Self::sigma_x(),
            Basis::SigmaY => Self::sigma_y(),
            Basis::SigmaZ => Self::sigma_z(),
            Basis::Omega(a) => Self::omega(a),
        }
    }

    /// Preparation matrix `Phase(φ) · MZI(θ)`: the MZI acts first.
    pub fn prep_matrix(&self) -> LinearTransform {
        phase_unitary(self.phi)
            .compose(&mzi_unitary(self.theta))
            .expect("2x2 compose")
    }

    /// Measurement matrix `MZI(θ) · Phase(−φ)`: the phase acts first.
    pub fn measure_matrix(&self) -> LinearTransform {
        mzi_unitary(self.theta)
            .compose(&phase_unitary(-self.phi))
            .expect("2x2 compose")
    }

    /// Unit vector of outcome `bit` in the `(|0⟩, |1⟩)` basis.
    pub fn outcome_vector(&self, bit: u8) -> [C64; 2] {
        let m = self.measure_matrix();
        let row = usize::from(bit);
        [m.entry(row, 0).conj(), m.entry(row, 1).conj()]
    }
}

/// Block-diagonal single-qubit stage; `None` leaves a qubit untouched.
fn local_stage(
    layout: &QubitLayout,
    settings: &[Option<ProjectorSetting>],
    matrix: impl Fn(&ProjectorSetting) -> LinearTransform,
) -> CircuitResult<ModeOperation> {
    if settings.len() != layout.qubits() {
        return Err(CircuitError::SettingCount {
            expected: layout.qubits(),
            got: settings.len(),
        });
    }
    let mut modes = Vec::new();
    let mut u: Option<LinearTransform> = None;
    for (q, s) in settings.iter().enumerate() {
        let Some(s) = s else { continue };
        let (r0, r1) = layout.rails(q + 1)?;
        modes.extend([r0, r1]);
        let block = matrix(s);
        u = Some(match u {
            None => block,
            Some(acc) => acc.direct_sum(&block),
        });
    }
    match u {
        Some(transform) => Ok(ModeOperation::new(transform, modes)),
        None => Ok(ModeOperation::new(
            LinearTransform::identity(1),
            vec![layout.zero_rail(1)?],
        )),
    }
}

/// Preparation stage over the register, one optional setting per qubit.
pub fn prep_stage(layout: &QubitLayout, settings: &[Option<ProjectorSetting>]) -> CircuitResult<ModeOperation> {
    local_stage(layout, settings, ProjectorSetting::prep_matrix)
}

/// Measurement stage over the register, one optional setting per qubit.
pub fn measure_stage(
    layout: &QubitLayout,
    settings: &[Option<ProjectorSetting>],
) -> CircuitResult<ModeOperation> {
    local_stage(layout, settings, ProjectorSetting::measure_matrix)
}

/// Embeds a small transform acting on `rails` into an `m`-mode identity.
pub fn embed(u: &LinearTransform, rails: &[usize], m: usize) -> CircuitResult<LinearTransform> {
    if rails.len() != u.dim() {
        return Err(FockError::Dimension(format!(
            "{} rails for a {}-mode transform",
            rails.len(),
            u.dim()
        ))
        .into());
    }
    let mut seen = vec![false; m];
    for &r in rails {
        if r >= m {
            return Err(CircuitError::RailOutOfRange { rail: r, modes: m });
        }
        if std::mem::replace(&mut seen[r], true) {
            return Err(CircuitError::RailCollision(r));
        }
    }
    let mut full = DMatrix::identity(m, m);
    for (i, &ri) in rails.iter().enumerate() {
        for (j, &rj) in rails.iter().enumerate() {
            full[(ri, rj)] = u.entry(i, j);
        }
    }
    Ok(if u.is_lossy() {
        LinearTransform::new_lossy(full)?
    } else {
        LinearTransform::new(full)?
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{post_select, DetectionPattern, OccupationState};

    fn close(a: &LinearTransform, b: &LinearTransform, tol: f64) -> bool {
        a.matrix().iter().zip(b.matrix().iter()).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn phase_shifter_cases() {
        assert!(close(&phase_unitary(0.0), &LinearTransform::identity(2), 1e-15));
        assert!((phase_unitary(PI).entry(1, 1) - c(-1.0, 0.0)).norm() < 1e-15);
        assert!((phase_unitary(FRAC_PI_2).entry(1, 1) - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn mzi_is_mmi_phase_mmi() {
        for k in 0..16 {
            let t = -PI + k as f64 * 0.41;
            let prod = mmi_unitary()
                .compose(&phase_unitary(t))
                .unwrap()
                .compose(&mmi_unitary())
                .unwrap();
            assert!(close(&prod, &mzi_unitary(t), 1e-12));
        }
    }

    #[test]
    fn mzi_special_angles() {
        let h = FRAC_1_SQRT_2;
        let g = C64::from_polar(1.0, 3.0 * PI / 4.0);
        let had = two_by_two([[g * h, g * h], [g * h, -g * h]]);
        assert!(close(&mzi_unitary(FRAC_PI_2), &had, 1e-15));
        let swap = mzi_unitary(0.0);
        assert!(swap.entry(0, 0).norm() < 1e-15 && swap.entry(1, 1).norm() < 1e-15);
        let zlike = mzi_unitary(PI);
        assert!(zlike.entry(0, 1).norm() < 1e-15 && (zlike.entry(0, 0).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn prep_then_measure_is_identity_up_to_phase() {
        for (t, p) in [(0.3, 1.1), (FRAC_PI_2, 0.0), (PI, -2.0)] {
            let s = ProjectorSetting::new(t, p);
            let prod = s.measure_matrix().compose(&s.prep_matrix()).unwrap();
            assert!(prod.approx_eq_up_to_phase(&LinearTransform::identity(2), 1e-12));
        }
    }

    #[test]
    fn standard_basis_outcomes() {
        let h = FRAC_1_SQRT_2;
        let plus = ProjectorSetting::sigma_x().outcome_vector(0);
        assert!((plus[0] * plus[1].conj()).re > 0.0);
        assert!((plus[0].norm() - h).abs() < 1e-15);
        let y = ProjectorSetting::sigma_y().outcome_vector(0);
        let ratio = y[1] / y[0];
        assert!((ratio - c(0.0, 1.0)).norm() < 1e-12);
        let z = ProjectorSetting::sigma_z().outcome_vector(0);
        assert!((z[0].norm() - 1.0).abs() < 1e-15 && z[1].norm() < 1e-15);
    }

    #[test]
    fn embed_checks_and_identity() {
        let id = embed(&LinearTransform::identity(2), &[1, 3], 4).unwrap();
        assert!(close(&id, &LinearTransform::identity(4), 0.0));
        assert!(matches!(
            embed(&mmi_unitary(), &[1, 1], 4),
            Err(CircuitError::RailCollision(1))
        ));
        let u = embed(&mmi_unitary(), &[0, 2], 4).unwrap();
        let v = embed(&mmi_unitary().adjoint(), &[0, 2], 4).unwrap();
        assert!(close(&u.compose(&v).unwrap(), &LinearTransform::identity(4), 1e-15));
    }

    #[test]
    fn layout_rails() {
        let l = QubitLayout::standard(4);
        assert_eq!(l.rails(3).unwrap(), (4, 5));
        assert!(l.rails(0).is_err() && l.rails(5).is_err());
        assert!(QubitLayout::new(vec![(0, 1), (1, 2)], 4).is_err());
    }

    #[test]
    fn fusion_of_plus_plus_gives_phi_plus_half_the_time() {
        let layout = QubitLayout::standard(4);
        let h = FRAC_1_SQRT_2;
        let plus_plus = PureState::from_terms(
            8,
            [
                (OccupationState::from_modes(&[2, 4]), c(0.5, 0.0)),
                (OccupationState::from_modes(&[2, 5]), c(0.5, 0.0)),
                (OccupationState::from_modes(&[3, 4]), c(0.5, 0.0)),
                (OccupationState::from_modes(&[3, 5]), c(0.5, 0.0)),
            ],
        )
        .unwrap();
        let fused = o_fusion_unitary(&layout).unwrap().apply(&plus_plus).unwrap();
        let one_each = fused.filter(|o| o.mode_count(2) + o.mode_count(3) == 1);
        assert!((one_each.norm_sqr() - 0.5).abs() < 1e-12);
        let phi = one_each.normalize().unwrap();
        let a = phi.amplitude(&OccupationState::from_modes(&[2, 4]));
        let b = phi.amplitude(&OccupationState::from_modes(&[3, 5]));
        assert!((a.norm() - h).abs() < 1e-12 && (a - b).norm() < 1e-12);
        let (_, p) = post_select(&fused, &DetectionPattern::default()).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }
}
