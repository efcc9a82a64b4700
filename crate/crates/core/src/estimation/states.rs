use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::circuits::ProjectorSetting;
use crate::C64;

/// Computational basis vector; qubit 1 is the most significant bit.
pub fn basis_ket(bits: &str) -> DVector<C64> {
    let n = bits.len();
    let idx = usize::from_str_radix(bits, 2).expect("bitstring");
    let mut v = DVector::zeros(1 << n);
    v[idx] = C64::new(1.0, 0.0);
    v
}

/// Single-qubit state projected by outcome 0 of `s`.
pub fn qubit_ket(s: &ProjectorSetting) -> DVector<C64> {
    let [a, b] = s.outcome_vector(0);
    DVector::from_vec(vec![a, b])
}

/// `(|0…0⟩ + |1…1⟩)/√2`.
pub fn ghz_state(n: usize) -> DVector<C64> {
    let mut v = DVector::zeros(1 << n);
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    v[0] = h;
    v[(1 << n) - 1] = h;
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

pub fn bell_state(which: BellState) -> DVector<C64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (i, j, s) = match which {
        BellState::PhiPlus => (0, 3, 1.0),
        BellState::PhiMinus => (0, 3, -1.0),
        BellState::PsiPlus => (1, 2, 1.0),
        BellState::PsiMinus => (1, 2, -1.0),
    };
    let mut v = DVector::zeros(4);
    v[i] = C64::new(h, 0.0);
    v[j] = C64::new(s * h, 0.0);
    v
}
