use nalgebra::{DMatrix, DVector};

use super::{EstimationError, EstimationResult};
use crate::C64;

/// Tolerance on Hermiticity, trace and negative eigenvalues.
pub const DENSITY_TOLERANCE: f64 = 1e-9;

/// Hermitian, positive semidefinite, unit-trace matrix over `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    qubits: usize,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(matrix: DMatrix<C64>) -> EstimationResult<Self> {
        let d = matrix.nrows();
        if d != matrix.ncols() || d == 0 || !d.is_power_of_two() {
            return Err(EstimationError::Dimension(format!(
                "{}x{} is not a 2^n square matrix",
                d,
                matrix.ncols()
            )));
        }
        let rho = Self {
            qubits: d.trailing_zeros() as usize,
            matrix,
        };
        rho.check()?;
        Ok(rho)
    }

    /// Enforces the invariants after trimming rounding noise: Hermitian part, unit trace.
    pub(crate) fn from_raw(matrix: DMatrix<C64>) -> EstimationResult<Self> {
        let h = (&matrix + matrix.adjoint()) * C64::new(0.5, 0.0);
        let tr = h.trace().re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(EstimationError::NotDensityMatrix(format!("trace {tr}")));
        }
        Self::new(h / C64::new(tr, 0.0))
    }

    pub fn from_pure(psi: &DVector<C64>) -> EstimationResult<Self> {
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(EstimationError::Dimension("zero state vector".into()));
        }
        let v = psi / C64::new(norm, 0.0);
        Self::new(&v * v.adjoint())
    }

    pub fn maximally_mixed(qubits: usize) -> Self {
        let d = 1usize << qubits;
        Self {
            qubits,
            matrix: DMatrix::identity(d, d) / C64::new(d as f64, 0.0),
        }
    }

    fn check(&self) -> EstimationResult<()> {
        let m = &self.matrix;
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(EstimationError::NotDensityMatrix("non-finite entry".into()));
        }
        let herm = (m - m.adjoint()).camax();
        if herm > 1e-10 {
            return Err(EstimationError::NotDensityMatrix(format!("anti-Hermitian part {herm:.2e}")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOLERANCE || tr.im.abs() > DENSITY_TOLERANCE {
            return Err(EstimationError::NotDensityMatrix(format!("trace {tr}")));
        }
        let lo = self.min_eigenvalue();
        if lo < -DENSITY_TOLERANCE {
            return Err(EstimationError::NotDensityMatrix(format!("eigenvalue {lo:.3e}")));
        }
        Ok(())
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = hermitian_eigenvalues(&self.matrix);
        e.sort_by(f64::total_cmp);
        e
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.matrix).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// `⟨ψ|ρ|ψ⟩` for a normalized copy of `target`.
    pub fn fidelity(&self, target: &DVector<C64>) -> EstimationResult<f64> {
        if target.len() != self.dim() {
            return Err(EstimationError::Dimension(format!(
                "target has {} amplitudes, density matrix is {}x{}",
                target.len(),
                self.dim(),
                self.dim()
            )));
        }
        let n2 = target.norm_squared();
        if n2 == 0.0 {
            return Err(EstimationError::Dimension("zero target vector".into()));
        }
        let f = (target.adjoint() * &self.matrix * target)[(0, 0)].re / n2;
        Ok(f.clamp(0.0, 1.0))
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// `U ρ U†` for a unitary on the full register.
    pub fn transform(&self, u: &DMatrix<C64>) -> EstimationResult<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(EstimationError::Dimension("unitary size".into()));
        }
        Self::from_raw(u * &self.matrix * u.adjoint())
    }
}

/// Eigenvalues of a Hermitian matrix through its real symmetric embedding,
/// which doubles each eigenvalue's multiplicity.
pub(crate) fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let d = m.nrows();
    let big = DMatrix::from_fn(2 * d, 2 * d, |i, j| {
        let z = m[(i % d, j % d)];
        match (i < d, j < d) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let mut e: Vec<f64> = nalgebra::SymmetricEigen::new(big).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e.into_iter().step_by(2).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{bell_state, BellState};

    #[test]
    fn pure_and_mixed() {
        let phi = bell_state(BellState::PhiPlus);
        let rho = DensityMatrix::from_pure(&phi).unwrap();
        assert!((rho.fidelity(&phi).unwrap() - 1.0).abs() < 1e-12);
        assert!((rho.purity() - 1.0).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(2);
        assert!((mixed.fidelity(&phi).unwrap() - 0.25).abs() < 1e-12);
        assert!(mixed.fidelity(&DVector::zeros(2)).is_err());
    }

    #[test]
    fn rejects_invalid() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(1.5, 0.0), C64::new(-0.5, 0.0)]));
        assert!(matches!(DensityMatrix::new(m), Err(EstimationError::NotDensityMatrix(_))));
        assert!(DensityMatrix::new(DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn eigenvalues_of_complex_hermitian() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.5, 0.0), C64::new(0.0, -0.5), C64::new(0.0, 0.5), C64::new(0.5, 0.0)],
        );
        let e = hermitian_eigenvalues(&m);
        assert!(e[0].abs() < 1e-12 && (e[1] - 1.0).abs() < 1e-12);
    }
}
