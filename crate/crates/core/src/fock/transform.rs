use std::collections::HashMap;

use nalgebra::DMatrix;

use super::{FockError, FockResult, OccupationState, PureState, Slot};
use crate::C64;

/// Largest tolerated entry of `U·U† − I` for a unitary transform.
pub const UNITARY_TOLERANCE: f64 = 1e-10;

/// Complex matrix acting on spatial-mode creation operators.
///
/// Column `j` is the image of input mode `j`: `a†_j → Σ_k U[k][j] b†_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearTransform {
    matrix: DMatrix<C64>,
    lossy: bool,
}

fn check_square_finite(matrix: &DMatrix<C64>) -> FockResult<()> {
    if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
        return Err(FockError::Dimension(format!(
            "transform must be square and non-empty, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    for col in 0..matrix.ncols() {
        for row in 0..matrix.nrows() {
            let z = matrix[(row, col)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(FockError::NonFinite { row, col });
            }
        }
    }
    Ok(())
}

fn unitarity_deviation(matrix: &DMatrix<C64>) -> f64 {
    let n = matrix.nrows();
    let prod = matrix * matrix.adjoint();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

impl LinearTransform {
    /// A unitary transform; rejects matrices off unitarity by more than [`UNITARY_TOLERANCE`].
    pub fn new(matrix: DMatrix<C64>) -> FockResult<Self> {
        check_square_finite(&matrix)?;
        let deviation = unitarity_deviation(&matrix);
        if deviation > UNITARY_TOLERANCE {
            return Err(FockError::NotUnitary { deviation });
        }
        Ok(Self {
            matrix,
            lossy: false,
        })
    }

    /// A sub-unitary transform (all singular values at most one).
    ///
    /// Applying it keeps only the branch in which no photon is lost, so norm
    /// can decrease.
    pub fn new_lossy(matrix: DMatrix<C64>) -> FockResult<Self> {
        check_square_finite(&matrix)?;
        let sigma = matrix
            .clone()
            .singular_values()
            .iter()
            .fold(0.0_f64, |a, &b| a.max(b));
        if sigma > 1.0 + UNITARY_TOLERANCE {
            return Err(FockError::NotContraction { sigma });
        }
        Ok(Self {
            matrix,
            lossy: true,
        })
    }

    pub fn from_rows(rows: &[&[C64]]) -> FockResult<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(FockError::Dimension("rows must form a square matrix".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(m: usize) -> Self {
        Self {
            matrix: DMatrix::identity(m, m),
            lossy: false,
        }
    }

    /// Permutation sending input mode `j` to output mode `perm[j]`.
    pub fn permutation(perm: &[usize]) -> FockResult<Self> {
        let m = perm.len();
        let mut matrix = DMatrix::zeros(m, m);
        let mut seen = vec![false; m];
        for (j, &k) in perm.iter().enumerate() {
            if k >= m {
                return Err(FockError::ModeOutOfRange { mode: k, modes: m });
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(FockError::DuplicateMode(k));
            }
            matrix[(k, j)] = C64::new(1.0, 0.0);
        }
        Ok(Self {
            matrix,
            lossy: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn is_lossy(&self) -> bool {
        self.lossy
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            lossy: self.lossy,
        }
    }

    /// `self · other`: `other` acts first.
    pub fn compose(&self, other: &Self) -> FockResult<Self> {
        if self.dim() != other.dim() {
            return Err(FockError::Dimension(format!(
                "cannot compose {}-mode and {}-mode transforms",
                self.dim(),
                other.dim()
            )));
        }
        Ok(Self {
            matrix: &self.matrix * &other.matrix,
            lossy: self.lossy || other.lossy,
        })
    }

    /// Block-diagonal `self ⊕ other`.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let (a, b) = (self.dim(), other.dim());
        let mut matrix = DMatrix::zeros(a + b, a + b);
        matrix.view_mut((0, 0), (a, a)).copy_from(&self.matrix);
        matrix.view_mut((a, a), (b, b)).copy_from(&other.matrix);
        Self {
            matrix,
            lossy: self.lossy || other.lossy,
        }
    }

    pub fn unitarity_deviation(&self) -> f64 {
        unitarity_deviation(&self.matrix)
    }

    /// Equality up to a global phase, within `tol` entrywise.
    pub fn approx_eq_up_to_phase(&self, other: &Self, tol: f64) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        let mut phase = None;
        for (a, b) in self.matrix.iter().zip(other.matrix.iter()) {
            if a.norm() > 1e-6 && b.norm() > 1e-6 {
                phase = Some(a / b);
                break;
            }
        }
        let Some(p) = phase else {
            return self.matrix.iter().zip(other.matrix.iter()).all(|(a, b)| (a - b).norm() <= tol);
        };
        let p = p / p.norm();
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .all(|(a, b)| (a - b * p).norm() <= tol)
    }
}

/// Evolves `state` by `u` acting on the spatial modes listed in `mode_map`.
///
/// Row/column `k` of `u` refers to register mode `mode_map[k]`; all other
/// modes and every spectral label pass through unchanged.
pub fn apply_transform(
    state: &PureState,
    u: &LinearTransform,
    mode_map: &[usize],
) -> FockResult<PureState> {
    let m = state.mode_count();
    if mode_map.len() != u.dim() {
        return Err(FockError::Dimension(format!(
            "mode map has {} entries for a {}-mode transform",
            mode_map.len(),
            u.dim()
        )));
    }
    let mut local_of = vec![usize::MAX; m];
    for (k, &mode) in mode_map.iter().enumerate() {
        if mode >= m {
            return Err(FockError::ModeOutOfRange { mode, modes: m });
        }
        if local_of[mode] != usize::MAX {
            return Err(FockError::DuplicateMode(mode));
        }
        local_of[mode] = k;
    }
    let column: Vec<Vec<(usize, C64)>> = (0..u.dim())
        .map(|j| {
            (0..u.dim())
                .filter_map(|k| {
                    let z = u.entry(k, j);
                    (z != C64::new(0.0, 0.0)).then_some((mode_map[k], z))
                })
                .collect()
        })
        .collect();

    let mut out: HashMap<OccupationState, C64> = HashMap::new();
    for (occ, &amp) in state.terms() {
        let (mapped, rest) = occ.partition(|mode| local_of[mode] != usize::MAX);
        // Monomial coefficients: amplitude / sqrt(prod n!) multiplies prod (a†)^n.
        let mut monomials: HashMap<OccupationState, C64> = HashMap::new();
        monomials.insert(rest, amp / occ.factorial_product().sqrt());
        for (slot, n) in mapped {
            let image = &column[local_of[slot.mode]];
            for _ in 0..n {
                let mut next: HashMap<OccupationState, C64> =
                    HashMap::with_capacity(monomials.len() * image.len());
                for (mono, coef) in &monomials {
                    for &(mode, z) in image {
                        *next
                            .entry(mono.with_photon(Slot::new(mode, slot.label)))
                            .or_default() += coef * z;
                    }
                }
                monomials = next;
            }
        }
        for (mono, coef) in monomials {
            let weight = mono.factorial_product().sqrt();
            *out.entry(mono).or_default() += coef * weight;
        }
    }
    Ok(PureState::from_map_unchecked(m, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mmi() -> LinearTransform {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        LinearTransform::from_rows(&[
            &[C64::new(0.0, h), C64::new(h, 0.0)],
            &[C64::new(h, 0.0), C64::new(0.0, h)],
        ])
        .unwrap()
    }

    #[test]
    fn hom_bunching_under_mmi() {
        let s = PureState::basis(2, OccupationState::from_modes(&[0, 1])).unwrap();
        let out = apply_transform(&s, &mmi(), &[0, 1]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(out.len(), 2);
        let two0 = OccupationState::new([(Slot::new(0, 0), 2)]);
        let two1 = OccupationState::new([(Slot::new(1, 0), 2)]);
        assert!((out.amplitude(&two0) - C64::new(0.0, h)).norm() < 1e-15);
        assert!((out.amplitude(&two1) - C64::new(0.0, h)).norm() < 1e-15);
        assert_eq!(out.amplitude(&OccupationState::from_modes(&[0, 1])), C64::new(0.0, 0.0));
    }

    #[test]
    fn distinguishable_photons_do_not_bunch() {
        let occ = OccupationState::from_slots([Slot::new(0, 0), Slot::new(1, 1)]);
        let s = PureState::basis(2, occ).unwrap();
        let out = apply_transform(&s, &mmi(), &[0, 1]).unwrap();
        assert_eq!(out.len(), 4);
        for (_, a) in out.terms() {
            assert!((a.norm_sqr() - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn unmapped_modes_pass_through() {
        let s = PureState::basis(3, OccupationState::from_modes(&[2])).unwrap();
        let out = apply_transform(&s, &mmi(), &[0, 1]).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn dimension_and_finiteness_checked() {
        let s = PureState::vacuum(2);
        assert!(matches!(
            apply_transform(&s, &mmi(), &[0]),
            Err(FockError::Dimension(_))
        ));
        let bad = DMatrix::from_element(2, 2, C64::new(f64::NAN, 0.0));
        assert!(matches!(
            LinearTransform::new(bad),
            Err(FockError::NonFinite { .. })
        ));
    }

    #[test]
    fn non_unitary_rejected_unless_lossy() {
        let half = DMatrix::from_diagonal_element(2, 2, C64::new(0.5, 0.0));
        assert!(LinearTransform::new(half.clone()).is_err());
        let lossy = LinearTransform::new_lossy(half).unwrap();
        let s = PureState::basis(2, OccupationState::from_modes(&[0])).unwrap();
        let out = apply_transform(&s, &lossy, &[0, 1]).unwrap();
        assert!((out.norm_sqr() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn permutation_moves_photons() {
        let p = LinearTransform::permutation(&[1, 0]).unwrap();
        let s = PureState::basis(2, OccupationState::from_modes(&[0])).unwrap();
        let out = apply_transform(&s, &p, &[0, 1]).unwrap();
        assert_eq!(out.amplitude(&OccupationState::from_modes(&[1])), C64::new(1.0, 0.0));
    }
}
