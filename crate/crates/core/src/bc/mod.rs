//! Boundary-condition pairs (A,B): construction, equivalence, scattering
//! matrices and the projection geometry of the subspace M(A,B).

mod classify;
mod feller;
mod local;
mod vertex;

pub use classify::{
    classify_operator, im_form_min_eig, re_form_min_eig, ClassificationReport, KAPPA_PROBES,
};
pub use feller::{
    feller_check, kappa_grid, positivity_class, real_sign_class, sign_class, substochastic_check,
    FellerVerdict, PositivityClass, SignClass, SubstochasticReport, VertexPositivity,
};
pub use local::{
    continuity_form, continuity_form_global, decompose_local, ContinuityForm, LocalDecomposition,
    VertexForm,
};
pub use vertex::{
    assemble_global, assemble_nonlocal_mugnolo, make_vertex_conditions, Alpha, VertexConditions,
    VertexKind,
};

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMatrix, CVector, C64, I};

/// Projector Frobenius distance below which two subspaces count as equal.
pub const EQUIV_TOL: f64 = 1e-10;

/// Condition-number guard for resolving A + ikB.
pub const COND_MAX: f64 = 1e12;

/// A maximal-rank pair (A,B) on the boundary space, with its kernel subspace
/// M(A,B) and the orthogonal projector onto the complement cached.
#[derive(Debug, Clone)]
pub struct BoundaryConditions {
    a: CMatrix,
    b: CMatrix,
    kernel: CMatrix,
    proj_complement: CMatrix,
}

impl BoundaryConditions {
    /// Validate a pair: square, equal size, maximal rank m.
    pub fn new(a: CMatrix, b: CMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() || b.nrows() != b.ncols() || a.nrows() != b.nrows() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: b.nrows(),
            });
        }
        let m = a.nrows();
        let stacked = concat_ab(&a, &b);
        let rank = linalg::rank(&stacked);
        if rank != m {
            return Err(Error::RankDeficient { rank, m });
        }
        let kernel = linalg::kernel_basis(&stacked);
        debug_assert_eq!(kernel.ncols(), m);
        let proj_complement = projection_complement_parts(&a, &b)?;
        Ok(Self {
            a,
            b,
            kernel,
            proj_complement,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn b(&self) -> &CMatrix {
        &self.b
    }

    /// Orthonormal basis of M(A,B) = Ker(A,B), as columns (2m x m).
    pub fn kernel(&self) -> &CMatrix {
        &self.kernel
    }

    /// Orthogonal projector in the doubled space onto the complement of M.
    pub fn proj_complement(&self) -> &CMatrix {
        &self.proj_complement
    }

    /// Orthogonal projector onto M itself.
    pub fn proj_m(&self) -> CMatrix {
        CMatrix::identity(2 * self.dim(), 2 * self.dim()) - &self.proj_complement
    }

    /// A psi + B psi' for a trace vector, as residual of the condition.
    pub fn apply(&self, psi: &CVector, dpsi: &CVector) -> CVector {
        &self.a * psi + &self.b * dpsi
    }

    pub fn ab_dagger(&self) -> CMatrix {
        &self.a * self.b.adjoint()
    }
}

/// The m x 2m concatenation (A, B).
pub fn concat_ab(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let m = a.nrows();
    let mut out = CMatrix::zeros(m, 2 * m);
    out.view_mut((0, 0), (m, m)).copy_from(a);
    out.view_mut((0, m), (m, m)).copy_from(b);
    out
}

/// Does the concatenated block (A,B) have maximal rank m?
pub fn check_rank(a: &CMatrix, b: &CMatrix) -> Result<bool> {
    if a.nrows() != a.ncols() || b.nrows() != b.ncols() || a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    Ok(linalg::rank(&concat_ab(a, b)) == a.nrows())
}

fn projection_complement_parts(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let m = a.nrows();
    let gram = a * a.adjoint() + b * b.adjoint();
    let inv = linalg::inverse(&gram).ok_or(Error::RankDeficient { rank: 0, m })?;
    let mut stacked = CMatrix::zeros(2 * m, m);
    stacked.view_mut((0, 0), (m, m)).copy_from(&a.adjoint());
    stacked.view_mut((m, 0), (m, m)).copy_from(&b.adjoint());
    Ok(&stacked * inv * concat_ab(a, b))
}

/// The projector onto the orthogonal complement of M(A,B),
/// `(A;B)^dagger (AA^dagger + BB^dagger)^{-1} (A,B)`.
pub fn projection_complement(bc: &BoundaryConditions) -> CMatrix {
    bc.proj_complement.clone()
}

/// Are two pairs equivalent, i.e. do they cut out the same subspace M?
pub fn equivalent(bc1: &BoundaryConditions, bc2: &BoundaryConditions) -> Result<bool> {
    if bc1.dim() != bc2.dim() {
        return Err(Error::DimensionMismatch {
            expected: bc1.dim(),
            got: bc2.dim(),
        });
    }
    Ok(linalg::frob_dist(&bc1.proj_complement, &bc2.proj_complement) < EQUIV_TOL)
}

/// The scattering matrix S(k; A, B) = -(A + ikB)^{-1} (A - ikB).
pub fn smatrix(k: C64, bc: &BoundaryConditions) -> Result<CMatrix> {
    smatrix_raw(k, bc.a(), bc.b())
}

/// Same, straight from a pair of matrices.
pub fn smatrix_raw(k: C64, a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let ikb = b.map(|z| I * k * z);
    let plus = a + &ikb;
    if linalg::cond(&plus) > COND_MAX {
        return Err(Error::SingularAtK { re: k.re, im: k.im });
    }
    let minus = a - &ikb;
    let sol = linalg::solve(&plus, &minus).ok_or(Error::SingularAtK { re: k.re, im: k.im })?;
    Ok(-sol)
}

/// S at the purely imaginary spectral point k = i kappa.
pub fn smatrix_ikappa(kappa: f64, bc: &BoundaryConditions) -> Result<CMatrix> {
    smatrix(cr(kappa) * I, bc)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::linalg::{c, frob_dist, max_abs};

    /// The 4x4 pair of the two-delta line example, in the ordering
    /// (e1, e2, i-, i+).
    pub fn delta_line_pair() -> (CMatrix, CMatrix) {
        let a = CMatrix::from_row_slice(
            4,
            4,
            &[
                cr(1.0),
                cr(0.0),
                cr(-1.0),
                cr(0.0),
                cr(0.0),
                cr(1.0),
                cr(0.0),
                cr(-1.0),
                cr(-1.0),
                cr(0.0),
                cr(0.0),
                cr(0.0),
                cr(0.0),
                cr(0.5),
                cr(0.0),
                cr(0.0),
            ],
        );
        let b = CMatrix::from_row_slice(
            4,
            4,
            &[
                cr(0.0),
                cr(0.0),
                cr(0.0),
                cr(0.0),
                cr(0.0),
                cr(0.0),
                cr(0.0),
                cr(0.0),
                cr(1.0),
                cr(0.0),
                cr(1.0),
                cr(0.0),
                cr(0.0),
                cr(1.0),
                cr(0.0),
                cr(1.0),
            ],
        );
        (a, b)
    }

    #[test]
    fn rank_checks() {
        let id = CMatrix::identity(3, 3);
        let zero = CMatrix::zeros(3, 3);
        assert!(check_rank(&id, &zero).unwrap());
        assert!(!check_rank(&zero, &zero).unwrap());
        let (a, b) = delta_line_pair();
        assert!(check_rank(&a, &b).unwrap());
    }

    #[test]
    fn projector_of_dirichlet() {
        let bc =
            BoundaryConditions::new(CMatrix::identity(2, 2), CMatrix::zeros(2, 2)).unwrap();
        let p = projection_complement(&bc);
        let mut expected = CMatrix::zeros(4, 4);
        expected[(0, 0)] = cr(1.0);
        expected[(1, 1)] = cr(1.0);
        assert!(frob_dist(&p, &expected) < 1e-14);
    }

    #[test]
    fn projector_properties_random() {
        let (a, b) = delta_line_pair();
        let bc = BoundaryConditions::new(a, b).unwrap();
        let p = bc.proj_complement();
        assert!(frob_dist(&(p * p), p) < 1e-12);
        assert!(frob_dist(&p.adjoint(), p) < 1e-12);
        let trace: C64 = (0..8).map(|k| p[(k, k)]).sum();
        assert!((trace - cr(4.0)).norm() < 1e-12);
        // annihilates the kernel basis
        assert!(max_abs(&(p * bc.kernel())) < 1e-12);
    }

    #[test]
    fn equivalence_by_scaling() {
        let (a, b) = delta_line_pair();
        let bc1 = BoundaryConditions::new(a.clone(), b.clone()).unwrap();
        let bc2 = BoundaryConditions::new(a.scale(2.0), b.scale(2.0)).unwrap();
        assert!(equivalent(&bc1, &bc2).unwrap());
        let dir = BoundaryConditions::new(CMatrix::identity(4, 4), CMatrix::zeros(4, 4)).unwrap();
        let neu = BoundaryConditions::new(CMatrix::zeros(4, 4), CMatrix::identity(4, 4)).unwrap();
        assert!(!equivalent(&dir, &neu).unwrap());
    }

    #[test]
    fn smatrix_dirichlet_neumann() {
        let dir = BoundaryConditions::new(CMatrix::identity(3, 3), CMatrix::zeros(3, 3)).unwrap();
        let neu = BoundaryConditions::new(CMatrix::zeros(3, 3), CMatrix::identity(3, 3)).unwrap();
        let k = c(0.7, 0.9);
        let s_dir = smatrix(k, &dir).unwrap();
        let s_neu = smatrix(k, &neu).unwrap();
        assert!(frob_dist(&s_dir, &CMatrix::identity(3, 3).scale(-1.0)) < 1e-14);
        assert!(frob_dist(&s_neu, &CMatrix::identity(3, 3)) < 1e-14);
    }

    #[test]
    fn smatrix_equal_for_equivalent_pairs() {
        let (a, b) = delta_line_pair();
        // left-multiply by a fixed invertible C
        let cmat = CMatrix::from_fn(4, 4, |r, s| {
            c(((r * 7 + s * 3) % 5) as f64 - 1.5, ((r + 2 * s) % 3) as f64 * 0.5)
        });
        assert!(linalg::rank(&cmat) == 4);
        let bc1 = BoundaryConditions::new(a.clone(), b.clone()).unwrap();
        let bc2 = BoundaryConditions::new(&cmat * &a, &cmat * &b).unwrap();
        assert!(equivalent(&bc1, &bc2).unwrap());
        let k = c(0.3, 1.1);
        let s1 = smatrix(k, &bc1).unwrap();
        let s2 = smatrix(k, &bc2).unwrap();
        assert!(frob_dist(&s1, &s2) < 1e-10);
    }
}
