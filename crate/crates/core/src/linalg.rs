//! Small helpers for dense complex linear algebra on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = nalgebra::DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Serde adapter writing an optional complex number as a `[re, im]` pair.
pub mod serde_c64_opt {
    use super::C64;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &Option<C64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(z) => s.serialize_some(&[z.re, z.im]),
            None => s.serialize_none(),
        }
    }
}

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Rank threshold: 100 * machine epsilon * largest singular value.
pub fn rank_threshold(sigma_max: f64) -> f64 {
    100.0 * f64::EPSILON * sigma_max
}

/// Numerical rank via SVD with the relative threshold above.
pub fn rank(m: &CMatrix) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let tol = rank_threshold(sv[0]);
    sv.iter().filter(|&&s| s > tol).count()
}

/// Orthonormal basis of the kernel, as matrix columns (may have zero columns).
///
/// Wide matrices are padded with zero rows first: nalgebra's SVD is thin, and
/// the kernel needs the full right singular basis.
pub fn kernel_basis(m: &CMatrix) -> CMatrix {
    let ncols = m.ncols();
    let square = if m.nrows() >= ncols {
        m.clone()
    } else {
        let mut padded = CMatrix::zeros(ncols, ncols);
        padded.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
        padded
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("svd requested v_t");
    let tol = rank_threshold(svd.singular_values[0]);
    let r = svd.singular_values.iter().filter(|&&s| s > tol).count();
    // rows r.. of V^H span the kernel; conjugate-transpose them into columns
    let mut basis = CMatrix::zeros(ncols, ncols - r);
    for (col, row) in (r..v_t.nrows()).enumerate() {
        for j in 0..ncols {
            basis[(j, col)] = v_t[(row, j)].conj();
        }
    }
    basis
}

/// Largest singular value (operator 2-norm).
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values[0]
}

/// Smallest singular value.
pub fn sigma_min(m: &CMatrix) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    sv.as_slice().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Hermitian part (M + M^dagger)/2.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Skew part mapped to a Hermitian matrix: Im M = (M - M^dagger)/(2i).
pub fn imaginary_part(m: &CMatrix) -> CMatrix {
    let d = m - m.adjoint();
    d.map(|z| z / (2.0 * I))
}

/// Eigenvalues of a Hermitian matrix (input must already be Hermitian).
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let es = m.clone().symmetric_eigen();
    es.eigenvalues.as_slice().to_vec()
}

pub fn max_eig_hermitian(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn min_eig_hermitian(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// All eigenvalues of a general complex matrix via its Schur form.
pub fn eigenvalues(m: &CMatrix) -> Vec<C64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let schur = m
        .clone()
        .try_schur(1e-14, 100_000)
        .unwrap_or_else(|| m.clone().schur());
    let t = schur.unpack().1;
    (0..n).map(|k| t[(k, k)]).collect()
}

/// Solve M X = RHS by LU; `None` when M is singular to working precision.
pub fn solve(m: &CMatrix, rhs: &CMatrix) -> Option<CMatrix> {
    m.clone().lu().solve(rhs)
}

pub fn inverse(m: &CMatrix) -> Option<CMatrix> {
    m.clone().try_inverse()
}

/// Condition number estimate sigma_max / sigma_min.
pub fn cond(m: &CMatrix) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &s in sv.iter() {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Rank-one operator u <w, .> , i.e. the matrix u w^dagger.
pub fn outer(u: &CVector, w: &CVector) -> CMatrix {
    u * w.adjoint()
}

/// Frobenius norm of the difference.
pub fn frob_dist(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_of_wide_matrix() {
        // (A,B) = (I, 0) on C^2: kernel of the 2x4 block is {0} + C^2
        let m = CMatrix::from_row_slice(
            2,
            4,
            &[
                cr(1.0),
                cr(0.0),
                cr(0.0),
                cr(0.0),
                cr(0.0),
                cr(1.0),
                cr(0.0),
                cr(0.0),
            ],
        );
        let k = kernel_basis(&m);
        assert_eq!(k.ncols(), 2);
        assert!(max_abs(&(&m * &k)) < 1e-14);
        // orthonormal
        let g = k.adjoint() * &k;
        assert!(frob_dist(&g, &CMatrix::identity(2, 2)) < 1e-14);
    }

    #[test]
    fn rank_and_norms() {
        let m = CMatrix::from_row_slice(2, 2, &[cr(1.0), cr(2.0), cr(2.0), cr(4.0)]);
        assert_eq!(rank(&m), 1);
        assert!((op_norm(&m) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn hermitian_eigs_of_complex_matrix() {
        let m = CMatrix::from_row_slice(2, 2, &[cr(1.0), c(0.0, 1.0), c(0.0, -1.0), cr(1.0)]);
        let mut e = hermitian_eigenvalues(&m);
        e.sort_by(f64::total_cmp);
        assert!((e[0] - 0.0).abs() < 1e-12 && (e[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn general_eigenvalues_rank_one_shift() {
        // -I + h g^dagger has eigenvalues -1 and -1 + <g,h>
        let h = CVector::from_element(3, cr(1.0));
        let g = CVector::from_fn(3, |i, _| c(0.3 + i as f64, -0.2));
        let m = outer(&h, &g) - CMatrix::identity(3, 3);
        let mut eigs = eigenvalues(&m);
        let target = g.dotc(&h) - cr(1.0);
        eigs.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        assert!((eigs[2] - target).norm() < 1e-10);
    }
}
