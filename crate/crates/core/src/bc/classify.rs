//! Operator classification from the pair (A,B): accretivity, dissipativity,
//! self-adjointness and the contraction behaviour of the scattering matrix.

use serde::Serialize;

use crate::bc::{smatrix, BoundaryConditions};
use crate::error::Result;
use crate::linalg::{self, cr, CMatrix, I};

const SEMIDEF_TOL: f64 = 1e-9;
const CONTRACTION_TOL: f64 = 1e-9;

/// Default spectral points for the contraction probes.
pub const KAPPA_PROBES: [f64; 3] = [0.5, 1.0, 3.0];

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub rank_ok: bool,
    /// Re(A B^dagger) <= 0: sufficient for an m-accretive Laplace operator,
    /// equivalent to S(i kappa) being a contraction. Not necessary.
    pub re_ab_neg_semidef: bool,
    /// Im(A B^dagger) <= 0: equivalent to m-dissipativity.
    pub im_ab_neg_semidef: bool,
    /// A B^dagger = B A^dagger: self-adjoint Laplace operator.
    pub self_adjoint: bool,
    pub max_eig_re_ab: f64,
    pub max_eig_im_ab: f64,
    /// ||S(i kappa)|| <= 1 per probe point; None where A + ikB was singular.
    pub s_contraction: Vec<(f64, Option<bool>)>,
    /// ||S(-k)|| <= 1 per probe point.
    pub s_minus_k_contraction: Vec<(f64, Option<bool>)>,
    pub accretive_note: &'static str,
}

impl ClassificationReport {
    /// The sufficient accretivity certificate.
    pub fn sufficient_accretive(&self) -> bool {
        self.re_ab_neg_semidef
    }

    pub fn m_dissipative(&self) -> bool {
        self.im_ab_neg_semidef
    }
}

/// Classify a valid pair. Contraction probes run on [`KAPPA_PROBES`].
pub fn classify_operator(bc: &BoundaryConditions) -> Result<ClassificationReport> {
    let ab = bc.ab_dagger();
    let ba = bc.b() * bc.a().adjoint();
    let scale = 1.0 + linalg::op_norm(&ab);
    let max_eig_re_ab = linalg::max_eig_hermitian(&linalg::hermitian_part(&ab));
    let max_eig_im_ab = linalg::max_eig_hermitian(&linalg::imaginary_part(&ab));
    let self_adjoint = linalg::frob_dist(&ab, &ba) <= SEMIDEF_TOL * scale;

    let probe = |k: linalg::C64| -> Option<bool> {
        smatrix(k, bc)
            .ok()
            .map(|s: CMatrix| linalg::op_norm(&s) <= 1.0 + CONTRACTION_TOL)
    };
    let s_contraction = KAPPA_PROBES
        .iter()
        .map(|&kappa| (kappa, probe(cr(kappa) * I)))
        .collect();
    let s_minus_k_contraction = KAPPA_PROBES
        .iter()
        .map(|&k| (k, probe(cr(-k))))
        .collect();

    Ok(ClassificationReport {
        rank_ok: true,
        re_ab_neg_semidef: max_eig_re_ab <= SEMIDEF_TOL,
        im_ab_neg_semidef: max_eig_im_ab <= SEMIDEF_TOL,
        self_adjoint,
        max_eig_re_ab,
        max_eig_im_ab,
        s_contraction,
        s_minus_k_contraction,
        accretive_note:
            "Re(AB+) <= 0 is sufficient but not necessary for m-accretivity",
    })
}

/// The quadratic-form criterion: min eigenvalue of P_M (Re Q) P_M, which is
/// nonnegative exactly when Re(A B^dagger) <= 0.
pub fn re_form_min_eig(bc: &BoundaryConditions) -> f64 {
    let m = bc.dim();
    let mut re_q = CMatrix::zeros(2 * m, 2 * m);
    for j in 0..m {
        re_q[(j, m + j)] = cr(0.5);
        re_q[(m + j, j)] = cr(0.5);
    }
    let p_m = bc.proj_m();
    linalg::min_eig_hermitian(&(&p_m * re_q * &p_m))
}

/// Same for the imaginary part: min eigenvalue of P_M (Im Q) P_M.
pub fn im_form_min_eig(bc: &BoundaryConditions) -> f64 {
    let m = bc.dim();
    let mut im_q = CMatrix::zeros(2 * m, 2 * m);
    for j in 0..m {
        im_q[(j, m + j)] = cr(0.5) / I;
        im_q[(m + j, j)] = cr(-0.5) / I;
    }
    let p_m = bc.proj_m();
    linalg::min_eig_hermitian(&(&p_m * im_q * &p_m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bc::tests::delta_line_pair;
    use crate::bc::{make_vertex_conditions, Alpha, VertexKind};
    use crate::linalg::CVector;

    #[test]
    fn dirichlet_everything_nonpositive() {
        let bc =
            BoundaryConditions::new(CMatrix::identity(3, 3), CMatrix::zeros(3, 3)).unwrap();
        let rep = classify_operator(&bc).unwrap();
        assert!(rep.re_ab_neg_semidef && rep.im_ab_neg_semidef && rep.self_adjoint);
        assert!(rep.max_eig_re_ab.abs() < 1e-12);
        assert!(rep.s_contraction.iter().all(|(_, b)| *b == Some(true)));
    }

    #[test]
    fn delta_line_pair_classification() {
        let (a, b) = delta_line_pair();
        let ab = &a * b.adjoint();
        // only nonzero entries are (2,2) = -1 and (3,3) = 1/2, exactly
        for r in 0..4 {
            for c in 0..4 {
                let want = match (r, c) {
                    (2, 2) => cr(-1.0),
                    (3, 3) => cr(0.5),
                    _ => cr(0.0),
                };
                assert_eq!(ab[(r, c)], want);
            }
        }
        let bc = BoundaryConditions::new(a, b).unwrap();
        let rep = classify_operator(&bc).unwrap();
        assert!(rep.self_adjoint);
        assert!(!rep.re_ab_neg_semidef);
        assert!((rep.max_eig_re_ab - 0.5).abs() < 1e-12);
    }

    #[test]
    fn contraction_for_nonpositive_robin_family() {
        // generic(alpha = 0, g = c h) with Re c <= 0 gives S contractions
        let n = 3;
        let g = CVector::from_element(n, linalg::c(-0.4, 0.7));
        let vc = make_vertex_conditions(
            &VertexKind::Generic {
                alpha: Alpha::Zero,
                g,
            },
            "v",
            n,
        )
        .unwrap();
        let bc = vc.as_boundary_conditions().unwrap();
        for kappa in [1.0, 10.0] {
            let s = smatrix(cr(kappa) * I, &bc).unwrap();
            assert!(linalg::op_norm(&s) <= 1.0 + 1e-9);
        }
        assert!(classify_operator(&bc).unwrap().re_ab_neg_semidef);
    }

    #[test]
    fn form_criterion_matches_re_ab() {
        let (a, b) = delta_line_pair();
        let bc = BoundaryConditions::new(a, b).unwrap();
        // indefinite case: form must have a negative direction
        assert!(re_form_min_eig(&bc) < -1e-9);
        let dir =
            BoundaryConditions::new(CMatrix::identity(2, 2), CMatrix::zeros(2, 2)).unwrap();
        assert!(re_form_min_eig(&dir) >= -1e-9);
    }
}
