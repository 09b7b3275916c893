//! Locality of boundary conditions and the canonical continuity forms.

use crate::bc::{smatrix_raw, Alpha, BoundaryConditions, VertexConditions};
use crate::error::{Error, Result};
use crate::graph::MetricGraph;
use crate::linalg::{self, cr, CMatrix, CVector, C64, I};

/// Outcome of intersecting M(A,B) with the per-vertex subspaces.
#[derive(Debug, Clone)]
pub enum LocalDecomposition {
    Local(Vec<VertexConditions>),
    NotLocal,
}

/// Split M(A,B) over the vertices. Local conditions decompose into blocks
/// whose kernels are the intersections `M_v = M intersect dL_v`; otherwise
/// the dimensions do not add up to m.
pub fn decompose_local(g: &MetricGraph, bc: &BoundaryConditions) -> Result<LocalDecomposition> {
    let m = bc.dim();
    if m != g.boundary_dim() {
        return Err(Error::DimensionMismatch {
            expected: g.boundary_dim(),
            got: m,
        });
    }
    let kernel = bc.kernel(); // 2m x m
    let mut blocks = Vec::new();
    let mut total = 0usize;
    for v in 0..g.vertex_count() {
        let deg = g.degree(v);
        let d_ix = doubled_indices(g, v, m);
        // coefficient vectors c with (kernel c) supported on dL_v
        let complement_rows: Vec<usize> =
            (0..2 * m).filter(|r| !d_ix.contains(r)).collect();
        let restricted = select_rows(kernel, &complement_rows);
        let coeff = linalg::kernel_basis(&restricted);
        let dim_v = coeff.ncols();
        total += dim_v;
        if dim_v != deg {
            continue; // cannot be local; keep counting for the verdict
        }
        let basis_full = kernel * &coeff; // 2m x deg, supported on dL_v
        let basis = select_rows(&basis_full, &d_ix); // 2deg x deg
        // rows of (A_v, B_v) span the orthogonal complement of M_v
        let complement = linalg::kernel_basis(&basis.adjoint()); // 2deg x deg
        let rows = complement.adjoint(); // deg x 2deg
        let a = rows.view((0, 0), (deg, deg)).into_owned();
        let b = rows.view((0, deg), (deg, deg)).into_owned();
        blocks.push(VertexConditions {
            vertex: g.vertex_id(v).to_string(),
            a,
            b,
        });
    }
    if total == m && blocks.len() == g.vertex_count() {
        Ok(LocalDecomposition::Local(blocks))
    } else {
        Ok(LocalDecomposition::NotLocal)
    }
}

fn doubled_indices(g: &MetricGraph, v: usize, m: usize) -> Vec<usize> {
    let mut ix: Vec<usize> = g.layout().vertex_indices(v).to_vec();
    let upper: Vec<usize> = ix.iter().map(|&k| k + m).collect();
    ix.extend(upper);
    ix
}

fn select_rows(m: &CMatrix, rows: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

/// Canonical shape of a vertex condition within the continuity class.
#[derive(Debug, Clone)]
pub enum ContinuityForm {
    /// B_v = 0 up to equivalence.
    Dirichlet,
    /// A_v = I + (alpha/deg) h<h,.>, B_v = h<g,.>. For alpha = -1 the vector
    /// g is normalized so that <g, h> = 1.
    Generic {
        alpha: Alpha,
        g: CVector,
        /// Equivalent delta-style datum (gamma, p): continuity rows plus
        /// `sum_j p_j psi'_j = gamma psi(v)`.
        gamma: C64,
        p: CVector,
    },
    /// Some kernel element has boundary values not proportional to h.
    NotContinuous,
}

impl ContinuityForm {
    pub fn is_continuous(&self) -> bool {
        !matches!(self, ContinuityForm::NotContinuous)
    }

    /// Rebuild (A_v, B_v) from the form.
    pub fn matrices(&self, n: usize) -> Option<(CMatrix, CMatrix)> {
        match self {
            ContinuityForm::Dirichlet => {
                Some((CMatrix::identity(n, n), CMatrix::zeros(n, n)))
            }
            ContinuityForm::Generic { alpha, g, .. } => {
                let h = CVector::from_element(n, cr(1.0));
                let a = CMatrix::identity(n, n)
                    + linalg::outer(&h, &h).scale(alpha.value() / n as f64);
                let b = linalg::outer(&h, g);
                Some((a, b))
            }
            ContinuityForm::NotContinuous => None,
        }
    }
}

/// The continuity form of one vertex block.
#[derive(Debug, Clone)]
pub struct VertexForm {
    pub vertex: String,
    pub degree: usize,
    pub form: ContinuityForm,
}

const FORM_TOL: f64 = 1e-9;

/// Classify each vertex block against the continuity theorem: Dirichlet,
/// the rank-one family (alpha, g), or not continuity preserving.
pub fn continuity_form(g: &MetricGraph, conds: &[VertexConditions]) -> Result<Vec<VertexForm>> {
    let mut out = Vec::new();
    for v in 0..g.vertex_count() {
        let id = g.vertex_id(v);
        let vc = conds
            .iter()
            .find(|c| c.vertex == id)
            .ok_or_else(|| Error::MissingVertex(id.to_string()))?;
        let deg = g.degree(v);
        if vc.degree() != deg {
            return Err(Error::DegreeMismatch {
                vertex: id.to_string(),
                degree: vc.degree(),
                expected: deg,
            });
        }
        out.push(VertexForm {
            vertex: id.to_string(),
            degree: deg,
            form: vertex_form(&vc.a, &vc.b)?,
        });
    }
    Ok(out)
}

/// Continuity forms straight from a global pair; fails on nonlocal input.
pub fn continuity_form_global(
    g: &MetricGraph,
    bc: &BoundaryConditions,
) -> Result<Vec<VertexForm>> {
    match decompose_local(g, bc)? {
        LocalDecomposition::Local(blocks) => continuity_form(g, &blocks),
        LocalDecomposition::NotLocal => Err(Error::NotLocalInput),
    }
}

fn vertex_form(a: &CMatrix, b: &CMatrix) -> Result<ContinuityForm> {
    let n = a.nrows();
    let scale = linalg::op_norm(a).max(linalg::op_norm(b));
    if linalg::op_norm(b) <= 1e-12 * scale {
        return Ok(ContinuityForm::Dirichlet);
    }
    let h = CVector::from_element(n, cr(1.0));

    // every kernel element must have its value part proportional to h
    let kernel = linalg::kernel_basis(&crate::bc::concat_ab(a, b));
    if kernel.ncols() != n {
        return Err(Error::RankDeficient {
            rank: 2 * n - kernel.ncols(),
            m: n,
        });
    }
    let top = kernel.view((0, 0), (n, kernel.ncols())).into_owned();
    let proj_off_h = &top - linalg::outer(&h, &h).scale(1.0 / n as f64) * &top;
    if linalg::op_norm(&proj_off_h) > FORM_TOL * (1.0 + linalg::op_norm(&top)) {
        return Ok(ContinuityForm::NotContinuous);
    }

    // alpha from k-independence of S at two spectral points
    let (kappa1, s1, s2) = sample_smatrix_pair(a, b)?;
    let alpha = if linalg::frob_dist(&s1, &s2) <= FORM_TOL * (1.0 + linalg::op_norm(&s1)) {
        Alpha::MinusOne
    } else {
        Alpha::Zero
    };

    // rank-one extraction of g from R = S + I
    let r = &s1 + CMatrix::identity(n, n);
    if linalg::op_norm(&r) <= 1e-12 {
        // S = -I identically: Dirichlet written with a nonzero B cannot
        // occur at maximal rank, but keep the honest answer
        return Ok(ContinuityForm::Dirichlet);
    }
    let rho = h.dotc(&(&r * &h)) / cr(n as f64);
    let (lambda, g) = match alpha {
        Alpha::Zero => {
            let lambda = cr(kappa1) * (rho - cr(2.0));
            if lambda.norm() < 1e-13 {
                return Ok(ContinuityForm::Generic {
                    alpha,
                    g: CVector::zeros(n),
                    gamma: cr(1.0),
                    p: CVector::zeros(n),
                });
            }
            let g = r.adjoint() * &h / (lambda.conj() * cr(n as f64));
            (lambda, g)
        }
        Alpha::MinusOne => {
            if (rho - cr(2.0)).norm() > 1e-7 * (1.0 + rho.norm()) {
                return Ok(ContinuityForm::NotContinuous);
            }
            let g = r.adjoint() * &h / cr(2.0 * n as f64);
            (cr(2.0), g)
        }
    };
    // the rank-one residual must vanish for a genuine continuity form
    let recon = linalg::outer(&h, &g) * lambda;
    if linalg::frob_dist(&r, &recon) > 1e-7 * (1.0 + linalg::op_norm(&r)) {
        return Ok(ContinuityForm::NotContinuous);
    }
    let (gamma, p) = canonical_gamma_p(alpha, &g, n);
    Ok(ContinuityForm::Generic { alpha, g, gamma, p })
}

/// Evaluate S at two imaginary spectral points, skipping the finite
/// exceptional set where A + ikB is singular.
fn sample_smatrix_pair(a: &CMatrix, b: &CMatrix) -> Result<(f64, CMatrix, CMatrix)> {
    for (k1, k2) in [(1.0, 2.0), (0.5, 1.5), (0.75, 2.5), (3.0, 4.0)] {
        let s1 = smatrix_raw(cr(k1) * I, a, b);
        let s2 = smatrix_raw(cr(k2) * I, a, b);
        if let (Ok(s1), Ok(s2)) = (s1, s2) {
            return Ok((k1, s1, s2));
        }
    }
    Err(Error::SingularAtK { re: 0.0, im: 1.0 })
}

/// The equivalent (gamma, p) datum, scaled so that `<p, h> = deg(v)` when
/// that pairing is nonzero (delta-type conditions then come out as p = h).
fn canonical_gamma_p(alpha: Alpha, g: &CVector, n: usize) -> (C64, CVector) {
    let h = CVector::from_element(n, cr(1.0));
    let (gamma0, p0): (C64, CVector) = match alpha {
        Alpha::Zero => (cr(-1.0), g.map(|z| z.conj())),
        Alpha::MinusOne => (cr(0.0), g.map(|z| z.conj()).scale(n as f64)),
    };
    let pairing = p0.dotc(&h);
    if pairing.norm() > 1e-12 * (1.0 + p0.norm()) {
        let s = (cr(n as f64) / pairing).conj();
        (gamma0 * s, p0.map(|z| z * s))
    } else if p0.norm() > 0.0 {
        let j = (0..n)
            .max_by(|&i, &j| p0[i].norm().total_cmp(&p0[j].norm()))
            .unwrap();
        let s = p0[j].conj() / p0[j].norm() * cr((n as f64).sqrt() / p0.norm());
        (gamma0 * s, p0.map(|z| z * s))
    } else {
        (gamma0, p0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bc::{
        assemble_global, equivalent, make_vertex_conditions, VertexKind,
    };
    use crate::graph::{build_graph, GraphSpec};

    fn star(n: usize) -> MetricGraph {
        build_graph(&GraphSpec {
            vertices: vec!["c".into()],
            external_edges: (0..n).map(|k| (format!("e{k}"), "c".into())).collect(),
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn decompose_roundtrip() {
        let g = build_graph(&GraphSpec {
            vertices: vec!["v0".into(), "v1".into()],
            internal_edges: vec![("i".into(), "v0".into(), "v1".into(), 1.0)],
            external_edges: vec![("e1".into(), "v0".into()), ("e2".into(), "v1".into())],
        })
        .unwrap();
        let conds = vec![
            make_vertex_conditions(&VertexKind::Delta { gamma: cr(1.0) }, "v0", 2).unwrap(),
            make_vertex_conditions(&VertexKind::Dirichlet, "v1", 2).unwrap(),
        ];
        let bc = assemble_global(&g, &conds).unwrap();
        let LocalDecomposition::Local(blocks) = decompose_local(&g, &bc).unwrap() else {
            panic!("expected local");
        };
        for vc in blocks {
            let orig = conds.iter().find(|c| c.vertex == vc.vertex).unwrap();
            assert!(equivalent(
                &vc.as_boundary_conditions().unwrap(),
                &orig.as_boundary_conditions().unwrap()
            )
            .unwrap());
        }
    }

    #[test]
    fn left_multiplied_global_still_local() {
        let g = star(3);
        let conds =
            vec![make_vertex_conditions(&VertexKind::Standard, "c", 3).unwrap()];
        let bc = assemble_global(&g, &conds).unwrap();
        let cmat = CMatrix::from_row_slice(
            3,
            3,
            &[
                cr(2.0),
                cr(1.0),
                cr(0.0),
                cr(0.0),
                cr(1.0),
                cr(1.0),
                C64::new(0.0, 1.0),
                cr(0.0),
                cr(1.0),
            ],
        );
        let bc2 = BoundaryConditions::new(&cmat * bc.a(), &cmat * bc.b()).unwrap();
        let LocalDecomposition::Local(blocks) = decompose_local(&g, &bc2).unwrap() else {
            panic!("expected local");
        };
        assert!(equivalent(
            &blocks[0].as_boundary_conditions().unwrap(),
            &conds[0].as_boundary_conditions().unwrap()
        )
        .unwrap());
    }

    #[test]
    fn kirchhoff_form_is_standard() {
        let g = star(4);
        let conds =
            vec![make_vertex_conditions(&VertexKind::Standard, "c", 4).unwrap()];
        let forms = continuity_form(&g, &conds).unwrap();
        let ContinuityForm::Generic { alpha, g: gv, gamma, p } = &forms[0].form else {
            panic!("expected generic form");
        };
        assert_eq!(*alpha, Alpha::MinusOne);
        // g proportional to h with <g,h> = 1 means g = h/4
        for z in gv.iter() {
            assert!((z - cr(0.25)).norm() < 1e-9);
        }
        assert!(gamma.norm() < 1e-9);
        for z in p.iter() {
            assert!((z - cr(1.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn delta_two_form() {
        let g = star(2);
        let conds =
            vec![make_vertex_conditions(&VertexKind::Delta { gamma: cr(2.0) }, "c", 2).unwrap()];
        let forms = continuity_form(&g, &conds).unwrap();
        let ContinuityForm::Generic { alpha, g: gv, gamma, p } = &forms[0].form else {
            panic!("expected generic form");
        };
        assert_eq!(*alpha, Alpha::Zero);
        for z in gv.iter() {
            assert!((z - cr(-0.5)).norm() < 1e-9, "expected g = -h/2, got {z}");
        }
        assert!((gamma - cr(2.0)).norm() < 1e-8);
        for z in p.iter() {
            assert!((z - cr(1.0)).norm() < 1e-8);
        }
        // round trip through (Av:Bv)
        let (a2, b2) = forms[0].form.matrices(2).unwrap();
        let rebuilt = BoundaryConditions::new(a2, b2).unwrap();
        let orig = conds[0].as_boundary_conditions().unwrap();
        assert!(equivalent(&rebuilt, &orig).unwrap());
    }

    #[test]
    fn decoupled_robin_is_not_continuous() {
        let g = star(2);
        let vc = VertexConditions {
            vertex: "c".into(),
            a: CMatrix::identity(2, 2),
            b: CMatrix::identity(2, 2),
        };
        let forms = continuity_form(&g, &[vc]).unwrap();
        assert!(matches!(forms[0].form, ContinuityForm::NotContinuous));
    }

    #[test]
    fn dirichlet_detected() {
        let g = star(3);
        let vc = make_vertex_conditions(&VertexKind::Dirichlet, "c", 3).unwrap();
        let forms = continuity_form(&g, &[vc]).unwrap();
        assert!(matches!(forms[0].form, ContinuityForm::Dirichlet));
    }
}
