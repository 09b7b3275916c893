//! Positivity classes, substochasticity and the Feller criteria, all stated
//! on the continuity forms of the vertex conditions.

use serde::Serialize;

use crate::bc::local::{ContinuityForm, VertexForm};
use crate::bc::{smatrix_raw, Alpha};
use crate::error::{Error, Result};
use crate::graph::MetricGraph;
use crate::linalg::{cr, CMatrix, CVector, C64, I};

const ENTRY_TOL: f64 = 1e-12;

/// Sign structure of a complex vector, up to a global phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignClass {
    Zero,
    Definite { strict: bool },
    Mixed,
}

/// Classify whether some phase rotation makes the vector entrywise >= 0.
pub fn sign_class(g: &CVector) -> SignClass {
    let scale = g.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale <= 0.0 {
        return SignClass::Zero;
    }
    let tol = 1e-10 * scale;
    let j = (0..g.len())
        .max_by(|&i, &j| g[i].norm().total_cmp(&g[j].norm()))
        .unwrap();
    let phase = g[j].conj() / g[j].norm();
    let mut strict = true;
    for z in g.iter() {
        let w = phase * z;
        if w.im.abs() > tol || w.re < -tol {
            return SignClass::Mixed;
        }
        if w.re <= tol {
            strict = false;
        }
    }
    SignClass::Definite { strict }
}

/// Is the vector entrywise real and <= 0 (within tolerance)?
fn real_nonpositive(g: &CVector, strict: bool) -> bool {
    let scale = 1.0 + g.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = 1e-10 * scale;
    g.iter().all(|z| {
        z.im.abs() <= tol && if strict { z.re < -tol } else { z.re <= tol }
    })
}

/// Sign structure for a canonically scaled vector: entries must be real and
/// of one sign (either one), no phase freedom.
pub fn real_sign_class(g: &CVector) -> SignClass {
    let scale = g.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale <= 0.0 {
        return SignClass::Zero;
    }
    let tol = 1e-10 * scale;
    if g.iter().any(|z| z.im.abs() > tol) {
        return SignClass::Mixed;
    }
    let has_pos = g.iter().any(|z| z.re > tol);
    let has_neg = g.iter().any(|z| z.re < -tol);
    if has_pos && has_neg {
        return SignClass::Mixed;
    }
    let strict = g.iter().all(|z| z.re.abs() > tol);
    SignClass::Definite { strict }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PositivityClass {
    StrictlyPositive,
    Positive,
    NotPositive,
}

#[derive(Debug, Clone, Serialize)]
pub struct VertexPositivity {
    pub vertex: String,
    pub class: PositivityClass,
    /// Entrywise check of I + S(i kappa; M_v) over the large-kappa grid.
    pub verified_on_grid: bool,
}

/// The kappa grid used for "all sufficiently large kappa" checks:
/// max(kappa0, 1) * 2^j for j = 0..6, with kappa0 = 2/|<g,h>| when defined.
pub fn kappa_grid(g: Option<&CVector>) -> Vec<f64> {
    let kappa0 = match g {
        Some(gv) => {
            let h = CVector::from_element(gv.len(), cr(1.0));
            let pairing = gv.dotc(&h).norm();
            if pairing > 1e-14 {
                2.0 / pairing
            } else {
                1.0
            }
        }
        None => 1.0,
    };
    let base = kappa0.max(1.0);
    (0..7).map(|j| base * 2f64.powi(j)).collect()
}

/// Per-vertex positivity of the subspace: is I + S(i kappa; M_v) entrywise
/// nonnegative for all large kappa? Decided from the sign structure of g and
/// verified numerically on the grid.
pub fn positivity_class(forms: &[VertexForm]) -> Result<Vec<VertexPositivity>> {
    let mut out = Vec::new();
    for f in forms {
        let n = f.degree;
        let (class, gv) = match &f.form {
            ContinuityForm::NotContinuous => {
                return Err(Error::NotContinuousInput(f.vertex.clone()))
            }
            ContinuityForm::Dirichlet => (PositivityClass::Positive, None),
            ContinuityForm::Generic { alpha, g, .. } => {
                // alpha = 0 fixes g itself; alpha = -1 only its direction
                let structure = match alpha {
                    Alpha::Zero => real_sign_class(g),
                    Alpha::MinusOne => sign_class(g),
                };
                let class = match structure {
                    SignClass::Zero => PositivityClass::Positive,
                    SignClass::Definite { strict: true } => PositivityClass::StrictlyPositive,
                    SignClass::Definite { strict: false } => PositivityClass::Positive,
                    SignClass::Mixed => PositivityClass::NotPositive,
                };
                (class, Some(g.clone()))
            }
        };
        let verified = verify_entrywise(&f.form, n, gv.as_ref(), class);
        out.push(VertexPositivity {
            vertex: f.vertex.clone(),
            class,
            verified_on_grid: verified,
        });
    }
    Ok(out)
}

fn verify_entrywise(
    form: &ContinuityForm,
    n: usize,
    g: Option<&CVector>,
    class: PositivityClass,
) -> bool {
    let Some((a, b)) = form.matrices(n) else {
        return false;
    };
    let grid = kappa_grid(g);
    let mut nonneg_everywhere = true;
    for kappa in grid {
        let Ok(s) = smatrix_raw(cr(kappa) * I, &a, &b) else {
            continue;
        };
        let ips = &s + CMatrix::identity(n, n);
        let ok = ips
            .iter()
            .all(|z| z.im.abs() <= 1e-9 && z.re >= -ENTRY_TOL);
        if !ok {
            nonneg_everywhere = false;
        }
    }
    match class {
        PositivityClass::NotPositive => !nonneg_everywhere,
        _ => nonneg_everywhere,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SubstochasticReport {
    pub vertex: String,
    pub substochastic: bool,
    /// For alpha = 0 the scalar with S(i kappa) h = factor * h.
    #[serde(with = "crate::linalg::serde_c64_opt")]
    pub factor: Option<C64>,
}

/// Check S(i kappa; M_v) h_v <= h_v per vertex. For alpha = -1 the vector h
/// is fixed exactly; for alpha = 0 it holds exactly when <g, h> <= 0.
pub fn substochastic_check(forms: &[VertexForm], kappa: f64) -> Result<Vec<SubstochasticReport>> {
    let mut out = Vec::new();
    for f in forms {
        let rep = match &f.form {
            ContinuityForm::NotContinuous => {
                return Err(Error::NotContinuousInput(f.vertex.clone()))
            }
            ContinuityForm::Dirichlet => SubstochasticReport {
                vertex: f.vertex.clone(),
                substochastic: true,
                factor: Some(cr(-1.0)),
            },
            ContinuityForm::Generic { alpha, g, .. } => {
                let h = CVector::from_element(f.degree, cr(1.0));
                match alpha {
                    Alpha::MinusOne => SubstochasticReport {
                        vertex: f.vertex.clone(),
                        substochastic: true,
                        factor: None,
                    },
                    Alpha::Zero => {
                        let pairing = g.dotc(&h);
                        let factor = (cr(kappa) * pairing + cr(1.0))
                            / (cr(kappa) * pairing - cr(1.0));
                        let ok = pairing.im.abs() <= 1e-10 * (1.0 + pairing.norm())
                            && pairing.re <= 1e-10 * (1.0 + pairing.norm());
                        SubstochasticReport {
                            vertex: f.vertex.clone(),
                            substochastic: ok,
                            factor: Some(factor),
                        }
                    }
                }
            }
        };
        out.push(rep);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FellerVerdict {
    /// Star graphs: the characterization is if-and-only-if.
    YesIff,
    /// General tadpole-free graphs: the sufficient criterion fired.
    YesSufficient,
    No,
    /// Outside the sufficient set on general graphs the paper leaves the
    /// question open.
    Unknown,
}

/// Decide whether the conditions generate a Feller semigroup on C_0.
///
/// With no internal edges this is an exact characterization; with internal
/// edges only a sufficient criterion is available and failures report
/// `Unknown` rather than `No`.
pub fn feller_check(g: &MetricGraph, forms: &[VertexForm]) -> Result<FellerVerdict> {
    let star_case = g.n_internal() == 0;
    if !star_case && g.has_tadpole() {
        return Err(Error::TadpolePresent);
    }
    let mut all_ok = true;
    for f in forms {
        let ok = match &f.form {
            ContinuityForm::NotContinuous => false,
            ContinuityForm::Dirichlet => {
                // Dirichlet = generic(alpha = 0, g = 0); allowed in both
                // branches
                true
            }
            ContinuityForm::Generic { alpha, g: gv, .. } => match (star_case, alpha) {
                (true, Alpha::Zero) => real_nonpositive(gv, false),
                (true, Alpha::MinusOne) => {
                    // scale-free datum: some equivalent representative is
                    // nonpositive iff the direction is sign-definite
                    sign_class(gv) != SignClass::Mixed && gv.norm() > 0.0
                }
                (false, Alpha::Zero) => real_nonpositive(gv, true),
                (false, Alpha::MinusOne) => {
                    matches!(sign_class(gv), SignClass::Definite { strict: true })
                }
            },
        };
        if !ok {
            all_ok = false;
        }
    }
    Ok(match (star_case, all_ok) {
        (true, true) => FellerVerdict::YesIff,
        (true, false) => FellerVerdict::No,
        (false, true) => FellerVerdict::YesSufficient,
        (false, false) => FellerVerdict::Unknown,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bc::local::continuity_form;
    use crate::bc::{make_vertex_conditions, VertexKind};
    use crate::graph::{build_graph, GraphSpec};

    fn star(n: usize) -> MetricGraph {
        build_graph(&GraphSpec {
            vertices: vec!["c".into()],
            external_edges: (0..n).map(|k| (format!("e{k}"), "c".into())).collect(),
            ..Default::default()
        })
        .unwrap()
    }

    fn generic_forms(g: &MetricGraph, kind: &VertexKind) -> Vec<VertexForm> {
        let conds: Vec<_> = (0..g.vertex_count())
            .map(|v| {
                make_vertex_conditions(kind, g.vertex_id(v), g.degree(v)).unwrap()
            })
            .collect();
        continuity_form(g, &conds).unwrap()
    }

    #[test]
    fn kirchhoff_strictly_positive() {
        let g = star(4);
        let forms = generic_forms(&g, &VertexKind::Standard);
        let pos = positivity_class(&forms).unwrap();
        assert_eq!(pos[0].class, PositivityClass::StrictlyPositive);
        assert!(pos[0].verified_on_grid);
        // I + S = (2/n) * all-ones
        let (a, b) = forms[0].form.matrices(4).unwrap();
        let s = smatrix_raw(cr(3.0) * I, &a, &b).unwrap();
        let ips = &s + CMatrix::identity(4, 4);
        for z in ips.iter() {
            assert!((z - cr(0.5)).norm() < 1e-12);
        }
    }

    #[test]
    fn mixed_sign_not_positive() {
        let g = star(2);
        let kind = VertexKind::Generic {
            alpha: Alpha::Zero,
            g: CVector::from_vec(vec![cr(1.0), cr(-1.0)]),
        };
        let forms = generic_forms(&g, &kind);
        let pos = positivity_class(&forms).unwrap();
        assert_eq!(pos[0].class, PositivityClass::NotPositive);
        assert!(pos[0].verified_on_grid);
    }

    #[test]
    fn dirichlet_positive_with_zero_ips() {
        let g = star(2);
        let forms = generic_forms(&g, &VertexKind::Dirichlet);
        let pos = positivity_class(&forms).unwrap();
        assert_eq!(pos[0].class, PositivityClass::Positive);
    }

    #[test]
    fn substochastic_cases() {
        let g = star(2);
        // <g,h> = -1: factor 0 at kappa = 1
        let kind = VertexKind::Generic {
            alpha: Alpha::Zero,
            g: CVector::from_element(2, cr(-0.5)),
        };
        let forms = generic_forms(&g, &kind);
        let rep = substochastic_check(&forms, 1.0).unwrap();
        assert!(rep[0].substochastic);
        assert!(rep[0].factor.unwrap().norm() < 1e-12);

        // <g,h> = +1: factor 3 at kappa = 2
        let kind = VertexKind::Generic {
            alpha: Alpha::Zero,
            g: CVector::from_element(2, cr(0.5)),
        };
        let forms = generic_forms(&g, &kind);
        let rep = substochastic_check(&forms, 2.0).unwrap();
        assert!(!rep[0].substochastic);
        assert!((rep[0].factor.unwrap() - cr(3.0)).norm() < 1e-12);

        // alpha = -1 is always substochastic with S h = h
        let forms = generic_forms(&g, &VertexKind::Standard);
        let rep = substochastic_check(&forms, 0.7).unwrap();
        assert!(rep[0].substochastic);
        let (a, b) = forms[0].form.matrices(2).unwrap();
        let s = smatrix_raw(cr(0.7) * I, &a, &b).unwrap();
        let h = CVector::from_element(2, cr(1.0));
        assert!(((&s * &h) - &h).norm() < 1e-12);
    }

    #[test]
    fn feller_star_cases() {
        let g = star(3);
        let neg = VertexKind::Generic {
            alpha: Alpha::MinusOne,
            g: CVector::from_element(3, cr(-1.0)),
        };
        let forms = generic_forms(&g, &neg);
        assert_eq!(feller_check(&g, &forms).unwrap(), FellerVerdict::YesIff);

        let mixed = VertexKind::Generic {
            alpha: Alpha::MinusOne,
            g: CVector::from_vec(vec![cr(1.0), cr(-1.0), cr(1.0)]),
        };
        let forms = generic_forms(&g, &mixed);
        assert_eq!(feller_check(&g, &forms).unwrap(), FellerVerdict::No);
    }

    #[test]
    fn feller_general_graph_sufficient() {
        let g = build_graph(&GraphSpec {
            vertices: vec!["v0".into(), "v1".into()],
            internal_edges: vec![("i".into(), "v0".into(), "v1".into(), 1.0)],
            external_edges: vec![("e1".into(), "v0".into()), ("e2".into(), "v1".into())],
        })
        .unwrap();
        let kind = VertexKind::Generic {
            alpha: Alpha::Zero,
            g: CVector::from_element(2, cr(-1.0)),
        };
        let forms = generic_forms(&g, &kind);
        assert_eq!(
            feller_check(&g, &forms).unwrap(),
            FellerVerdict::YesSufficient
        );
        // nonnegative g on a general graph only yields Unknown
        let kind = VertexKind::Generic {
            alpha: Alpha::Zero,
            g: CVector::from_element(2, cr(1.0)),
        };
        let forms = generic_forms(&g, &kind);
        assert_eq!(feller_check(&g, &forms).unwrap(), FellerVerdict::Unknown);
    }
}
