//! Negative-spectrum scan: eigenvalues -kappa^2 of the Laplacian correspond
//! to roots of det Z(kappa) with Z(kappa) = A X(kappa) - kappa B Y(kappa),
//! built from the traces of the decaying exponential family.

use crate::bc::BoundaryConditions;
use crate::error::{Error, Result};
use crate::graph::{EdgeRef, MetricGraph, Side};
use crate::linalg::{cr, CMatrix, C64};

/// The matrix Z(kappa) with the verbatim exponential blocks e^{+-kappa a}.
/// At kappa = 1 this is exactly A X - B Y. Overflows for large kappa * a;
/// the scan uses the column-scaled variant instead.
pub fn secular_matrix(g: &MetricGraph, bc: &BoundaryConditions, kappa: f64) -> CMatrix {
    build_z(g, bc, kappa, false)
}

/// det of Z(kappa) with the growing columns rescaled by e^{-kappa a}; the
/// scaling factor is positive, so roots and sign changes are unchanged.
pub fn secular_det_scaled(g: &MetricGraph, bc: &BoundaryConditions, kappa: f64) -> C64 {
    build_z(g, bc, kappa, true).lu().determinant()
}

/// Columns are ordered (s, alpha, beta): half-line amplitudes s e^{-kappa x},
/// then internal amplitudes alpha e^{-kappa x} + beta e^{+kappa x}.
fn build_z(g: &MetricGraph, bc: &BoundaryConditions, kappa: f64, scaled: bool) -> CMatrix {
    let m = g.boundary_dim();
    let ne = g.n_external();
    let ni = g.n_internal();
    let lay = g.layout();
    let mut x = CMatrix::zeros(m, m);
    let mut y = CMatrix::zeros(m, m);
    for e in 0..ne {
        let idx = lay.index_of(EdgeRef::External(e), Side::Minus);
        x[(idx, e)] = cr(1.0);
        y[(idx, e)] = cr(1.0);
    }
    for i in 0..ni {
        let a = g.internal_edges()[i].length;
        let km = lay.index_of(EdgeRef::Internal(i), Side::Minus);
        let kp = lay.index_of(EdgeRef::Internal(i), Side::Plus);
        let col_alpha = ne + i;
        let col_beta = ne + ni + i;
        let (em, ep) = if scaled {
            // beta column scaled by e^{-kappa a}
            ((-kappa * a).exp(), 1.0)
        } else {
            ((-kappa * a).exp(), (kappa * a).exp())
        };
        let beta_at_zero = if scaled { (-kappa * a).exp() } else { 1.0 };
        // values: psi(0) = alpha + beta, psi(a) = alpha e^- + beta e^+
        x[(km, col_alpha)] = cr(1.0);
        x[(km, col_beta)] = cr(beta_at_zero);
        x[(kp, col_alpha)] = cr(em);
        x[(kp, col_beta)] = cr(ep);
        // derivatives scaled by -kappa: psi' entries of Y
        y[(km, col_alpha)] = cr(1.0);
        y[(km, col_beta)] = cr(-beta_at_zero);
        y[(kp, col_alpha)] = cr(-em);
        y[(kp, col_beta)] = cr(ep);
    }
    bc.a() * x - (bc.b() * y).map(|z| z * kappa)
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub grid: usize,
    pub bisection_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            grid: 400,
            bisection_tol: 1e-10,
        }
    }
}

/// Roots kappa* of det Z(kappa) in (lo, hi]; each corresponds to the
/// eigenvalue -kappa*^2. Sign-change bracketing on a log-spaced grid
/// followed by bisection; complex determinants are reduced by the phase
/// that makes the value real at the start of the grid.
pub fn eigenvalue_scan(
    g: &MetricGraph,
    bc: &BoundaryConditions,
    range: (f64, f64),
    opts: &ScanOptions,
) -> Result<Vec<f64>> {
    let (lo, hi) = range;
    if !(hi > lo) || hi <= 0.0 {
        return Err(Error::EmptyRange);
    }
    let lo = if lo > 0.0 { lo } else { hi * 1e-6 };
    let n = opts.grid.max(8);
    let grid: Vec<f64> = (0..=n)
        .map(|i| lo * (hi / lo).powf(i as f64 / n as f64))
        .collect();
    // global phase from the first grid value of meaningful size
    let mut phase = cr(1.0);
    for &kappa in &grid {
        let d = secular_det_scaled(g, bc, kappa);
        if d.norm() > 1e-290 {
            phase = d.conj() / d.norm();
            break;
        }
    }
    let f = |kappa: f64| (phase * secular_det_scaled(g, bc, kappa)).re;

    let vals: Vec<f64> = grid.iter().map(|&k| f(k)).collect();
    let scale = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let mut roots: Vec<f64> = Vec::new();
    for i in 0..n {
        let (a, b) = (grid[i], grid[i + 1]);
        let (fa, fb) = (vals[i], vals[i + 1]);
        if fa == 0.0 {
            push_root(&mut roots, a, opts.bisection_tol);
            continue;
        }
        if fa * fb < 0.0 {
            let mut lo = a;
            let mut hi = b;
            let mut flo = fa;
            while hi - lo > opts.bisection_tol {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm > 0.0) == (flo > 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            push_root(&mut roots, 0.5 * (lo + hi), opts.bisection_tol);
        }
    }
    if let Some(&last) = vals.last() {
        if last == 0.0 && scale > 0.0 {
            push_root(&mut roots, hi, opts.bisection_tol);
        }
    }
    Ok(roots)
}

fn push_root(roots: &mut Vec<f64>, root: f64, tol: f64) {
    if roots
        .last()
        .map(|&r| (r - root).abs() > 10.0 * tol.max(1e-12))
        .unwrap_or(true)
    {
        roots.push(root);
    }
}
