//! Closed-form Green's matrix, resolvent application by quadrature, and the
//! sup-norm resolvent bound behind the Feller property.

pub mod fd;
mod secular;

pub use secular::{eigenvalue_scan, secular_det_scaled, secular_matrix, ScanOptions};

use crate::bc::{smatrix, BoundaryConditions, COND_MAX};
use crate::error::{Error, Result};
use crate::graph::{EdgeRef, MetricGraph, Side};
use crate::graph_fn::GraphFunction;
use crate::linalg::{self, cr, CMatrix, CVector, C64, I};

/// The factors of the Green's-matrix representation at a fixed spectral
/// parameter k with Im k > 0: the scattering matrix S(k), the diagonal
/// factor inverse of R_+, the traversal coupling T and (I - ST)^{-1} S.
#[derive(Debug, Clone)]
pub struct GreenKernelParts {
    pub k: C64,
    pub s: CMatrix,
    pub t: CMatrix,
    /// Diagonal of R_+(k;a)^{-1}.
    pub r_plus_inv: CVector,
    /// (I - S T)^{-1}.
    pub inv_factor: CMatrix,
    /// (I - S T)^{-1} S, the middle factor of the kernel.
    pub mid: CMatrix,
}

impl GreenKernelParts {
    pub fn new(g: &MetricGraph, bc: &BoundaryConditions, k: C64) -> Result<Self> {
        if k.im <= 0.0 {
            return Err(Error::NotInResolventSet);
        }
        let s = smatrix(k, bc)?;
        let m = g.boundary_dim();
        let lay = g.layout();
        let mut t = CMatrix::zeros(m, m);
        let mut r_plus_inv = CVector::from_element(m, cr(1.0));
        for (i, edge) in g.internal_edges().iter().enumerate() {
            let km = lay.index_of(EdgeRef::Internal(i), Side::Minus);
            let kp = lay.index_of(EdgeRef::Internal(i), Side::Plus);
            let e = (I * k * cr(edge.length)).exp();
            t[(km, kp)] = e;
            t[(kp, km)] = e;
            r_plus_inv[kp] = e;
        }
        let factor = CMatrix::identity(m, m) - &s * &t;
        if linalg::cond(&factor) > COND_MAX {
            return Err(Error::NotInResolventSet);
        }
        let inv_factor = linalg::inverse(&factor).ok_or(Error::NotInResolventSet)?;
        let mid = &inv_factor * &s;
        Ok(GreenKernelParts {
            k,
            s,
            t,
            r_plus_inv,
            inv_factor,
            mid,
        })
    }

    /// Row of Phi(x,k) R_+^{-1} for a point x on an edge: at most two
    /// nonzero entries, both bounded for Im k > 0.
    pub fn phi_row(&self, g: &MetricGraph, edge: EdgeRef, x: f64) -> Vec<(usize, C64)> {
        let lay = g.layout();
        match edge {
            EdgeRef::External(_) => {
                let idx = lay.index_of(edge, Side::Minus);
                vec![(idx, (I * self.k * cr(x)).exp())]
            }
            EdgeRef::Internal(i) => {
                let a = g.internal_edges()[i].length;
                let km = lay.index_of(edge, Side::Minus);
                let kp = lay.index_of(edge, Side::Plus);
                vec![
                    (km, (I * self.k * cr(x)).exp()),
                    (kp, (I * self.k * cr(a - x)).exp()),
                ]
            }
        }
    }
}

/// Green's function of -Delta(A,B) - k^2 on a metric graph.
pub struct GreenKernel<'g> {
    pub graph: &'g MetricGraph,
    pub parts: GreenKernelParts,
}

impl<'g> GreenKernel<'g> {
    pub fn new(g: &'g MetricGraph, bc: &BoundaryConditions, k: C64) -> Result<Self> {
        Ok(GreenKernel {
            graph: g,
            parts: GreenKernelParts::new(g, bc, k)?,
        })
    }

    /// The free-line kernel i e^{ik|x-y|} / 2k on one edge.
    pub fn free_entry(&self, x: f64, y: f64) -> C64 {
        let k = self.parts.k;
        I * (I * k * cr((x - y).abs())).exp() / (cr(2.0) * k)
    }

    /// Kernel entry r_{j,j'}(x, y; k).
    pub fn entry(&self, at: (EdgeRef, f64), source: (EdgeRef, f64)) -> C64 {
        let (ej, x) = at;
        let (ejp, y) = source;
        let k = self.parts.k;
        let row = self.parts.phi_row(self.graph, ej, x);
        let col = self.parts.phi_row(self.graph, ejp, y);
        let mut acc = cr(0.0);
        for &(mu, zx) in &row {
            for &(nu, zy) in &col {
                acc += zx * self.parts.mid[(mu, nu)] * zy;
            }
        }
        let mut val = I * acc / (cr(2.0) * k);
        if ej == ejp {
            val += self.free_entry(x, y);
        }
        val
    }

    /// Full (|E|+|I|) x (|E|+|I|) kernel matrix at per-edge coordinates.
    pub fn matrix(&self, x: &[f64], y: &[f64]) -> CMatrix {
        let edges: Vec<EdgeRef> = self.graph.edges().collect();
        CMatrix::from_fn(edges.len(), edges.len(), |r, c| {
            self.entry((edges[r], x[r]), (edges[c], y[c]))
        })
    }
}

/// Convenience constructor at k = i kappa.
pub fn green_kernel<'g>(
    g: &'g MetricGraph,
    bc: &BoundaryConditions,
    k: C64,
) -> Result<GreenKernel<'g>> {
    GreenKernel::new(g, bc, k)
}

// ---------------------------------------------------------------------------
// quadrature pieces

/// (e^{zh} - 1)/z with a series fallback near z = 0.
fn em1(z: C64, h: f64) -> C64 {
    let zh = z * cr(h);
    if zh.norm() < 1e-4 {
        cr(h) * (cr(1.0) + zh / cr(2.0) + zh * zh / cr(6.0) + zh * zh * zh / cr(24.0))
    } else {
        (zh.exp() - cr(1.0)) / z
    }
}

/// (e^{zh} - 1 - zh)/z^2: weight of the ramp against the decaying end.
fn em2(z: C64, h: f64) -> C64 {
    let zh = z * cr(h);
    if zh.norm() < 1e-4 {
        cr(h * h)
            * (cr(0.5) + zh / cr(6.0) + zh * zh / cr(24.0) + zh * zh * zh / cr(120.0))
    } else {
        (zh.exp() - cr(1.0) - zh) / (z * z)
    }
}

/// ((zh - 1)e^{zh} + 1)/z^2: weight of the ramp against the growing end.
fn em3(z: C64, h: f64) -> C64 {
    let zh = z * cr(h);
    if zh.norm() < 1e-4 {
        cr(h * h) * (cr(0.5) + zh / cr(3.0) + zh * zh / cr(8.0) + zh * zh * zh / cr(30.0))
    } else {
        ((zh - cr(1.0)) * zh.exp() + cr(1.0)) / (z * z)
    }
}

/// Cumulative integrals of the free kernel against a sampled function by a
/// product rule that treats the exponential exactly and the samples as
/// piecewise linear (the |x-y| kink makes plain Simpson lose its order).
/// Returns F_i + G_i with F_i = int_0^{x_i} e^{ik(x_i-y)} f and
/// G_i = int_{x_i}^{L} e^{ik(y-x_i)} f (+ constant tail for half-lines).
fn free_convolution(k: C64, h: f64, samples: &[C64], tail: bool) -> Vec<C64> {
    let z = I * k;
    let n = samples.len();
    let decay = (z * cr(h)).exp();
    let w_a = em1(z, h);
    let w_left = em3(z, h); // against e^{z u}, u from the left endpoint
    let w_right = em2(z, h); // against e^{z (h-u)}
    let mut f = vec![cr(0.0); n];
    for i in 1..n {
        let a = samples[i - 1];
        let b = (samples[i] - samples[i - 1]) / cr(h);
        // int_0^h e^{z(h-u)} (a + b u) du = a em1 + b em2
        f[i] = decay * f[i - 1] + a * w_a + b * w_right;
    }
    let mut g = vec![cr(0.0); n];
    g[n - 1] = if tail {
        // constant extension of the last sample along the half-line
        -samples[n - 1] / z
    } else {
        cr(0.0)
    };
    for i in (0..n - 1).rev() {
        let a = samples[i];
        let b = (samples[i + 1] - samples[i]) / cr(h);
        // int_0^h e^{z u} (a + b u) du = a em1 + b em3
        let local = a * w_a + b * w_left;
        g[i] = decay * g[i + 1] + local;
    }
    (0..n).map(|i| f[i] + g[i]).collect()
}

/// Composite Simpson weights over an even number of intervals.
fn simpson_weights(n_nodes: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n_nodes];
    let n = n_nodes - 1;
    debug_assert!(n % 2 == 0 && n >= 2);
    for i in (0..n).step_by(2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    w
}

/// Apply the resolvent (-Delta(A,B) - k^2)^{-1} to a sampled function by
/// quadrature of the Green's kernel. Half-line samples are extended by
/// their final value; the tail integrals are appended in closed form.
pub fn resolvent_apply(
    g: &MetricGraph,
    bc: &BoundaryConditions,
    k: C64,
    phi: &GraphFunction,
) -> Result<GraphFunction> {
    let parts = GreenKernelParts::new(g, bc, k)?;
    let m = g.boundary_dim();
    let lay = g.layout();
    let z = I * k;

    // chi = int Phi(y,k)^T R_+^{-1} phi(y) dy, assembled slot by slot with
    // composite Simpson (the integrands are smooth)
    let mut chi = CVector::zeros(m);
    for (row, e) in g.edges().enumerate() {
        let samples = &phi.samples[row];
        let h = phi.steps[row];
        let w = simpson_weights(samples.len(), h);
        match e {
            EdgeRef::External(_) => {
                let idx = lay.index_of(e, Side::Minus);
                let mut acc = cr(0.0);
                for (i, s) in samples.iter().enumerate() {
                    acc += cr(w[i]) * (z * cr(i as f64 * h)).exp() * s;
                }
                // tail: phi constant beyond the truncation point
                let l = (samples.len() - 1) as f64 * h;
                acc += samples[samples.len() - 1] * (z * cr(l)).exp() * (-cr(1.0) / z);
                chi[idx] = acc;
            }
            EdgeRef::Internal(i) => {
                let a = g.internal_edges()[i].length;
                let km = lay.index_of(e, Side::Minus);
                let kp = lay.index_of(e, Side::Plus);
                let (mut acc_m, mut acc_p) = (cr(0.0), cr(0.0));
                for (ii, s) in samples.iter().enumerate() {
                    let y = ii as f64 * h;
                    acc_m += cr(w[ii]) * (z * cr(y)).exp() * s;
                    acc_p += cr(w[ii]) * (z * cr(a - y)).exp() * s;
                }
                chi[km] = acc_m;
                chi[kp] = acc_p;
            }
        }
    }

    let weight = &parts.mid * &chi; // (I - ST)^{-1} S chi
    let pref = I / (cr(2.0) * k);

    let mut out = phi.clone();
    out.method = "resolvent";
    for (row, e) in g.edges().enumerate() {
        let samples = &phi.samples[row];
        let h = phi.steps[row];
        let free = free_convolution(k, h, samples, matches!(e, EdgeRef::External(_)));
        let n = samples.len();
        let mut vals = Vec::with_capacity(n);
        match e {
            EdgeRef::External(_) => {
                let idx = lay.index_of(e, Side::Minus);
                for (i, fr) in free.iter().enumerate() {
                    let x = i as f64 * h;
                    let scat = (z * cr(x)).exp() * weight[idx];
                    vals.push(pref * (fr + scat));
                }
            }
            EdgeRef::Internal(ii) => {
                let a = g.internal_edges()[ii].length;
                let km = lay.index_of(e, Side::Minus);
                let kp = lay.index_of(e, Side::Plus);
                for (i, fr) in free.iter().enumerate() {
                    let x = i as f64 * h;
                    let scat = (z * cr(x)).exp() * weight[km]
                        + (z * cr(a - x)).exp() * weight[kp];
                    vals.push(pref * (fr + scat));
                }
            }
        }
        out.samples[row] = vals;
    }
    Ok(out)
}

/// Pointwise residual of the resolvent equation -psi'' - k^2 psi = phi on
/// interior grid nodes, by the three-point second difference.
pub fn resolvent_residual(
    psi: &GraphFunction,
    phi: &GraphFunction,
    k: C64,
) -> Result<f64> {
    psi.check_compatible(phi)?;
    let k2 = k * k;
    let mut worst = 0.0f64;
    for (row, s) in psi.samples.iter().enumerate() {
        let h = psi.steps[row];
        for i in 1..s.len() - 1 {
            let lap = (s[i - 1] - cr(2.0) * s[i] + s[i + 1]) / cr(h * h);
            let res = -lap - k2 * s[i] - phi.samples[row][i];
            worst = worst.max(res.norm());
        }
    }
    Ok(worst)
}

/// Options of the sup-norm bound evaluation.
#[derive(Debug, Clone)]
pub struct SupNormOptions {
    /// Grid points per edge for the maximization.
    pub grid: usize,
    /// Points per edge pair for the kernel positivity pre-check.
    pub positivity_grid: usize,
    /// Window on half-lines, in units of 1/kappa.
    pub external_window: f64,
}

impl Default for SupNormOptions {
    fn default() -> Self {
        SupNormOptions {
            grid: 400,
            positivity_grid: 16,
            external_window: 10.0,
        }
    }
}

/// Sup over the graph of u(x; kappa) = integral of the Green's kernel
/// against the constant 1. Values at most 1/kappa^2 certify the resolvent
/// bound behind the Feller property.
pub fn feller_sup_norm(
    g: &MetricGraph,
    bc: &BoundaryConditions,
    kappa: f64,
    opts: &SupNormOptions,
) -> Result<f64> {
    let k = cr(kappa) * I;
    let kernel = GreenKernel::new(g, bc, k)?;
    check_kernel_positive(g, &kernel, kappa, opts)?;
    let parts = &kernel.parts;
    let m = g.boundary_dim();
    let h = g.layout().h();
    // w = (I - ST)^{-1} S (I - T) h
    let w = &parts.mid * ((CMatrix::identity(m, m) - &parts.t) * &h);
    let inv2k2 = 1.0 / (2.0 * kappa * kappa);

    let mut sup = if g.n_external() > 0 {
        // u -> 1/kappa^2 along every half-line
        1.0 / (kappa * kappa)
    } else {
        f64::NEG_INFINITY
    };
    for e in g.edges() {
        let (len, u0): (f64, Box<dyn Fn(f64) -> f64>) = match e {
            EdgeRef::External(_) => (
                opts.external_window / kappa,
                Box::new(move |x: f64| {
                    1.0 / (kappa * kappa) - inv2k2 * (-kappa * x).exp()
                }),
            ),
            EdgeRef::Internal(i) => {
                let a = g.internal_edges()[i].length;
                (
                    a,
                    Box::new(move |x: f64| {
                        1.0 / (kappa * kappa)
                            - inv2k2 * ((-kappa * x).exp() + (-kappa * (a - x)).exp())
                    }),
                )
            }
        };
        for i in 0..=opts.grid {
            let x = len * i as f64 / opts.grid as f64;
            let mut u1 = cr(0.0);
            for &(mu, zx) in &parts.phi_row(g, e, x) {
                u1 += zx * w[mu];
            }
            let val = u0(x) + inv2k2 * u1.re;
            sup = sup.max(val);
        }
    }
    Ok(sup)
}

fn check_kernel_positive(
    g: &MetricGraph,
    kernel: &GreenKernel,
    kappa: f64,
    opts: &SupNormOptions,
) -> Result<()> {
    let n = opts.positivity_grid;
    let edges: Vec<EdgeRef> = g.edges().collect();
    for &ej in &edges {
        let lj = g.length(ej).unwrap_or(opts.external_window / kappa);
        for &ejp in &edges {
            let lp = g.length(ejp).unwrap_or(opts.external_window / kappa);
            for i in 0..n {
                for j in 0..n {
                    let x = lj * (i as f64 + 0.5) / n as f64;
                    let y = lp * (j as f64 + 0.5) / n as f64;
                    let v = kernel.entry((ej, x), (ejp, y));
                    if v.re < -1e-12 || v.im.abs() > 1e-10 {
                        return Err(Error::NonpositiveKernel);
                    }
                }
            }
        }
    }
    Ok(())
}
