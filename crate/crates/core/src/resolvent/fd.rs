//! Finite-difference discretization of -psi'' with the boundary-condition
//! rows A psi + B psi' = 0 attached, used as an independent oracle for the
//! closed-form kernel and as the Crank-Nicolson time stepper.
//!
//! Per edge the interior stencil is constant-coefficient tridiagonal; the
//! endpoint values couple globally through the m boundary rows (one-sided
//! second-order derivative stencils) and the Dirichlet caps closing off
//! truncated half-lines. Interior blocks are eliminated by a Schur
//! complement onto the endpoint values.

use crate::bc::BoundaryConditions;
use crate::error::{Error, Result};
use crate::graph::{EdgeRef, MetricGraph, Side};
use crate::graph_fn::GraphFunction;
use crate::linalg::{cr, CMatrix, CVector, C64};

/// LU-style factorization of a constant-coefficient tridiagonal matrix with
/// diagonal `d` and off-diagonal `o` (Thomas algorithm coefficients).
#[derive(Debug, Clone)]
struct Thomas {
    /// Modified upper-diagonal coefficients c'_i.
    cp: Vec<C64>,
    d: C64,
    o: C64,
}

impl Thomas {
    fn new(d: C64, o: C64, n: usize) -> Result<Self> {
        let mut cp = Vec::with_capacity(n);
        let mut denom = d;
        for _ in 0..n {
            if denom.norm() < 1e-300 {
                return Err(Error::LinearSolveFailure);
            }
            let c = o / denom;
            cp.push(c);
            denom = d - o * c;
        }
        Ok(Thomas { cp, d, o })
    }

    /// Solve T x = b in place.
    fn solve(&self, b: &mut [C64]) {
        let n = b.len();
        debug_assert_eq!(n, self.cp.len());
        let mut denom = self.d;
        b[0] /= denom;
        for i in 1..n {
            denom = self.d - self.o * self.cp[i - 1];
            b[i] = (b[i] - self.o * b[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            let next = b[i + 1];
            b[i] -= self.cp[i] * next;
        }
    }
}

/// One edge's share of the discretization.
#[derive(Debug, Clone)]
struct EdgeBlock {
    n_nodes: usize,
    h: f64,
    thomas: Thomas,
    /// Interior response to a unit left endpoint value.
    q_left: Vec<C64>,
    /// Interior response to a unit right endpoint value.
    q_right: Vec<C64>,
}

/// The assembled operator: interior factorizations plus the dense border
/// system over the endpoint values, ordered (left_0, right_0, left_1, ...).
pub struct BorderedOp<'g> {
    g: &'g MetricGraph,
    blocks: Vec<EdgeBlock>,
    border_lu: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    /// Rows of the border system: (coefficients on border unknowns) are in
    /// the LU; this keeps, per border row, the interior-value weights that
    /// enter its right-hand side as (edge, interior index, weight).
    rhs_weights: Vec<Vec<(usize, usize, C64)>>,
    n_border: usize,
}

impl<'g> BorderedOp<'g> {
    /// Discretize with per-edge grids from `grid` (node counts and steps),
    /// interior rows `diag*u_i + off*(u_{i-1} + u_{i+1}) = rhs_i`.
    pub fn new(
        g: &'g MetricGraph,
        bc: &BoundaryConditions,
        grid: &GraphFunction,
        diag_of: impl Fn(f64) -> C64,
        off_of: impl Fn(f64) -> C64,
    ) -> Result<Self> {
        let n_edges = g.n_edges();
        let mut blocks = Vec::with_capacity(n_edges);
        for row in 0..n_edges {
            let n_nodes = grid.samples[row].len();
            if n_nodes < 6 {
                return Err(Error::InvalidArgument(
                    "finite-difference grids need at least 6 nodes per edge".into(),
                ));
            }
            let h = grid.steps[row];
            let d = diag_of(h);
            let o = off_of(h);
            let interior = n_nodes - 2;
            let thomas = Thomas::new(d, o, interior)?;
            let mut q_left = vec![cr(0.0); interior];
            q_left[0] = -o;
            thomas.solve(&mut q_left);
            let mut q_right = vec![cr(0.0); interior];
            q_right[interior - 1] = -o;
            thomas.solve(&mut q_right);
            blocks.push(EdgeBlock {
                n_nodes,
                h,
                thomas,
                q_left,
                q_right,
            });
        }

        // border system: m boundary-condition rows + one Dirichlet cap per
        // truncated half-line
        let n_border = 2 * n_edges;
        let m = g.boundary_dim();
        let mut border = CMatrix::zeros(n_border, n_border);
        let mut rhs_weights: Vec<Vec<(usize, usize, C64)>> = vec![Vec::new(); n_border];
        let lay = g.layout();
        let a = bc.a();
        let b = bc.b();
        for row in 0..m {
            for (slot_k, slot) in lay.slots().iter().enumerate() {
                let (edge_row, at_left) = match (slot.edge, slot.side) {
                    (EdgeRef::External(e), _) => (e, true),
                    (EdgeRef::Internal(i), Side::Minus) => (g.n_external() + i, true),
                    (EdgeRef::Internal(i), Side::Plus) => (g.n_external() + i, false),
                };
                let blk = &blocks[edge_row];
                let h = blk.h;
                let interior = blk.n_nodes - 2;
                let (u_end_col, q_end, i1, i2) = if at_left {
                    (2 * edge_row, &blk.q_left, 0usize, 1usize)
                } else {
                    (2 * edge_row + 1, &blk.q_right, interior - 1, interior - 2)
                };
                let q_other = if at_left { &blk.q_right } else { &blk.q_left };
                let other_col = if at_left { 2 * edge_row + 1 } else { 2 * edge_row };
                let a_c = a[(row, slot_k)];
                let b_c = b[(row, slot_k)];
                // value part
                border[(row, u_end_col)] += a_c;
                // one-sided derivative: both orientations reduce to
                // (-3 u_end + 4 u_1 - u_2)/(2h) with the trace sign built in
                let s = b_c / cr(2.0 * h);
                border[(row, u_end_col)] += s * cr(-3.0);
                border[(row, u_end_col)] += s * (cr(4.0) * q_end[i1] - q_end[i2]);
                border[(row, other_col)] += s * (cr(4.0) * q_other[i1] - q_other[i2]);
                rhs_weights[row].push((edge_row, i1, -s * cr(4.0)));
                rhs_weights[row].push((edge_row, i2, s));
            }
        }
        for e in 0..g.n_external() {
            let row = m + e;
            border[(row, 2 * e + 1)] = cr(1.0);
        }
        let border_lu = border.lu();
        Ok(BorderedOp {
            g,
            blocks,
            border_lu,
            rhs_weights,
            n_border,
        })
    }

    /// Solve the discretized system with per-node right-hand side `rhs`
    /// (interior rows; boundary rows are homogeneous).
    pub fn solve(&self, rhs: &GraphFunction) -> Result<GraphFunction> {
        let n_edges = self.blocks.len();
        // interior particular solutions
        let mut p: Vec<Vec<C64>> = Vec::with_capacity(n_edges);
        for (row, blk) in self.blocks.iter().enumerate() {
            let mut b: Vec<C64> = rhs.samples[row][1..blk.n_nodes - 1].to_vec();
            blk.thomas.solve(&mut b);
            p.push(b);
        }
        // border right-hand side
        let mut rb = CVector::zeros(self.n_border);
        for (row, weights) in self.rhs_weights.iter().enumerate() {
            for &(edge, idx, w) in weights {
                rb[row] += w * p[edge][idx];
            }
        }
        let ub = self
            .border_lu
            .solve(&rb)
            .ok_or(Error::LinearSolveFailure)?;
        // reconstruct
        let mut out = rhs.clone();
        out.method = "fd";
        for (row, blk) in self.blocks.iter().enumerate() {
            let left = ub[2 * row];
            let right = ub[2 * row + 1];
            let interior = blk.n_nodes - 2;
            let s = &mut out.samples[row];
            s[0] = left;
            s[blk.n_nodes - 1] = right;
            for i in 0..interior {
                s[i + 1] = p[row][i] + left * blk.q_left[i] + right * blk.q_right[i];
            }
        }
        Ok(out)
    }

    pub fn graph(&self) -> &MetricGraph {
        self.g
    }
}

/// Finite-difference resolvent (-Delta - (i kappa)^2)^{-1} phi on the grids
/// of `phi`. Independent of the closed-form kernel path.
pub fn fd_resolvent_apply(
    g: &MetricGraph,
    bc: &BoundaryConditions,
    kappa: f64,
    phi: &GraphFunction,
) -> Result<GraphFunction> {
    let op = BorderedOp::new(
        g,
        bc,
        phi,
        |h| cr(2.0 / (h * h) + kappa * kappa),
        |h| cr(-1.0 / (h * h)),
    )?;
    op.solve(phi)
}

/// Kernel column r(., y; i kappa) by resolving a discrete delta at the
/// grid node closest to y on the source edge.
pub fn fd_kernel_column(
    g: &MetricGraph,
    bc: &BoundaryConditions,
    kappa: f64,
    grid: &GraphFunction,
    source: (EdgeRef, f64),
) -> Result<GraphFunction> {
    let (edge, y) = source;
    let row = match edge {
        EdgeRef::External(e) => e,
        EdgeRef::Internal(i) => g.n_external() + i,
    };
    let mut delta = grid.zero_like();
    let h = grid.steps[row];
    let iy = (y / h).round() as usize;
    if iy == 0 || iy + 1 >= grid.samples[row].len() {
        return Err(Error::InvalidArgument(
            "source point must be an interior grid node".into(),
        ));
    }
    delta.samples[row][iy] = cr(1.0 / h);
    fd_resolvent_apply(g, bc, kappa, &delta)
}
