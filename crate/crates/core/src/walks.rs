//! Walks on a metric graph and the walk-series expansion of the Green's
//! function: the kernel is a sum over walks of exponentially damped products
//! of vertex scattering amplitudes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::bc::{smatrix_raw, BoundaryConditions, VertexConditions};
use crate::error::{Error, Result};
use crate::graph::{EdgeRef, MetricGraph, Side};
use crate::linalg::{self, cr, CMatrix, CVector, C64, I};
use crate::resolvent::GreenKernelParts;

/// A walk from a source edge to a target edge: the traversed internal edges
/// in order, with entry/exit sides and the visited vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Walk {
    pub source: EdgeRef,
    /// Side of the source edge through which the walk leaves it.
    pub source_side: Side,
    pub target: EdgeRef,
    /// Side of the target edge through which the walk enters it.
    pub target_side: Side,
    /// Internal edges traversed, in traversal order (empty for trivial walks).
    pub traversed: Vec<usize>,
    /// Vertices visited: v_0 (leaving the source) through v_n (entering the
    /// target); a single shared vertex for trivial walks.
    pub vertices: Vec<usize>,
    pub metric_len: f64,
}

impl Walk {
    pub fn comb_len(&self) -> usize {
        self.traversed.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.traversed.is_empty()
    }

    /// Transmission flags per visited vertex: false where the walk bounces
    /// back into the edge it came from.
    pub fn transmitted(&self) -> Vec<bool> {
        if self.is_trivial() {
            return vec![self.source != self.target];
        }
        let mut flags = Vec::with_capacity(self.vertices.len());
        flags.push(EdgeRef::Internal(self.traversed[0]) != self.source);
        for w in self.traversed.windows(2) {
            flags.push(w[1] != w[0]);
        }
        flags.push(EdgeRef::Internal(*self.traversed.last().unwrap()) != self.target);
        flags
    }

    pub fn is_reflectionless(&self) -> bool {
        self.transmitted().into_iter().all(|t| t)
    }
}

/// Guard on the number of enumerated walks.
pub const DEFAULT_WALK_GUARD: usize = 200_000;

#[derive(Clone)]
struct Frontier {
    len: f64,
    edges: Vec<usize>,
    vertex: usize,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.len == other.len && self.edges == other.edges
    }
}
impl Eq for Frontier {}
impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (metric length, lexicographic edge sequence)
        other
            .len
            .total_cmp(&self.len)
            .then_with(|| other.edges.cmp(&self.edges))
    }
}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn side_vertex(g: &MetricGraph, edge: EdgeRef, side: Side) -> Result<usize> {
    match (edge, side) {
        (EdgeRef::External(_), Side::Plus) => Err(Error::InvalidArgument(
            "external edges have no terminal side".into(),
        )),
        _ => Ok(g.endpoint(edge, side)),
    }
}

/// All walks from `(source, source_side)` to `(target, target_side)` of
/// metric length at most `l_max`, ordered by (length, edge sequence).
/// Trivial walks appear when the two chosen endpoints coincide.
pub fn enumerate_walks(
    g: &MetricGraph,
    source: EdgeRef,
    source_side: Side,
    target: EdgeRef,
    target_side: Side,
    l_max: f64,
    guard: usize,
) -> Result<Vec<Walk>> {
    if g.has_tadpole() {
        return Err(Error::TadpolePresent);
    }
    let v0 = side_vertex(g, source, source_side)?;
    let vn = side_vertex(g, target, target_side)?;
    let mut walks = Vec::new();
    if v0 == vn {
        walks.push(Walk {
            source,
            source_side,
            target,
            target_side,
            traversed: Vec::new(),
            vertices: vec![v0],
            metric_len: 0.0,
        });
    }
    let mut heap = BinaryHeap::new();
    heap.push(Frontier {
        len: 0.0,
        edges: Vec::new(),
        vertex: v0,
    });
    while let Some(state) = heap.pop() {
        if state.len > l_max {
            break;
        }
        if !state.edges.is_empty() && state.vertex == vn {
            if walks.len() >= guard {
                return Err(Error::CutoffTooLarge(guard));
            }
            let mut vertices = vec![v0];
            let mut at = v0;
            for &i in &state.edges {
                let e = &g.internal_edges()[i];
                at = if e.from == at { e.to } else { e.from };
                vertices.push(at);
            }
            walks.push(Walk {
                source,
                source_side,
                target,
                target_side,
                traversed: state.edges.clone(),
                vertices,
                metric_len: state.len,
            });
        }
        for (i, e) in g.internal_edges().iter().enumerate() {
            let next = if e.from == state.vertex {
                e.to
            } else if e.to == state.vertex {
                e.from
            } else {
                continue;
            };
            let len = state.len + e.length;
            if len > l_max {
                continue;
            }
            if heap.len() > guard * 4 {
                return Err(Error::CutoffTooLarge(guard));
            }
            let mut edges = state.edges.clone();
            edges.push(i);
            heap.push(Frontier {
                len,
                edges,
                vertex: next,
            });
        }
    }
    Ok(walks)
}

/// Scattering blocks per vertex at k = i kappa, indexed by the local slot
/// order of each vertex.
pub struct VertexSMatrices {
    pub kappa: f64,
    pub blocks: Vec<CMatrix>,
}

impl VertexSMatrices {
    pub fn from_vertex_conditions(
        g: &MetricGraph,
        conds: &[VertexConditions],
        kappa: f64,
    ) -> Result<Self> {
        let mut blocks = Vec::new();
        for v in 0..g.vertex_count() {
            let id = g.vertex_id(v);
            let vc = conds
                .iter()
                .find(|c| c.vertex == id)
                .ok_or_else(|| Error::MissingVertexMatrix(id.to_string()))?;
            blocks.push(smatrix_raw(cr(kappa) * I, &vc.a, &vc.b)?);
        }
        Ok(VertexSMatrices { kappa, blocks })
    }

    /// Extract the per-vertex blocks of a global scattering matrix built
    /// from local conditions.
    pub fn from_global(g: &MetricGraph, s: &CMatrix, kappa: f64) -> Self {
        let mut blocks = Vec::new();
        for v in 0..g.vertex_count() {
            let ix = g.layout().vertex_indices(v);
            blocks.push(CMatrix::from_fn(ix.len(), ix.len(), |r, c| {
                s[(ix[r], ix[c])]
            }));
        }
        VertexSMatrices { kappa, blocks }
    }

    /// Entry [S(M_v)]_{out, in} where the slots are edge endpoints at v.
    fn entry(
        &self,
        g: &MetricGraph,
        v: usize,
        out: (EdgeRef, Side),
        inc: (EdgeRef, Side),
    ) -> Result<C64> {
        let lay = g.layout();
        let k_out = lay.index_of(out.0, out.1);
        let k_in = lay.index_of(inc.0, inc.1);
        let lo = lay
            .local_slot(v, k_out)
            .ok_or_else(|| Error::MissingVertexMatrix(g.vertex_id(v).to_string()))?;
        let li = lay
            .local_slot(v, k_in)
            .ok_or_else(|| Error::MissingVertexMatrix(g.vertex_id(v).to_string()))?;
        Ok(self.blocks[v][(lo, li)])
    }
}

/// Side of an internal edge incident to a given vertex. Only valid for
/// tadpole-free graphs, where the side is unique.
fn incident_side(g: &MetricGraph, edge_idx: usize, v: usize) -> Side {
    if g.internal_edges()[edge_idx].from == v {
        Side::Minus
    } else {
        Side::Plus
    }
}

/// The weight W(kappa; w): a product of one scattering amplitude per
/// visited vertex, each taken between the local slots of the edges the walk
/// connects there.
pub fn walk_weight(g: &MetricGraph, sm: &VertexSMatrices, walk: &Walk) -> Result<C64> {
    if walk.is_trivial() {
        let v = walk.vertices[0];
        return sm.entry(
            g,
            v,
            (walk.target, walk.target_side),
            (walk.source, walk.source_side),
        );
    }
    let mut weight = cr(1.0);
    // leaving vertex v_0: from the source slot into the first edge
    let first = walk.traversed[0];
    let v0 = walk.vertices[0];
    weight *= sm.entry(
        g,
        v0,
        (EdgeRef::Internal(first), incident_side(g, first, v0)),
        (walk.source, walk.source_side),
    )?;
    // intermediate vertices v_l: from edge j_l into edge j_{l+1}
    for l in 1..walk.traversed.len() {
        let v = walk.vertices[l];
        let prev = walk.traversed[l - 1];
        let next = walk.traversed[l];
        weight *= sm.entry(
            g,
            v,
            (EdgeRef::Internal(next), incident_side(g, next, v)),
            (EdgeRef::Internal(prev), incident_side(g, prev, v)),
        )?;
    }
    // entering vertex v_n: from the last edge into the target slot
    let last = *walk.traversed.last().unwrap();
    let vn = *walk.vertices.last().unwrap();
    weight *= sm.entry(
        g,
        vn,
        (walk.target, walk.target_side),
        (EdgeRef::Internal(last), incident_side(g, last, vn)),
    )?;
    Ok(weight)
}

/// Distance from a point to the endpoint of its edge on a given side.
fn side_distance(g: &MetricGraph, edge: EdgeRef, side: Side, x: f64) -> f64 {
    match side {
        Side::Minus => x,
        Side::Plus => g.length(edge).expect("internal edge") - x,
    }
}

/// Convergence data of the walk series at a given kappa.
pub struct SeriesGauge {
    /// Contraction ratio per traversal level, from the entrywise-absolute
    /// scattering matrix (an upper bound for every signed sum of weights).
    pub q: f64,
    pub abs_s_norm: f64,
    pub min_len: f64,
    pub max_len: f64,
}

impl SeriesGauge {
    pub fn new(g: &MetricGraph, s: &CMatrix, kappa: f64) -> Result<Self> {
        let (min_len, max_len) = match (g.min_internal_length(), g.max_internal_length()) {
            (Some(a), Some(b)) => (a, b),
            _ => (f64::INFINITY, f64::INFINITY), // no internal edges: one level only
        };
        let abs_s = s.map(|z| cr(z.norm()));
        let abs_s_norm = linalg::op_norm(&abs_s);
        let q = abs_s_norm * (-kappa * min_len).exp();
        Ok(SeriesGauge {
            q,
            abs_s_norm,
            min_len,
            max_len,
        })
    }

    /// Bound on the kernel tail after dropping walks longer than l_cut:
    /// every omitted walk traverses at least n0 = floor(l_cut/max a) + 1
    /// edges, and the level-n contributions are dominated entrywise by
    /// |S| (|S| |T|)^n, giving sum_{n >= n0} |S|^{n+1} e^{-kappa n min a} / kappa.
    pub fn tail_bound(&self, kappa: f64, l_cut: f64) -> f64 {
        if self.min_len.is_infinite() {
            return 0.0; // trivial walks only; the series is finite
        }
        let n0 = (l_cut / self.max_len).floor() as i32 + 1;
        self.abs_s_norm / kappa * self.q.powi(n0) / (1.0 - self.q)
    }
}

/// Partial walk series for one kernel entry, with a rigorous tail bound:
/// |approx - kernel entry| <= bound whenever q < 1.
pub fn green_via_walks(
    g: &MetricGraph,
    bc: &BoundaryConditions,
    kappa: f64,
    at: (EdgeRef, f64),
    source: (EdgeRef, f64),
    l_cut: f64,
    guard: usize,
) -> Result<(C64, f64)> {
    if g.has_tadpole() {
        return Err(Error::TadpolePresent);
    }
    let k = cr(kappa) * I;
    let s = crate::bc::smatrix(k, bc)?;
    let gauge = SeriesGauge::new(g, &s, kappa)?;
    if gauge.q >= 1.0 {
        return Err(Error::SeriesDiverges(gauge.q));
    }
    let sm = VertexSMatrices::from_global(g, &s, kappa);
    let (ej, x) = at;
    let (ejp, y) = source;
    let mut acc = if ej == ejp {
        cr((-kappa * (x - y).abs()).exp() / (2.0 * kappa))
    } else {
        cr(0.0)
    };
    let sides = |e: EdgeRef| -> Vec<Side> {
        match e {
            EdgeRef::External(_) => vec![Side::Minus],
            EdgeRef::Internal(_) => vec![Side::Minus, Side::Plus],
        }
    };
    for &sig in &sides(ej) {
        for &sig_p in &sides(ejp) {
            let walks = enumerate_walks(g, ejp, sig_p, ej, sig, l_cut, guard)?;
            let dx = side_distance(g, ej, sig, x);
            let dy = side_distance(g, ejp, sig_p, y);
            for w in &walks {
                let weight = walk_weight(g, &sm, w)?;
                acc += weight
                    * cr((-kappa * (dx + w.metric_len + dy)).exp() / (2.0 * kappa));
            }
        }
    }
    Ok((acc, gauge.tail_bound(kappa, l_cut)))
}

/// Vertex dichotomy: does S(i kappa; M_v) fix h_v or push it strictly down?
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexClass {
    /// S h_v = h_v.
    Fixed,
    /// S h_v strictly below h_v in every component.
    StrictlyBelow,
    Mixed,
}

/// Classify every vertex by the entries of S(i kappa; M_v) h_v - h_v with
/// tolerance 1e-9.
pub fn vertex_dichotomy(g: &MetricGraph, sm: &VertexSMatrices) -> Vec<VertexClass> {
    let tol = 1e-9;
    (0..g.vertex_count())
        .map(|v| {
            let n = g.degree(v);
            let h = CVector::from_element(n, cr(1.0));
            let diff = &sm.blocks[v] * &h - &h;
            let all_zero = diff.iter().all(|z| z.norm() < tol);
            let all_neg = diff.iter().all(|z| z.re < -tol && z.im.abs() < tol);
            if all_zero {
                VertexClass::Fixed
            } else if all_neg {
                VertexClass::StrictlyBelow
            } else {
                VertexClass::Mixed
            }
        })
        .collect()
}

/// The positivity term w_j(x; kappa) = [Phi R_+^{-1} (I - ST)^{-1} (I - S) h]_j
/// whose nonnegativity drives the sup-norm resolvent bound.
pub fn wj_positivity_term(
    g: &MetricGraph,
    bc: &BoundaryConditions,
    kappa: f64,
    edge: EdgeRef,
    x: f64,
) -> Result<C64> {
    if g.has_tadpole() {
        return Err(Error::TadpolePresent);
    }
    let parts = GreenKernelParts::new(g, bc, cr(kappa) * I)?;
    let gauge = SeriesGauge::new(g, &parts.s, kappa)?;
    if gauge.q >= 1.0 {
        return Err(Error::SeriesDiverges(gauge.q));
    }
    let m = g.boundary_dim();
    let h = g.layout().h();
    let w = &parts.inv_factor * ((CMatrix::identity(m, m) - &parts.s) * &h);
    let mut acc = cr(0.0);
    for &(mu, zx) in &parts.phi_row(g, edge, x) {
        acc += zx * w[mu];
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bc::{assemble_global, make_vertex_conditions, Alpha, VertexKind};
    use crate::graph::{build_graph, GraphSpec};

    fn line_graph(a: f64) -> MetricGraph {
        build_graph(&GraphSpec {
            vertices: vec!["v0".into(), "v1".into()],
            internal_edges: vec![("i".into(), "v0".into(), "v1".into(), a)],
            external_edges: vec![("e1".into(), "v0".into()), ("e2".into(), "v1".into())],
        })
        .unwrap()
    }

    fn interval(a: f64) -> MetricGraph {
        build_graph(&GraphSpec {
            vertices: vec!["v0".into(), "v1".into()],
            internal_edges: vec![("i".into(), "v0".into(), "v1".into(), a)],
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn shortest_walk_across_the_line() {
        let g = line_graph(1.0);
        let walks = enumerate_walks(
            &g,
            EdgeRef::External(0),
            Side::Minus,
            EdgeRef::External(1),
            Side::Minus,
            1.0,
            1000,
        )
        .unwrap();
        assert_eq!(walks.len(), 1);
        assert_eq!(walks[0].comb_len(), 1);
        assert!((walks[0].metric_len - 1.0).abs() < 1e-15);
        assert!(walks[0].is_reflectionless());
    }

    #[test]
    fn trivial_walk_present_when_incident() {
        let g = line_graph(1.0);
        let walks = enumerate_walks(
            &g,
            EdgeRef::External(0),
            Side::Minus,
            EdgeRef::Internal(0),
            Side::Minus,
            0.5,
            1000,
        )
        .unwrap();
        assert_eq!(walks.len(), 1);
        assert!(walks[0].is_trivial());
        assert_eq!(walks[0].metric_len, 0.0);
    }

    #[test]
    fn back_and_forth_walk_count() {
        // i -> i entering and leaving through opposite ends: lengths a, 3a, 5a...
        let g = interval(1.0);
        let walks = enumerate_walks(
            &g,
            EdgeRef::Internal(0),
            Side::Minus,
            EdgeRef::Internal(0),
            Side::Plus,
            3.0,
            1000,
        )
        .unwrap();
        assert_eq!(walks.len(), 2);
        assert_eq!(walks[0].comb_len(), 1);
        assert_eq!(walks[1].comb_len(), 3);
    }

    #[test]
    fn walk_counts_follow_doubling_recursion() {
        // on a single interval each traversal level has exactly 2 walks
        // (enter bouncing at either end) for every (side, side) pair summed;
        // counts with |w| <= N a across all four side pairs: 2N
        let g = interval(1.0);
        let mut total = 0;
        for s in [Side::Minus, Side::Plus] {
            for sp in [Side::Minus, Side::Plus] {
                total += enumerate_walks(
                    &g,
                    EdgeRef::Internal(0),
                    sp,
                    EdgeRef::Internal(0),
                    s,
                    6.0 + 1e-9,
                    10_000,
                )
                .unwrap()
                .iter()
                .filter(|w| !w.is_trivial())
                .count();
            }
        }
        assert_eq!(total, 12);
    }

    #[test]
    fn weights_on_transparent_line() {
        // standard degree-2 vertices transmit with amplitude 1, reflect 0
        let g = line_graph(1.0);
        let conds: Vec<_> = (0..2)
            .map(|v| {
                make_vertex_conditions(&VertexKind::Standard, g.vertex_id(v), 2).unwrap()
            })
            .collect();
        let sm = VertexSMatrices::from_vertex_conditions(&g, &conds, 1.0).unwrap();
        let walks = enumerate_walks(
            &g,
            EdgeRef::External(0),
            Side::Minus,
            EdgeRef::External(1),
            Side::Minus,
            1.0,
            100,
        )
        .unwrap();
        let w = walk_weight(&g, &sm, &walks[0]).unwrap();
        assert!((w - cr(1.0)).norm() < 1e-12);
    }

    #[test]
    fn dirichlet_reflection_weight_is_minus_one() {
        let g = interval(1.0);
        let conds: Vec<_> = (0..2)
            .map(|v| {
                make_vertex_conditions(&VertexKind::Dirichlet, g.vertex_id(v), 1).unwrap()
            })
            .collect();
        let sm = VertexSMatrices::from_vertex_conditions(&g, &conds, 2.0).unwrap();
        let walks = enumerate_walks(
            &g,
            EdgeRef::Internal(0),
            Side::Minus,
            EdgeRef::Internal(0),
            Side::Minus,
            0.0,
            100,
        )
        .unwrap();
        assert!(walks[0].is_trivial());
        let w = walk_weight(&g, &sm, &walks[0]).unwrap();
        assert!((w - cr(-1.0)).norm() < 1e-14);
    }

    #[test]
    fn kirchhoff_star_wj_vanishes() {
        let g = build_graph(&GraphSpec {
            vertices: vec!["c".into()],
            external_edges: (0..3).map(|k| (format!("e{k}"), "c".into())).collect(),
            ..Default::default()
        })
        .unwrap();
        let conds = vec![make_vertex_conditions(&VertexKind::Standard, "c", 3).unwrap()];
        let bc = assemble_global(&g, &conds).unwrap();
        let w = wj_positivity_term(&g, &bc, 2.0, EdgeRef::External(0), 0.7).unwrap();
        assert!(w.norm() < 1e-12);
    }

    #[test]
    fn robin_star_wj_matches_kitti_factor() {
        // alpha = 0, g = -h on two edges: <g,h> = -2, so S h = h/3 at
        // kappa = 1, (I - S) h = (2/3) h and w_j(x) = (2/3) e^{-x}
        let g = build_graph(&GraphSpec {
            vertices: vec!["c".into()],
            external_edges: (0..2).map(|k| (format!("e{k}"), "c".into())).collect(),
            ..Default::default()
        })
        .unwrap();
        let conds = vec![make_vertex_conditions(
            &VertexKind::Generic {
                alpha: Alpha::Zero,
                g: CVector::from_element(2, cr(-1.0)),
            },
            "c",
            2,
        )
        .unwrap()];
        let bc = assemble_global(&g, &conds).unwrap();
        let x = 0.9;
        let w = wj_positivity_term(&g, &bc, 1.0, EdgeRef::External(0), x).unwrap();
        let expect = 2.0 / 3.0 * (-x).exp();
        assert!((w - cr(expect)).norm() < 1e-12, "got {w}, want {expect}");
    }

    #[test]
    fn dichotomy_classes() {
        let g = line_graph(1.0);
        let standard: Vec<_> = (0..2)
            .map(|v| {
                make_vertex_conditions(&VertexKind::Standard, g.vertex_id(v), 2).unwrap()
            })
            .collect();
        let sm = VertexSMatrices::from_vertex_conditions(&g, &standard, 3.0).unwrap();
        assert!(vertex_dichotomy(&g, &sm)
            .iter()
            .all(|c| *c == VertexClass::Fixed));

        let robin: Vec<_> = (0..2)
            .map(|v| {
                make_vertex_conditions(
                    &VertexKind::Generic {
                        alpha: Alpha::Zero,
                        g: CVector::from_element(2, cr(-0.5)),
                    },
                    g.vertex_id(v),
                    2,
                )
                .unwrap()
            })
            .collect();
        let sm = VertexSMatrices::from_vertex_conditions(&g, &robin, 1.0).unwrap();
        assert!(vertex_dichotomy(&g, &sm)
            .iter()
            .all(|c| *c == VertexClass::StrictlyBelow));
    }
}
