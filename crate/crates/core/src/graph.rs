//! Metric-graph data model: vertices, internal edges with lengths, external
//! half-lines, and the fixed ordering of boundary degrees of freedom.
//!
//! The boundary space `K` has dimension `m = |E| + 2|I|` and is ordered as
//! external edges (input order), then the initial endpoints of the internal
//! edges, then their terminal endpoints. All matrices in this crate act on
//! that fixed ordering.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::{cr, CVector, C64};

/// Which end of an edge a boundary slot refers to.
///
/// External edges only have a `Minus` end (their single vertex).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::Minus => Side::Plus,
            Side::Plus => Side::Minus,
        }
    }
}

/// An edge of the graph, referenced by position within its kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeRef {
    External(usize),
    Internal(usize),
}

impl EdgeRef {
    pub fn is_internal(&self) -> bool {
        matches!(self, EdgeRef::Internal(_))
    }
}

#[derive(Debug, Clone)]
pub struct InternalEdge {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct ExternalEdge {
    pub id: String,
    pub vertex: usize,
}

/// Plain description of a graph, used to build a validated [`MetricGraph`].
#[derive(Debug, Clone, Default)]
pub struct GraphSpec {
    pub vertices: Vec<String>,
    pub internal_edges: Vec<(String, String, String, f64)>, // (id, from, to, length)
    pub external_edges: Vec<(String, String)>,              // (id, vertex)
}

/// One slot of the boundary space: an edge endpoint carrying a value and a
/// (signed) derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot {
    pub edge: EdgeRef,
    pub side: Side,
}

/// Index layout of `K = K_E + K_I^- + K_I^+`.
#[derive(Debug, Clone)]
pub struct KLayout {
    /// Slot meaning of every K index, in order.
    slots: Vec<Slot>,
    /// Per-vertex index sets realizing the orthogonal decomposition of K.
    vertex_indices: Vec<Vec<usize>>,
    n_external: usize,
    n_internal: usize,
}

impl KLayout {
    pub fn dim(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn slot(&self, k: usize) -> Slot {
        self.slots[k]
    }

    /// K index of an edge endpoint.
    pub fn index_of(&self, edge: EdgeRef, side: Side) -> usize {
        match (edge, side) {
            (EdgeRef::External(e), Side::Minus) => e,
            (EdgeRef::External(_), Side::Plus) => {
                panic!("external edges have no terminal endpoint")
            }
            (EdgeRef::Internal(i), Side::Minus) => self.n_external + i,
            (EdgeRef::Internal(i), Side::Plus) => self.n_external + self.n_internal + i,
        }
    }

    /// Sorted K indices belonging to the subspace of a vertex.
    pub fn vertex_indices(&self, v: usize) -> &[usize] {
        &self.vertex_indices[v]
    }

    /// Position of a K index within its vertex block.
    pub fn local_slot(&self, v: usize, k: usize) -> Option<usize> {
        self.vertex_indices[v].iter().position(|&j| j == k)
    }

    /// The all-ones vector of the vertex subspace, embedded in K.
    pub fn h_vertex(&self, v: usize) -> CVector {
        let mut h = CVector::zeros(self.dim());
        for &k in &self.vertex_indices[v] {
            h[k] = cr(1.0);
        }
        h
    }

    /// The global all-ones vector.
    pub fn h(&self) -> CVector {
        CVector::from_element(self.dim(), cr(1.0))
    }
}

/// A validated metric graph with its boundary-space layout attached.
#[derive(Debug, Clone)]
pub struct MetricGraph {
    vertices: Vec<String>,
    internal: Vec<InternalEdge>,
    external: Vec<ExternalEdge>,
    degrees: Vec<usize>,
    layout: KLayout,
    vertex_lookup: HashMap<String, usize>,
}

impl MetricGraph {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_id(&self, v: usize) -> &str {
        &self.vertices[v]
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertex_lookup.get(id).copied()
    }

    pub fn internal_edges(&self) -> &[InternalEdge] {
        &self.internal
    }

    pub fn external_edges(&self) -> &[ExternalEdge] {
        &self.external
    }

    pub fn n_internal(&self) -> usize {
        self.internal.len()
    }

    pub fn n_external(&self) -> usize {
        self.external.len()
    }

    /// Total number of edges |E| + |I|.
    pub fn n_edges(&self) -> usize {
        self.internal.len() + self.external.len()
    }

    /// Dimension of the boundary space, |E| + 2|I|.
    pub fn boundary_dim(&self) -> usize {
        self.external.len() + 2 * self.internal.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.degrees[v]
    }

    pub fn layout(&self) -> &KLayout {
        &self.layout
    }

    pub fn has_tadpole(&self) -> bool {
        self.internal.iter().any(|e| e.from == e.to)
    }

    pub fn is_compact(&self) -> bool {
        self.external.is_empty()
    }

    /// Edges in the fixed row order of kernels and sampled functions:
    /// externals first, then internals.
    pub fn edges(&self) -> impl Iterator<Item = EdgeRef> + '_ {
        (0..self.external.len())
            .map(EdgeRef::External)
            .chain((0..self.internal.len()).map(EdgeRef::Internal))
    }

    pub fn edge_id(&self, e: EdgeRef) -> &str {
        match e {
            EdgeRef::External(i) => &self.external[i].id,
            EdgeRef::Internal(i) => &self.internal[i].id,
        }
    }

    pub fn edge_by_id(&self, id: &str) -> Option<EdgeRef> {
        if let Some(i) = self.external.iter().position(|e| e.id == id) {
            return Some(EdgeRef::External(i));
        }
        self.internal
            .iter()
            .position(|e| e.id == id)
            .map(EdgeRef::Internal)
    }

    /// Length of an internal edge; `None` for half-lines.
    pub fn length(&self, e: EdgeRef) -> Option<f64> {
        match e {
            EdgeRef::External(_) => None,
            EdgeRef::Internal(i) => Some(self.internal[i].length),
        }
    }

    pub fn min_internal_length(&self) -> Option<f64> {
        self.internal
            .iter()
            .map(|e| e.length)
            .min_by(f64::total_cmp)
    }

    pub fn max_internal_length(&self) -> Option<f64> {
        self.internal
            .iter()
            .map(|e| e.length)
            .max_by(f64::total_cmp)
    }

    /// Vertex at a given edge endpoint.
    pub fn endpoint(&self, e: EdgeRef, side: Side) -> usize {
        match (e, side) {
            (EdgeRef::External(i), Side::Minus) => self.external[i].vertex,
            (EdgeRef::External(i), Side::Plus) => {
                // no terminal vertex; callers must not ask
                panic!("external edge `{}` has no terminal vertex", self.external[i].id)
            }
            (EdgeRef::Internal(i), Side::Minus) => self.internal[i].from,
            (EdgeRef::Internal(i), Side::Plus) => self.internal[i].to,
        }
    }

    /// All slots incident with a vertex, in K-index order.
    pub fn incident_slots(&self, v: usize) -> Vec<Slot> {
        self.layout
            .vertex_indices(v)
            .iter()
            .map(|&k| self.layout.slot(k))
            .collect()
    }
}

/// Build and validate a metric graph from its description.
pub fn build_graph(spec: &GraphSpec) -> Result<MetricGraph> {
    if spec.internal_edges.is_empty() && spec.external_edges.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut vertex_lookup = HashMap::new();
    for (i, v) in spec.vertices.iter().enumerate() {
        if vertex_lookup.insert(v.clone(), i).is_some() {
            return Err(Error::DuplicateId(v.clone()));
        }
    }
    let mut seen_edges = HashMap::new();
    let resolve = |edge: &str, v: &str| -> Result<usize> {
        vertex_lookup
            .get(v)
            .copied()
            .ok_or_else(|| Error::DanglingVertexReference {
                edge: edge.to_string(),
                vertex: v.to_string(),
            })
    };

    let mut internal = Vec::new();
    for (id, from, to, length) in &spec.internal_edges {
        if seen_edges.insert(id.clone(), ()).is_some() {
            return Err(Error::DuplicateId(id.clone()));
        }
        if !(*length > 0.0) {
            return Err(Error::NonpositiveLength(id.clone(), *length));
        }
        internal.push(InternalEdge {
            id: id.clone(),
            from: resolve(id, from)?,
            to: resolve(id, to)?,
            length: *length,
        });
    }
    let mut external = Vec::new();
    for (id, v) in &spec.external_edges {
        if seen_edges.insert(id.clone(), ()).is_some() {
            return Err(Error::DuplicateId(id.clone()));
        }
        external.push(ExternalEdge {
            id: id.clone(),
            vertex: resolve(id, v)?,
        });
    }

    let nv = spec.vertices.len();
    let mut degrees = vec![0usize; nv];
    for e in &external {
        degrees[e.vertex] += 1;
    }
    for e in &internal {
        degrees[e.from] += 1;
        degrees[e.to] += 1; // tadpoles counted twice
    }
    if let Some(v) = degrees.iter().position(|&d| d == 0) {
        return Err(Error::ZeroDegreeVertex(spec.vertices[v].clone()));
    }

    // connectivity over internal edges only (external edges touch one vertex)
    if nv > 0 {
        let mut seen = vec![false; nv];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for e in &internal {
                for (a, b) in [(e.from, e.to), (e.to, e.from)] {
                    if a == v && !seen[b] {
                        seen[b] = true;
                        stack.push(b);
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::DisconnectedGraph);
        }
    }

    let layout = boundary_space_layout_parts(nv, &internal, &external);
    Ok(MetricGraph {
        vertices: spec.vertices.clone(),
        internal,
        external,
        degrees,
        layout,
        vertex_lookup,
    })
}

fn boundary_space_layout_parts(
    nv: usize,
    internal: &[InternalEdge],
    external: &[ExternalEdge],
) -> KLayout {
    let ne = external.len();
    let ni = internal.len();
    let mut slots = Vec::with_capacity(ne + 2 * ni);
    for e in 0..ne {
        slots.push(Slot {
            edge: EdgeRef::External(e),
            side: Side::Minus,
        });
    }
    for i in 0..ni {
        slots.push(Slot {
            edge: EdgeRef::Internal(i),
            side: Side::Minus,
        });
    }
    for i in 0..ni {
        slots.push(Slot {
            edge: EdgeRef::Internal(i),
            side: Side::Plus,
        });
    }
    let mut vertex_indices = vec![Vec::new(); nv];
    for (k, e) in external.iter().enumerate() {
        vertex_indices[e.vertex].push(k);
    }
    for (i, e) in internal.iter().enumerate() {
        vertex_indices[e.from].push(ne + i);
    }
    for (i, e) in internal.iter().enumerate() {
        vertex_indices[e.to].push(ne + ni + i);
    }
    for ix in &mut vertex_indices {
        ix.sort_unstable();
    }
    KLayout {
        slots,
        vertex_indices,
        n_external: ne,
        n_internal: ni,
    }
}

/// The index layout of the boundary space of a validated graph.
pub fn boundary_space_layout(g: &MetricGraph) -> &KLayout {
    g.layout()
}

/// Boundary values at the endpoints of one edge.
#[derive(Debug, Clone, Copy)]
pub enum EdgeTrace {
    External {
        value: C64,
        derivative: C64,
    },
    Internal {
        value_start: C64,
        derivative_start: C64,
        value_end: C64,
        derivative_end: C64,
    },
}

/// Boundary traces ordered as K: `psi` carries values, `dpsi` carries inward
/// derivatives with the sign flip `-psi'(a)` on the terminal block.
#[derive(Debug, Clone)]
pub struct TraceVector {
    pub psi: CVector,
    pub dpsi: CVector,
}

impl TraceVector {
    /// The concatenation in the doubled space, dimension 2m.
    pub fn doubled(&self) -> CVector {
        let m = self.psi.len();
        CVector::from_fn(2 * m, |r, _| {
            if r < m {
                self.psi[r]
            } else {
                self.dpsi[r - m]
            }
        })
    }
}

/// Assemble the trace vector of per-edge boundary data, keyed by edge id.
pub fn trace_vector(g: &MetricGraph, data: &HashMap<String, EdgeTrace>) -> Result<TraceVector> {
    let m = g.boundary_dim();
    let mut psi = CVector::zeros(m);
    let mut dpsi = CVector::zeros(m);
    let lay = g.layout();
    for (e, edge) in g.external_edges().iter().enumerate() {
        match data.get(&edge.id) {
            Some(EdgeTrace::External { value, derivative }) => {
                let k = lay.index_of(EdgeRef::External(e), Side::Minus);
                psi[k] = *value;
                dpsi[k] = *derivative;
            }
            _ => return Err(Error::MissingEndpointDatum(edge.id.clone())),
        }
    }
    for (i, edge) in g.internal_edges().iter().enumerate() {
        match data.get(&edge.id) {
            Some(EdgeTrace::Internal {
                value_start,
                derivative_start,
                value_end,
                derivative_end,
            }) => {
                let km = lay.index_of(EdgeRef::Internal(i), Side::Minus);
                let kp = lay.index_of(EdgeRef::Internal(i), Side::Plus);
                psi[km] = *value_start;
                dpsi[km] = *derivative_start;
                psi[kp] = *value_end;
                dpsi[kp] = -*derivative_end;
            }
            _ => return Err(Error::MissingEndpointDatum(edge.id.clone())),
        }
    }
    Ok(TraceVector { psi, dpsi })
}
