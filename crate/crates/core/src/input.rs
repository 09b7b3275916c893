//! The JSON problem-file format: one file carries the graph and the
//! boundary conditions. Complex numbers serialize as `[re, im]` pairs.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bc::{
    assemble_global, make_vertex_conditions, Alpha, BoundaryConditions, VertexConditions,
    VertexKind,
};
use crate::error::{Error, Result};
use crate::graph::{build_graph, GraphSpec, MetricGraph};
use crate::linalg::{c, CMatrix, CVector, C64};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub vertices: Vec<String>,
    #[serde(default)]
    pub internal_edges: Vec<InternalEdgeSpec>,
    #[serde(default)]
    pub external_edges: Vec<ExternalEdgeSpec>,
    pub conditions: ConditionsSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InternalEdgeSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExternalEdgeSpec {
    pub id: String,
    pub vertex: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ConditionsSpec {
    #[serde(rename = "per_vertex")]
    PerVertex {
        #[serde(flatten)]
        vertices: HashMap<String, VertexKindSpec>,
    },
    #[serde(rename = "global")]
    Global {
        #[serde(rename = "A")]
        a: Vec<Vec<[f64; 2]>>,
        #[serde(rename = "B")]
        b: Vec<Vec<[f64; 2]>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VertexKindSpec {
    Dirichlet,
    Delta { gamma: [f64; 2] },
    Standard,
    Generic { alpha: i32, g: Vec<[f64; 2]> },
}

/// Boundary conditions as read from a file: either a validated global pair
/// or the per-vertex blocks (which also carry the assembled global pair).
#[derive(Debug, Clone)]
pub enum ParsedConditions {
    Global(BoundaryConditions),
    PerVertex {
        blocks: Vec<VertexConditions>,
        assembled: BoundaryConditions,
    },
}

impl ParsedConditions {
    pub fn boundary_conditions(&self) -> &BoundaryConditions {
        match self {
            ParsedConditions::Global(bc) => bc,
            ParsedConditions::PerVertex { assembled, .. } => assembled,
        }
    }

    pub fn vertex_blocks(&self) -> Option<&[VertexConditions]> {
        match self {
            ParsedConditions::Global(_) => None,
            ParsedConditions::PerVertex { blocks, .. } => Some(blocks),
        }
    }
}

pub fn complex_from_pair(p: [f64; 2]) -> C64 {
    c(p[0], p[1])
}

pub fn matrix_from_rows(rows: &[Vec<[f64; 2]>], m: usize) -> Result<CMatrix> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: rows.len(),
        });
    }
    Ok(CMatrix::from_fn(m, m, |r, cx| complex_from_pair(rows[r][cx])))
}

pub fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|cx| [m[(r, cx)].re, m[(r, cx)].im]).collect())
        .collect()
}

/// Interpret a parsed file: validate the graph and build the conditions.
pub fn realize(file: &ProblemFile) -> Result<(MetricGraph, ParsedConditions)> {
    let spec = GraphSpec {
        vertices: file.vertices.clone(),
        internal_edges: file
            .internal_edges
            .iter()
            .map(|e| (e.id.clone(), e.from.clone(), e.to.clone(), e.length))
            .collect(),
        external_edges: file
            .external_edges
            .iter()
            .map(|e| (e.id.clone(), e.vertex.clone()))
            .collect(),
    };
    let g = build_graph(&spec)?;
    let conds = match &file.conditions {
        ConditionsSpec::Global { a, b } => {
            let m = g.boundary_dim();
            let bc = BoundaryConditions::new(matrix_from_rows(a, m)?, matrix_from_rows(b, m)?)?;
            ParsedConditions::Global(bc)
        }
        ConditionsSpec::PerVertex { vertices } => {
            let mut blocks = Vec::new();
            for v in 0..g.vertex_count() {
                let id = g.vertex_id(v);
                let spec = vertices
                    .get(id)
                    .ok_or_else(|| Error::MissingVertex(id.to_string()))?;
                let kind = match spec {
                    VertexKindSpec::Dirichlet => VertexKind::Dirichlet,
                    VertexKindSpec::Standard => VertexKind::Standard,
                    VertexKindSpec::Delta { gamma } => VertexKind::Delta {
                        gamma: complex_from_pair(*gamma),
                    },
                    VertexKindSpec::Generic { alpha, g: gv } => {
                        let alpha = match alpha {
                            0 => Alpha::Zero,
                            -1 => Alpha::MinusOne,
                            other => {
                                return Err(Error::InvalidParams(format!(
                                    "alpha must be 0 or -1, got {other}"
                                )))
                            }
                        };
                        VertexKind::Generic {
                            alpha,
                            g: CVector::from_iterator(
                                gv.len(),
                                gv.iter().map(|p| complex_from_pair(*p)),
                            ),
                        }
                    }
                };
                blocks.push(make_vertex_conditions(&kind, id, g.degree(v))?);
            }
            let assembled = assemble_global(&g, &blocks)?;
            ParsedConditions::PerVertex { blocks, assembled }
        }
    };
    Ok((g, conds))
}

/// Read and realize a problem file from disk.
pub fn parse_spec(path: &Path) -> Result<(MetricGraph, ParsedConditions)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    let file: ProblemFile = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidArgument(format!("invalid problem file: {e}")))?;
    realize(&file)
}
