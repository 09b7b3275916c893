//! Report schema of the CLI: deterministic JSON with one entry per check.

use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub input: String,
    pub input_digest: String,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
    /// Rows for the csv format, when the payload is record-shaped.
    #[serde(skip)]
    pub csv: Option<(Vec<String>, Vec<Vec<String>>)>,
}

#[derive(Serialize)]
pub struct Check {
    pub name: String,
    pub status: &'static str,
    pub value: Value,
}

impl RunReport {
    pub fn new(command: &str, input: &str, digest: String) -> Self {
        RunReport {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            input: input.to_string(),
            input_digest: digest,
            checks: Vec::new(),
            warnings: Vec::new(),
            payload: None,
            csv: None,
        }
    }

    pub fn check(&mut self, name: &str, ok: bool, value: Value) {
        self.checks.push(Check {
            name: name.to_string(),
            status: if ok { "ok" } else { "failed" },
            value,
        });
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    pub fn any_failed(&self) -> bool {
        self.checks.iter().any(|c| c.status != "ok")
    }

    pub fn emit(&self, format: crate::Format) {
        match (format, &self.csv) {
            (crate::Format::Csv, Some((header, rows))) => {
                println!("{}", header.join(","));
                for row in rows {
                    println!("{}", row.join(","));
                }
            }
            _ => println!("{}", serde_json::to_string_pretty(self).unwrap()),
        }
    }
}

pub fn digest(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn diagnostic(err: &mgsg_core::Error) -> Value {
    serde_json::json!({
        "error": {
            "kind": kind_of(err),
            "message": err.to_string(),
        }
    })
}

fn kind_of(err: &mgsg_core::Error) -> &'static str {
    use mgsg_core::Error::*;
    match err {
        DisconnectedGraph => "DisconnectedGraph",
        ZeroDegreeVertex(_) => "ZeroDegreeVertex",
        NonpositiveLength(_, _) => "NonpositiveLength",
        DanglingVertexReference { .. } => "DanglingVertexReference",
        EmptyGraph => "EmptyGraph",
        DuplicateId(_) => "DuplicateId",
        MissingEndpointDatum(_) => "MissingEndpointDatum",
        DimensionMismatch { .. } => "DimensionMismatch",
        RankDeficient { .. } => "RankDeficient",
        InvalidParams(_) => "InvalidParams",
        MissingVertex(_) => "MissingVertex",
        DegreeMismatch { .. } => "DegreeMismatch",
        DegreeTooSmall(_) => "DegreeTooSmall",
        SingularAtK { .. } => "SingularAtK",
        PoleAtK => "PoleAtK",
        NotLocalInput => "NotLocalInput",
        NotContinuousInput(_) => "NotContinuousInput",
        TadpolePresent => "TadpolePresent",
        NotInResolventSet => "NotInResolventSet",
        EmptyRange => "EmptyRange",
        NonpositiveKernel => "NonpositiveKernel",
        NotAGenerator(_) => "NotAGenerator",
        ContourFailure(_) => "ContourFailure",
        LinearSolveFailure => "LinearSolveFailure",
        SeriesDiverges(_) => "SeriesDiverges",
        CutoffTooLarge(_) => "CutoffTooLarge",
        MissingVertexMatrix(_) => "MissingVertexMatrix",
        InvalidArgument(_) => "InvalidArgument",
    }
}
