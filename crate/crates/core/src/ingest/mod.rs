//! Dataset ingestion: graph JSON-lines, molecule line-notation files and the
//! qubit-count labeling utility for optical-setup datasets.

mod smiles;

use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EdgeLabel, GraphError, LabeledGraph, NodeLabel};

pub use smiles::{parse_molecule, write_molecule, SmilesError, SmilesErrorKind, WriteError};

/// Edge kind used when a JSON-lines edge omits its label object.
pub const DEFAULT_EDGE_KIND: &str = "default";

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub graph: LabeledGraph,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("line {line}, column {column}: {message}")]
    Located { line: usize, column: usize, message: String },
    #[error("duplicate graph id `{0}`")]
    DuplicateId(String),
    #[error("graph `{id}` has a non-finite target")]
    NonFiniteTarget { id: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// A single JSON-lines record failure, without line information.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("malformed JSON at column {column}: {message}")]
    Json { column: usize, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("target y is not finite")]
    NonFinite,
}

impl Dataset {
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Result<Self, IngestError> {
        let mut seen = HashSet::new();
        for s in &samples {
            if !seen.insert(s.graph.id()) {
                return Err(IngestError::DuplicateId(s.graph.id().to_string()));
            }
            if !s.y.is_finite() {
                return Err(IngestError::NonFiniteTarget { id: s.graph.id().to_string() });
            }
        }
        Ok(Self { name: name.into(), samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.y).collect()
    }

    pub fn graphs(&self) -> impl Iterator<Item = &LabeledGraph> {
        self.samples.iter().map(|s| &s.graph)
    }

    /// Sorted distinct node and edge labels over all graphs.
    pub fn alphabets(&self) -> (Vec<NodeLabel>, Vec<EdgeLabel>) {
        let mut nodes: Vec<NodeLabel> = self.graphs().flat_map(|g| g.nodes().iter().cloned()).collect();
        nodes.sort();
        nodes.dedup();
        let mut edges: Vec<EdgeLabel> = self.graphs().flat_map(|g| g.edges().iter().map(|e| e.label.clone())).collect();
        edges.sort();
        edges.dedup();
        (nodes, edges)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&graph_to_json(&s.graph, Some(s.y)));
            out.push('\n');
        }
        out
    }
}

#[derive(Deserialize)]
struct GraphRecord {
    id: String,
    nodes: Vec<NodeLabel>,
    edges: Vec<EdgeRecord>,
    #[serde(default)]
    y: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EdgeRecord {
    Labeled(usize, usize, EdgeLabel),
    Bare(usize, usize),
}

#[derive(Serialize)]
struct GraphRecordOut<'a> {
    id: &'a str,
    nodes: &'a [NodeLabel],
    edges: Vec<(usize, usize, &'a EdgeLabel)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    y: Option<f64>,
}

/// Parses one JSON-lines graph record.
pub fn parse_graph_jsonl(line: &str) -> Result<(LabeledGraph, Option<f64>), RecordError> {
    let rec: GraphRecord =
        serde_json::from_str(line).map_err(|e| RecordError::Json { column: e.column(), message: e.to_string() })?;
    let edges = rec
        .edges
        .into_iter()
        .map(|e| match e {
            EdgeRecord::Labeled(u, v, l) => (u, v, l),
            EdgeRecord::Bare(u, v) => (u, v, EdgeLabel::new(DEFAULT_EDGE_KIND)),
        })
        .collect();
    let graph = LabeledGraph::new(rec.id, rec.nodes, edges)?;
    if let Some(y) = rec.y {
        if !y.is_finite() {
            return Err(RecordError::NonFinite);
        }
    }
    Ok((graph, rec.y))
}

/// Serializes a graph in the JSON-lines schema; `y` omitted when `None`.
pub fn graph_to_json(g: &LabeledGraph, y: Option<f64>) -> String {
    let rec = GraphRecordOut {
        id: g.id(),
        nodes: g.nodes(),
        edges: g.edges().iter().map(|e| (e.u, e.v, &e.label)).collect(),
        y,
    };
    serde_json::to_string(&rec).expect("graph records always serialize")
}

fn content_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .collect()
}

/// Reads a graph JSON-lines document; every record must carry `y`.
pub fn read_graph_jsonl(text: &str, name: &str) -> Result<Dataset, IngestError> {
    let parsed: Vec<Result<Sample, IngestError>> = content_lines(text)
        .into_par_iter()
        .map(|(line, l)| {
            let (graph, y) = parse_graph_jsonl(l).map_err(|e| match e {
                RecordError::Json { column, message } => IngestError::Located { line, column, message },
                other => IngestError::Line { line, message: other.to_string() },
            })?;
            let y = y.ok_or_else(|| IngestError::Line { line, message: "missing target `y`".into() })?;
            Ok(Sample { graph, y })
        })
        .collect();
    let samples = parsed.into_iter().collect::<Result<Vec<_>, _>>()?;
    Dataset::new(name, samples)
}

/// Reads `<line-notation>\t<y>` records; `#` lines and blank lines are skipped.
pub fn read_molecule_file(text: &str, name: &str) -> Result<Dataset, IngestError> {
    let parsed: Vec<Result<Sample, IngestError>> = content_lines(text)
        .into_par_iter()
        .map(|(line, l)| {
            let (smiles, y) = l
                .split_once('\t')
                .or_else(|| l.trim().split_once(char::is_whitespace))
                .ok_or_else(|| IngestError::Line { line, message: "expected `<molecule>\\t<y>`".into() })?;
            let y: f64 = y
                .trim()
                .parse()
                .map_err(|_| IngestError::Line { line, message: format!("target `{}` is not a number", y.trim()) })?;
            let graph = parse_molecule(smiles.trim()).map_err(|e| IngestError::Located {
                line,
                column: e.column,
                message: e.kind.to_string(),
            })?;
            Ok(Sample { graph: graph.with_id(format!("mol{line}")), y })
        })
        .collect();
    let samples = parsed.into_iter().collect::<Result<Vec<_>, _>>()?;
    Dataset::new(name, samples)
}

/// Loads a dataset, choosing the format by extension: `.jsonl`/`.json` are
/// graph records, anything else is a molecule file.
pub fn load_dataset(path: &Path) -> Result<Dataset, IngestError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string();
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("json") => read_graph_jsonl(&text, &name),
        _ => read_molecule_file(&text, &name),
    }
}

/// Schmidt ranks of the three single-photon reduced density matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchmidtRanks {
    d1: u32,
    d2: u32,
    d3: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("Schmidt ranks must be at least 1, got ({0}, {1}, {2})")]
pub struct InvalidRanks(pub u32, pub u32, pub u32);

impl SchmidtRanks {
    pub fn new(d1: u32, d2: u32, d3: u32) -> Result<Self, InvalidRanks> {
        if d1 == 0 || d2 == 0 || d3 == 0 {
            return Err(InvalidRanks(d1, d2, d3));
        }
        Ok(Self { d1, d2, d3 })
    }

    pub fn ranks(&self) -> (u32, u32, u32) {
        (self.d1, self.d2, self.d3)
    }
}

/// Size of the involved Hilbert space in qubits: log2(d1 * d2 * d3).
pub fn n_qubits(r: &SchmidtRanks) -> f64 {
    (f64::from(r.d1) * f64::from(r.d2) * f64::from(r.d3)).log2()
}
