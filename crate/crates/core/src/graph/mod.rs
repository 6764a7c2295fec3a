//! Labeled undirected graphs: the sample representation shared by every
//! other module (molecules, optical setups, synthetic graphs).
//!
//! Graphs are immutable once built. Construction validates the structural
//! invariants (no self-loops, no parallel edges, endpoints in range, non-empty
//! labels), so every `LabeledGraph` in circulation is well formed.

mod canon;
mod env;
mod mutate;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

pub use canon::{canonical_form, canonical_form_with_budget, CanonError, DEFAULT_NODE_BUDGET};
pub use env::{contains_environment, extract_environment, EnvError, EnvPattern, EnvironmentDescriptor};
pub use mutate::{mutate, mutate_with_rng, Edit, MutateError, MutationKind, MutationSpec, MAX_MUTATION_ATTEMPTS};

/// Categorical node label: a kind token plus ordered attributes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeLabel {
    pub kind: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty", deserialize_with = "unique_attrs")]
    pub attrs: BTreeMap<String, String>,
}

impl NodeLabel {
    pub fn new(kind: impl Into<String>) -> Self {
        Self { kind: kind.into(), attrs: BTreeMap::new() }
    }

    pub fn with_attr(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attrs.insert(key.into(), value.into());
        self
    }

    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.get(key).map(String::as_str)
    }

    /// Length-prefixed serialization of kind and sorted attributes.
    pub fn token(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.kind.len());
        push_str(&mut out, &self.kind);
        out.extend_from_slice(&(self.attrs.len() as u64).to_le_bytes());
        for (k, v) in &self.attrs {
            push_str(&mut out, k);
            push_str(&mut out, v);
        }
        out
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.kind)?;
        if !self.attrs.is_empty() {
            f.write_str("{")?;
            for (i, (k, v)) in self.attrs.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{k}={v}")?;
            }
            f.write_str("}")?;
        }
        Ok(())
    }
}

pub(crate) fn push_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u64).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn unique_attrs<'de, D>(deserializer: D) -> Result<BTreeMap<String, String>, D::Error>
where
    D: Deserializer<'de>,
{
    struct AttrVisitor;

    impl<'de> Visitor<'de> for AttrVisitor {
        type Value = BTreeMap<String, String>;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("an object of string attributes")
        }

        fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
            let mut out = BTreeMap::new();
            while let Some((k, v)) = map.next_entry::<String, String>()? {
                if out.contains_key(&k) {
                    return Err(serde::de::Error::custom(format!("duplicate attribute key `{k}`")));
                }
                out.insert(k, v);
            }
            Ok(out)
        }
    }

    deserializer.deserialize_map(AttrVisitor)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeLabel {
    pub kind: String,
}

impl EdgeLabel {
    pub fn new(kind: impl Into<String>) -> Self {
        Self { kind: kind.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("node {0} has an empty kind")]
    EmptyNodeKind(usize),
    #[error("edge {0} has an empty kind")]
    EmptyEdgeKind(usize),
    #[error("edge {edge} references node {node}, but the graph has {count} nodes")]
    NodeOutOfRange { edge: usize, node: usize, count: usize },
    #[error("edge {edge} is a self-loop on node {node}")]
    SelfLoop { edge: usize, node: usize },
    #[error("duplicate edge between nodes {0} and {1}")]
    DuplicateEdge(usize, usize),
}

/// An undirected simple graph with categorical node and edge labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    id: String,
    nodes: Vec<NodeLabel>,
    edges: Vec<Edge>,
    // (neighbor, edge index), sorted by neighbor
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl LabeledGraph {
    pub fn new(
        id: impl Into<String>,
        nodes: Vec<NodeLabel>,
        edges: Vec<(usize, usize, EdgeLabel)>,
    ) -> Result<Self, GraphError> {
        for (i, n) in nodes.iter().enumerate() {
            if n.kind.is_empty() {
                return Err(GraphError::EmptyNodeKind(i));
            }
        }
        let count = nodes.len();
        let mut adjacency = vec![Vec::new(); count];
        let mut out = Vec::with_capacity(edges.len());
        for (i, (u, v, label)) in edges.into_iter().enumerate() {
            if label.kind.is_empty() {
                return Err(GraphError::EmptyEdgeKind(i));
            }
            for node in [u, v] {
                if node >= count {
                    return Err(GraphError::NodeOutOfRange { edge: i, node, count });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop { edge: i, node: u });
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            if adjacency[a].iter().any(|&(n, _)| n == b) {
                return Err(GraphError::DuplicateEdge(a, b));
            }
            adjacency[a].push((b, i));
            adjacency[b].push((a, i));
            out.push(Edge { u: a, v: b, label });
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self { id: id.into(), nodes, edges: out, adjacency })
    }

    pub fn empty(id: impl Into<String>) -> Self {
        Self { id: id.into(), nodes: Vec::new(), edges: Vec::new(), adjacency: Vec::new() }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn nodes(&self) -> &[NodeLabel] {
        &self.nodes
    }

    pub fn node(&self, v: usize) -> &NodeLabel {
        &self.nodes[v]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Neighbors of `v` as `(neighbor, edge index)`, ascending by neighbor.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<&EdgeLabel> {
        self.adjacency[u].binary_search_by_key(&v, |&(n, _)| n).ok().map(|i| &self.edges[self.adjacency[u][i].1].label)
    }

    /// Edge list in constructor form, for rebuilding modified copies.
    pub fn edge_triples(&self) -> Vec<(usize, usize, EdgeLabel)> {
        self.edges.iter().map(|e| (e.u, e.v, e.label.clone())).collect()
    }

    /// Hop distances from `root`, `None` beyond `max_hops` or unreachable.
    pub fn distances_from(&self, root: usize, max_hops: u32) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.nodes.len()];
        dist[root] = Some(0);
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap_or(0);
            if d == max_hops {
                continue;
            }
            for &(u, _) in &self.adjacency[v] {
                if dist[u].is_none() {
                    dist[u] = Some(d + 1);
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.nodes.len()];
        let mut count = 0;
        for start in 0..self.nodes.len() {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &(u, _) in &self.adjacency[v] {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
        }
        count
    }

    /// Relabels nodes so that old node `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.nodes.len(), "permutation length mismatch");
        let mut nodes = vec![NodeLabel::new("?"); self.nodes.len()];
        for (old, &new) in perm.iter().enumerate() {
            nodes[new] = self.nodes[old].clone();
        }
        let edges = self.edges.iter().map(|e| (perm[e.u], perm[e.v], e.label.clone())).collect();
        Self::new(self.id.clone(), nodes, edges).expect("permutation preserves validity")
    }

    /// All distinct node labels, sorted.
    pub fn node_alphabet(&self) -> Vec<NodeLabel> {
        let mut out: Vec<_> = self.nodes.to_vec();
        out.sort();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(kinds: &[&str]) -> LabeledGraph {
        let nodes = kinds.iter().map(|k| NodeLabel::new(*k)).collect();
        let edges = (1..kinds.len()).map(|i| (i - 1, i, EdgeLabel::new("single"))).collect();
        LabeledGraph::new("p", nodes, edges).unwrap()
    }

    #[test]
    fn rejects_structural_violations() {
        let n = || vec![NodeLabel::new("C"), NodeLabel::new("O")];
        let e = || EdgeLabel::new("single");
        assert_eq!(
            LabeledGraph::new("g", n(), vec![(0, 1, e()), (1, 0, e())]).unwrap_err(),
            GraphError::DuplicateEdge(0, 1)
        );
        assert!(matches!(LabeledGraph::new("g", n(), vec![(0, 0, e())]).unwrap_err(), GraphError::SelfLoop { .. }));
        assert!(matches!(
            LabeledGraph::new("g", n(), vec![(0, 2, e())]).unwrap_err(),
            GraphError::NodeOutOfRange { node: 2, .. }
        ));
        assert_eq!(LabeledGraph::new("g", vec![NodeLabel::new("")], vec![]).unwrap_err(), GraphError::EmptyNodeKind(0));
        assert_eq!(
            LabeledGraph::new("g", n(), vec![(0, 1, EdgeLabel::new(""))]).unwrap_err(),
            GraphError::EmptyEdgeKind(0)
        );
    }

    #[test]
    fn empty_graph_is_legal() {
        let g = LabeledGraph::new("e", vec![], vec![]).unwrap();
        assert!(g.is_empty());
        assert_eq!(g.component_count(), 0);
    }

    #[test]
    fn distances_and_components() {
        let g = path(&["C", "C", "O", "N"]);
        assert_eq!(g.distances_from(0, 2), vec![Some(0), Some(1), Some(2), None]);
        assert_eq!(g.component_count(), 1);
        assert_eq!(g.edge_between(2, 1).unwrap().kind, "single");
        assert!(g.edge_between(0, 2).is_none());
    }

    #[test]
    fn permutation_moves_labels() {
        let g = path(&["C", "O"]);
        let p = g.permuted(&[1, 0]);
        assert_eq!(p.node(0).kind, "O");
        assert_eq!(p.node(1).kind, "C");
        assert_eq!(p.edge_count(), 1);
    }

    #[test]
    fn token_distinguishes_attrs() {
        let a = NodeLabel::new("C").with_attr("charge", "0");
        let b = NodeLabel::new("C").with_attr("charge", "-1");
        assert_ne!(a.token(), b.token());
        assert_ne!(NodeLabel::new("ab").token(), NodeLabel::new("a").with_attr("b", "").token());
        assert_eq!(a.to_string(), "C{charge=0}");
    }

    #[test]
    fn duplicate_attr_keys_rejected() {
        let err = serde_json::from_str::<NodeLabel>(r#"{"kind":"C","attrs":{"a":"1","a":"2"}}"#);
        assert!(err.is_err());
    }
}
