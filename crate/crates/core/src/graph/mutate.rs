//! Single-edit graph mutations for hypothesis verification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EdgeLabel, LabeledGraph, NodeLabel};

/// Rejected (disconnecting) proposals allowed before giving up.
pub const MAX_MUTATION_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    NodeRelabel,
    EdgeRelabel,
    EdgeAdd,
    EdgeDelete,
    LeafAdd,
    LeafDelete,
}

impl MutationKind {
    pub const ALL: [MutationKind; 6] = [
        MutationKind::NodeRelabel,
        MutationKind::EdgeRelabel,
        MutationKind::EdgeAdd,
        MutationKind::EdgeDelete,
        MutationKind::LeafAdd,
        MutationKind::LeafDelete,
    ];
}

/// Which edits to draw, with relative weights, and the label alphabets that
/// relabel/add edits draw from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationSpec {
    pub weights: Vec<(MutationKind, f64)>,
    pub node_labels: Vec<NodeLabel>,
    pub edge_labels: Vec<EdgeLabel>,
}

impl MutationSpec {
    /// Every edit kind with equal weight.
    pub fn uniform(node_labels: Vec<NodeLabel>, edge_labels: Vec<EdgeLabel>) -> Self {
        Self { weights: MutationKind::ALL.iter().map(|&k| (k, 1.0)).collect(), node_labels, edge_labels }
    }

    pub fn only(kind: MutationKind, node_labels: Vec<NodeLabel>, edge_labels: Vec<EdgeLabel>) -> Self {
        Self { weights: vec![(kind, 1.0)], node_labels, edge_labels }
    }
}

/// The edit that turned the input into the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "edit", rename_all = "snake_case")]
pub enum Edit {
    NodeRelabel { node: usize, label: NodeLabel },
    EdgeRelabel { u: usize, v: usize, label: EdgeLabel },
    EdgeAdd { u: usize, v: usize, label: EdgeLabel },
    EdgeDelete { u: usize, v: usize },
    LeafAdd { anchor: usize, label: NodeLabel, edge: EdgeLabel },
    LeafDelete { node: usize },
}

impl Edit {
    pub fn kind(&self) -> MutationKind {
        match self {
            Edit::NodeRelabel { .. } => MutationKind::NodeRelabel,
            Edit::EdgeRelabel { .. } => MutationKind::EdgeRelabel,
            Edit::EdgeAdd { .. } => MutationKind::EdgeAdd,
            Edit::EdgeDelete { .. } => MutationKind::EdgeDelete,
            Edit::LeafAdd { .. } => MutationKind::LeafAdd,
            Edit::LeafDelete { .. } => MutationKind::LeafDelete,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MutateError {
    #[error("cannot mutate an empty graph")]
    EmptyGraph,
    #[error("no legal edit among the requested kinds {0:?}")]
    NoLegalEdit(Vec<MutationKind>),
    #[error("every proposed edit disconnected the graph ({0} attempts)")]
    Disconnects(usize),
}

/// Applies exactly one random edit, deterministically for a given seed.
pub fn mutate(g: &LabeledGraph, seed: u64, spec: &MutationSpec) -> Result<LabeledGraph, MutateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    mutate_with_rng(g, &mut rng, spec).map(|(out, _)| out)
}

pub fn mutate_with_rng<R: Rng + ?Sized>(
    g: &LabeledGraph,
    rng: &mut R,
    spec: &MutationSpec,
) -> Result<(LabeledGraph, Edit), MutateError> {
    if g.is_empty() {
        return Err(MutateError::EmptyGraph);
    }
    let requested: Vec<MutationKind> = spec.weights.iter().filter(|(_, w)| *w > 0.0).map(|(k, _)| *k).collect();
    let available: Vec<(MutationKind, f64)> =
        spec.weights.iter().copied().filter(|&(k, w)| w > 0.0 && has_candidate(g, k, spec)).collect();
    if available.is_empty() {
        return Err(MutateError::NoLegalEdit(requested));
    }
    let components = g.component_count();
    let total: f64 = available.iter().map(|(_, w)| w).sum();
    for _ in 0..MAX_MUTATION_ATTEMPTS {
        let mut pick = rng.random::<f64>() * total;
        let mut kind = available[available.len() - 1].0;
        for &(k, w) in &available {
            if pick < w {
                kind = k;
                break;
            }
            pick -= w;
        }
        let Some(edit) = propose(g, kind, spec, rng) else { continue };
        let out = apply(g, &edit);
        if out.component_count() > components {
            continue;
        }
        return Ok((out, edit));
    }
    Err(MutateError::Disconnects(MAX_MUTATION_ATTEMPTS))
}

fn has_candidate(g: &LabeledGraph, kind: MutationKind, spec: &MutationSpec) -> bool {
    let n = g.node_count();
    match kind {
        MutationKind::NodeRelabel => g.nodes().iter().any(|l| spec.node_labels.iter().any(|c| c != l)),
        MutationKind::EdgeRelabel => g.edges().iter().any(|e| spec.edge_labels.iter().any(|c| c != &e.label)),
        MutationKind::EdgeAdd => !spec.edge_labels.is_empty() && g.edge_count() < n * (n - 1) / 2,
        MutationKind::EdgeDelete => g.edge_count() > 0,
        MutationKind::LeafAdd => !spec.node_labels.is_empty() && !spec.edge_labels.is_empty(),
        MutationKind::LeafDelete => n >= 2 && (0..n).any(|v| g.degree(v) == 1),
    }
}

fn choose<'a, T, R: Rng + ?Sized>(items: &'a [T], rng: &mut R) -> Option<&'a T> {
    if items.is_empty() {
        None
    } else {
        Some(&items[rng.random_range(0..items.len())])
    }
}

fn propose<R: Rng + ?Sized>(g: &LabeledGraph, kind: MutationKind, spec: &MutationSpec, rng: &mut R) -> Option<Edit> {
    let n = g.node_count();
    match kind {
        MutationKind::NodeRelabel => {
            let node = rng.random_range(0..n);
            let options: Vec<&NodeLabel> = spec.node_labels.iter().filter(|l| *l != g.node(node)).collect();
            choose(&options, rng).map(|l| Edit::NodeRelabel { node, label: (*l).clone() })
        }
        MutationKind::EdgeRelabel => {
            let e = choose(g.edges(), rng)?;
            let options: Vec<&EdgeLabel> = spec.edge_labels.iter().filter(|l| **l != e.label).collect();
            choose(&options, rng).map(|l| Edit::EdgeRelabel { u: e.u, v: e.v, label: (*l).clone() })
        }
        MutationKind::EdgeAdd => {
            let open: Vec<(usize, usize)> = (0..n)
                .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
                .filter(|&(u, v)| g.edge_between(u, v).is_none())
                .collect();
            let &(u, v) = choose(&open, rng)?;
            let label = choose(&spec.edge_labels, rng)?.clone();
            Some(Edit::EdgeAdd { u, v, label })
        }
        MutationKind::EdgeDelete => choose(g.edges(), rng).map(|e| Edit::EdgeDelete { u: e.u, v: e.v }),
        MutationKind::LeafAdd => {
            let anchor = rng.random_range(0..n);
            let label = choose(&spec.node_labels, rng)?.clone();
            let edge = choose(&spec.edge_labels, rng)?.clone();
            Some(Edit::LeafAdd { anchor, label, edge })
        }
        MutationKind::LeafDelete => {
            let leaves: Vec<usize> = (0..n).filter(|&v| g.degree(v) == 1).collect();
            choose(&leaves, rng).map(|&node| Edit::LeafDelete { node })
        }
    }
}

fn apply(g: &LabeledGraph, edit: &Edit) -> LabeledGraph {
    let mut nodes = g.nodes().to_vec();
    let mut edges = g.edge_triples();
    match edit {
        Edit::NodeRelabel { node, label } => nodes[*node] = label.clone(),
        Edit::EdgeRelabel { u, v, label } => {
            for e in &mut edges {
                if (e.0, e.1) == (*u, *v) {
                    e.2 = label.clone();
                }
            }
        }
        Edit::EdgeAdd { u, v, label } => edges.push((*u, *v, label.clone())),
        Edit::EdgeDelete { u, v } => edges.retain(|e| (e.0, e.1) != (*u, *v)),
        Edit::LeafAdd { anchor, label, edge } => {
            nodes.push(label.clone());
            edges.push((*anchor, nodes.len() - 1, edge.clone()));
        }
        Edit::LeafDelete { node } => {
            nodes.remove(*node);
            let shift = |x: usize| if x > *node { x - 1 } else { x };
            edges = edges
                .into_iter()
                .filter(|e| e.0 != *node && e.1 != *node)
                .map(|(a, b, l)| (shift(a), shift(b), l))
                .collect();
        }
    }
    LabeledGraph::new(g.id(), nodes, edges).expect("edits preserve graph invariants")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::canonical_form;

    fn ring(kind: &str, n: usize) -> LabeledGraph {
        LabeledGraph::new(
            "ring",
            vec![NodeLabel::new(kind); n],
            (0..n).map(|i| (i, (i + 1) % n, EdgeLabel::new("aromatic"))).collect(),
        )
        .unwrap()
    }

    #[test]
    fn leaf_add_on_singleton() {
        let g = LabeledGraph::new("c", vec![NodeLabel::new("C")], vec![]).unwrap();
        let spec = MutationSpec::only(MutationKind::LeafAdd, vec![NodeLabel::new("O")], vec![EdgeLabel::new("single")]);
        let out = mutate(&g, 7, &spec).unwrap();
        assert_eq!(out.node_count(), 2);
        assert_eq!(out.node(1).kind, "O");
        assert_eq!(out.edge_between(0, 1).unwrap().kind, "single");
    }

    #[test]
    fn bridge_delete_is_rejected() {
        let g = LabeledGraph::new(
            "cc",
            vec![NodeLabel::new("C"), NodeLabel::new("C")],
            vec![(0, 1, EdgeLabel::new("single"))],
        )
        .unwrap();
        let spec = MutationSpec::only(MutationKind::EdgeDelete, vec![], vec![]);
        assert_eq!(mutate(&g, 1, &spec).unwrap_err(), MutateError::Disconnects(MAX_MUTATION_ATTEMPTS));
    }

    #[test]
    fn delete_on_edgeless_graph_has_no_candidate() {
        let g = LabeledGraph::new("c", vec![NodeLabel::new("C")], vec![]).unwrap();
        let spec = MutationSpec::only(MutationKind::EdgeDelete, vec![], vec![]);
        assert_eq!(mutate(&g, 1, &spec).unwrap_err(), MutateError::NoLegalEdit(vec![MutationKind::EdgeDelete]));
        assert_eq!(mutate(&LabeledGraph::empty("e"), 1, &spec).unwrap_err(), MutateError::EmptyGraph);
    }

    #[test]
    fn relabel_is_seed_deterministic() {
        let benzene = ring("C", 6);
        let spec =
            MutationSpec::only(MutationKind::NodeRelabel, vec![NodeLabel::new("C"), NodeLabel::new("N")], vec![]);
        let a = mutate(&benzene, 42, &spec).unwrap();
        let b = mutate(&benzene, 42, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.nodes().iter().filter(|l| l.kind == "N").count(), 1);
        // every single-N ring is the same graph up to isomorphism
        assert_eq!(canonical_form(&a).unwrap(), canonical_form(&mutate(&benzene, 3, &spec).unwrap()).unwrap());
    }

    #[test]
    fn ring_edge_delete_keeps_connectivity() {
        let g = ring("C", 5);
        let spec = MutationSpec::only(MutationKind::EdgeDelete, vec![], vec![]);
        let out = mutate(&g, 9, &spec).unwrap();
        assert_eq!(out.edge_count(), 4);
        assert_eq!(out.component_count(), 1);
    }

    #[test]
    fn leaf_delete_reindexes() {
        let g = LabeledGraph::new(
            "p",
            vec![NodeLabel::new("A"), NodeLabel::new("B"), NodeLabel::new("C")],
            vec![(0, 1, EdgeLabel::new("-")), (1, 2, EdgeLabel::new("-"))],
        )
        .unwrap();
        let edit = Edit::LeafDelete { node: 0 };
        let out = apply(&g, &edit);
        assert_eq!(out.node(0).kind, "B");
        assert!(out.edge_between(0, 1).is_some());
    }
}
