//! Rooted r-hop environments: extraction, canonical ordering and matching.
//!
//! An environment is the subgraph induced by every node within `radius` hops
//! of the root. Matching is exact: a graph contains an environment iff one of
//! its nodes has an induced r-ball that is label-isomorphic to it with the
//! roots corresponding.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::canon::{canonical_labeling, CanonError, DEFAULT_NODE_BUDGET};
use super::{EdgeLabel, GraphError, LabeledGraph, NodeLabel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("root {root} out of range for {count} nodes")]
    RootOutOfRange { root: usize, count: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("node {node} is not within {radius} hops of the root")]
    BeyondRadius { node: usize, radius: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvironmentDescriptor {
    pub nodes: Vec<NodeLabel>,
    pub edges: Vec<(usize, usize, EdgeLabel)>,
    pub radius: u32,
    pub root: usize,
}

impl EnvironmentDescriptor {
    pub fn validate(&self) -> Result<(), EnvError> {
        let g = self.to_graph("env")?;
        if self.root >= self.nodes.len() {
            return Err(EnvError::RootOutOfRange { root: self.root, count: self.nodes.len() });
        }
        let dist = g.distances_from(self.root, self.radius);
        if let Some(node) = dist.iter().position(Option::is_none) {
            return Err(EnvError::BeyondRadius { node, radius: self.radius });
        }
        Ok(())
    }

    pub fn to_graph(&self, id: &str) -> Result<LabeledGraph, GraphError> {
        LabeledGraph::new(id, self.nodes.clone(), self.edges.clone())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Canonical bytes of the rooted environment (root and radius included).
    pub fn canonical_form(&self) -> Result<Vec<u8>, CanonError> {
        self.canonicalize(DEFAULT_NODE_BUDGET).map(|(bytes, _)| bytes)
    }

    /// Canonical bytes plus a copy of `self` with nodes in canonical order.
    pub(crate) fn canonicalize(&self, budget: usize) -> Result<(Vec<u8>, EnvironmentDescriptor), CanonError> {
        let tokens: Vec<Vec<u8>> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let mut t = vec![u8::from(i == self.root)];
                t.extend(n.token());
                t
            })
            .collect();
        let edges: Vec<(usize, usize, &str)> = self.edges.iter().map(|(u, v, l)| (*u, *v, l.kind.as_str())).collect();
        let labeling = canonical_labeling(&tokens, &edges, budget)?;
        let mut pos = vec![0; self.nodes.len()];
        for (p, &v) in labeling.order.iter().enumerate() {
            pos[v] = p;
        }
        let nodes = labeling.order.iter().map(|&v| self.nodes[v].clone()).collect();
        let mut edges: Vec<(usize, usize, EdgeLabel)> =
            self.edges.iter().map(|(u, v, l)| (pos[*u].min(pos[*v]), pos[*u].max(pos[*v]), l.clone())).collect();
        edges.sort();
        let mut bytes = labeling.bytes;
        bytes.extend_from_slice(&self.radius.to_le_bytes());
        let canonical = EnvironmentDescriptor { nodes, edges, radius: self.radius, root: pos[self.root] };
        Ok((bytes, canonical))
    }

    /// Compact human-readable rendering, e.g. `r1 [0:C* 1:O] {0-1:double}`.
    pub fn canonical_text(&self) -> String {
        let nodes: Vec<String> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| format!("{i}:{n}{}", if i == self.root { "*" } else { "" }))
            .collect();
        let edges: Vec<String> = self.edges.iter().map(|(u, v, l)| format!("{u}-{v}:{}", l.kind)).collect();
        format!("r{} [{}] {{{}}}", self.radius, nodes.join(" "), edges.join(" "))
    }
}

/// The induced `radius`-ball around `root`, nodes in BFS order (root first).
pub fn extract_environment(g: &LabeledGraph, root: usize, radius: u32) -> EnvironmentDescriptor {
    let dist = g.distances_from(root, radius);
    let mut order = vec![root];
    let mut head = 0;
    let mut pos = vec![usize::MAX; g.node_count()];
    pos[root] = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for &(u, _) in g.neighbors(v) {
            if dist[u].is_some() && pos[u] == usize::MAX {
                pos[u] = order.len();
                order.push(u);
            }
        }
    }
    let nodes = order.iter().map(|&v| g.node(v).clone()).collect();
    let mut edges = Vec::new();
    for e in g.edges() {
        if pos[e.u] != usize::MAX && pos[e.v] != usize::MAX {
            let (a, b) = (pos[e.u], pos[e.v]);
            edges.push((a.min(b), a.max(b), e.label.clone()));
        }
    }
    edges.sort();
    EnvironmentDescriptor { nodes, edges, radius, root: 0 }
}

pub fn contains_environment(g: &LabeledGraph, env: &EnvironmentDescriptor) -> bool {
    EnvPattern::new(env).matches(g)
}

/// An environment preprocessed for repeated matching against many graphs.
#[derive(Debug, Clone)]
pub struct EnvPattern {
    env: EnvironmentDescriptor,
    order: Vec<usize>,
    anchor: Vec<usize>,
    dist: Vec<u32>,
    degree: Vec<usize>,
    adj: Vec<Vec<(usize, usize)>>,
    usable: bool,
}

impl EnvPattern {
    pub fn new(env: &EnvironmentDescriptor) -> Self {
        let n = env.nodes.len();
        let mut adj = vec![Vec::new(); n];
        let mut usable = env.root < n;
        for (i, (u, v, _)) in env.edges.iter().enumerate() {
            if *u >= n || *v >= n || u == v {
                usable = false;
                continue;
            }
            adj[*u].push((*v, i));
            adj[*v].push((*u, i));
        }
        let degree = adj.iter().map(Vec::len).collect();
        let mut order = Vec::with_capacity(n);
        let mut anchor = Vec::with_capacity(n);
        let mut dist = vec![u32::MAX; n];
        if usable {
            dist[env.root] = 0;
            order.push(env.root);
            anchor.push(usize::MAX);
            let mut head = 0;
            while head < order.len() {
                let v = order[head];
                head += 1;
                for &(u, _) in &adj[v] {
                    if dist[u] == u32::MAX {
                        dist[u] = dist[v] + 1;
                        order.push(u);
                        anchor.push(v);
                    }
                }
            }
            usable = order.len() == n && dist.iter().all(|&d| d <= env.radius);
        }
        Self { env: env.clone(), order, anchor, dist, degree, adj, usable }
    }

    pub fn environment(&self) -> &EnvironmentDescriptor {
        &self.env
    }

    pub fn matches(&self, g: &LabeledGraph) -> bool {
        self.usable && (0..g.node_count()).any(|v| self.matches_at(g, v))
    }

    /// Whether the `radius`-ball of `v` is isomorphic to the pattern, rooted at `v`.
    pub fn matches_at(&self, g: &LabeledGraph, v: usize) -> bool {
        if !self.usable || g.node(v) != &self.env.nodes[self.env.root] {
            return false;
        }
        let gdist = g.distances_from(v, self.env.radius);
        let ball: Vec<usize> = (0..g.node_count()).filter(|&u| gdist[u].is_some()).collect();
        if ball.len() != self.env.nodes.len() {
            return false;
        }
        let mut ball_degree = vec![0usize; g.node_count()];
        let mut ball_edges = 0;
        for e in g.edges() {
            if gdist[e.u].is_some() && gdist[e.v].is_some() {
                ball_edges += 1;
                ball_degree[e.u] += 1;
                ball_degree[e.v] += 1;
            }
        }
        if ball_edges != self.env.edges.len() {
            return false;
        }
        let mut map = vec![usize::MAX; self.env.nodes.len()];
        let mut used = vec![false; g.node_count()];
        map[self.env.root] = v;
        used[v] = true;
        let ctx = MatchCtx { g, gdist: &gdist, ball_degree: &ball_degree };
        self.extend(&ctx, 1, &mut map, &mut used)
    }

    fn extend(&self, ctx: &MatchCtx<'_>, i: usize, map: &mut [usize], used: &mut [bool]) -> bool {
        if i == self.order.len() {
            return true;
        }
        let e = self.order[i];
        let from = map[self.anchor[i]];
        for &(cand, _) in ctx.g.neighbors(from) {
            if used[cand]
                || ctx.gdist[cand] != Some(self.dist[e])
                || ctx.ball_degree[cand] != self.degree[e]
                || ctx.g.node(cand) != &self.env.nodes[e]
            {
                continue;
            }
            let consistent = self.adj[e].iter().all(|&(other, edge)| {
                map[other] == usize::MAX || ctx.g.edge_between(cand, map[other]) == Some(&self.env.edges[edge].2)
            });
            if !consistent {
                continue;
            }
            map[e] = cand;
            used[cand] = true;
            if self.extend(ctx, i + 1, map, used) {
                return true;
            }
            map[e] = usize::MAX;
            used[cand] = false;
        }
        false
    }
}

struct MatchCtx<'a> {
    g: &'a LabeledGraph,
    gdist: &'a [Option<u32>],
    ball_degree: &'a [usize],
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(kinds: &[&str], edges: &[(usize, usize, &str)]) -> LabeledGraph {
        LabeledGraph::new(
            "g",
            kinds.iter().map(|k| NodeLabel::new(*k)).collect(),
            edges.iter().map(|&(u, v, k)| (u, v, EdgeLabel::new(k))).collect(),
        )
        .unwrap()
    }

    fn benzene() -> LabeledGraph {
        let edges: Vec<_> = (0..6).map(|i| (i, (i + 1) % 6, "aromatic")).collect();
        g(&["c"; 6], &edges)
    }

    #[test]
    fn carbonyl_found_in_itself() {
        let co = g(&["C", "O"], &[(0, 1, "double")]);
        let env = extract_environment(&co, 0, 1);
        assert!(contains_environment(&co, &env));
    }

    #[test]
    fn bond_kind_mismatch_rejected() {
        let carbonyl = extract_environment(&g(&["C", "O"], &[(0, 1, "double")]), 0, 1);
        let single = g(&["C", "O"], &[(0, 1, "single")]);
        assert!(!contains_environment(&single, &carbonyl));
    }

    #[test]
    fn aromatic_path_in_benzene() {
        // three-node aromatic path rooted at the middle carbon
        let env = EnvironmentDescriptor {
            nodes: vec![NodeLabel::new("c"); 3],
            edges: vec![(0, 1, EdgeLabel::new("aromatic")), (0, 2, EdgeLabel::new("aromatic"))],
            radius: 1,
            root: 0,
        };
        env.validate().unwrap();
        assert!(contains_environment(&benzene(), &env));
        // rooted at an end of the path instead: the ball of a ring carbon has 3 nodes
        let end_rooted = EnvironmentDescriptor { root: 1, radius: 2, ..env };
        assert!(!contains_environment(&benzene(), &end_rooted));
    }

    #[test]
    fn ball_is_induced() {
        // triangle ball vs open path with the same nodes
        let tri = g(&["A", "B", "B"], &[(0, 1, "-"), (0, 2, "-"), (1, 2, "-")]);
        let open = g(&["A", "B", "B"], &[(0, 1, "-"), (0, 2, "-")]);
        let open_env = extract_environment(&open, 0, 1);
        assert!(!contains_environment(&tri, &open_env));
        assert!(contains_environment(&tri, &extract_environment(&tri, 0, 1)));
    }

    #[test]
    fn every_extracted_environment_is_contained() {
        let graphs = [
            benzene(),
            g(&["C", "C", "O", "N", "C"], &[(0, 1, "s"), (1, 2, "d"), (1, 3, "s"), (3, 4, "s"), (4, 0, "s")]),
            g(&["A", "B"], &[]),
        ];
        for graph in &graphs {
            for v in 0..graph.node_count() {
                for r in 0..4 {
                    let env = extract_environment(graph, v, r);
                    env.validate().unwrap();
                    assert!(contains_environment(graph, &env), "{} v={v} r={r}", graph.id());
                }
            }
        }
    }

    #[test]
    fn canonical_environment_is_stable_under_extraction_root() {
        let b = benzene();
        let (a_bytes, a_env) = extract_environment(&b, 0, 2).canonicalize(64).unwrap();
        let (b_bytes, b_env) = extract_environment(&b, 3, 2).canonicalize(64).unwrap();
        assert_eq!(a_bytes, b_bytes);
        assert_eq!(a_env, b_env);
        assert!(contains_environment(&b, &a_env));
    }

    #[test]
    fn root_and_radius_change_canonical_form() {
        let path = g(&["A", "B"], &[(0, 1, "-")]);
        let e0 = extract_environment(&path, 0, 1);
        let e1 = extract_environment(&path, 1, 1);
        assert_ne!(e0.canonical_form().unwrap(), e1.canonical_form().unwrap());
        let wider = EnvironmentDescriptor { radius: 2, ..e0.clone() };
        assert_ne!(e0.canonical_form().unwrap(), wider.canonical_form().unwrap());
    }

    #[test]
    fn validate_rejects_far_nodes() {
        let env = EnvironmentDescriptor {
            nodes: vec![NodeLabel::new("A"), NodeLabel::new("B"), NodeLabel::new("C")],
            edges: vec![(0, 1, EdgeLabel::new("-")), (1, 2, EdgeLabel::new("-"))],
            radius: 1,
            root: 0,
        };
        assert_eq!(env.validate().unwrap_err(), EnvError::BeyondRadius { node: 2, radius: 1 });
        assert!(!contains_environment(&env.to_graph("x").unwrap(), &env));
    }

    #[test]
    fn text_rendering() {
        let env = extract_environment(&g(&["C", "O"], &[(0, 1, "double")]), 0, 1);
        assert_eq!(env.canonical_text(), "r1 [0:C* 1:O] {0-1:double}");
    }
}
