//! Canonical labeling by color refinement plus individualization search.
//!
//! Refinement is label-aware (node tokens seed the colors, edge kinds are part
//! of every neighborhood signature) and every color is a dense rank of sorted
//! signatures, so no step ever looks at the input node numbering. When
//! refinement stalls the search individualizes each member of the smallest
//! non-singleton cell in turn and keeps the lexicographically smallest leaf
//! encoding. Automorphisms found along the way prune equivalent branches.

use thiserror::Error;

use super::{push_str, LabeledGraph};

pub const DEFAULT_NODE_BUDGET: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CanonError {
    #[error("graph has {nodes} nodes, above the canonicalization budget of {budget}")]
    OverBudget { nodes: usize, budget: usize },
}

/// Canonical encoding plus the node order that produced it.
#[derive(Debug, Clone)]
pub(crate) struct Labeling {
    pub bytes: Vec<u8>,
    /// `order[pos]` is the input node placed at canonical position `pos`.
    pub order: Vec<usize>,
}

/// Byte string that is equal for two graphs iff they are label-isomorphic.
pub fn canonical_form(g: &LabeledGraph) -> Result<Vec<u8>, CanonError> {
    canonical_form_with_budget(g, DEFAULT_NODE_BUDGET)
}

pub fn canonical_form_with_budget(g: &LabeledGraph, budget: usize) -> Result<Vec<u8>, CanonError> {
    let tokens: Vec<Vec<u8>> = g.nodes().iter().map(|n| n.token()).collect();
    let edges: Vec<(usize, usize, &str)> = g.edges().iter().map(|e| (e.u, e.v, e.label.kind.as_str())).collect();
    canonical_labeling(&tokens, &edges, budget).map(|l| l.bytes)
}

pub(crate) fn canonical_labeling(
    tokens: &[Vec<u8>],
    edges: &[(usize, usize, &str)],
    budget: usize,
) -> Result<Labeling, CanonError> {
    let n = tokens.len();
    if n > budget {
        return Err(CanonError::OverBudget { nodes: n, budget });
    }
    let mut search = Search::new(tokens, edges);
    let mut colors = dense_rank(tokens);
    search.refine(&mut colors);
    let mut fixed = Vec::new();
    search.run(colors, &mut fixed);
    Ok(search.best.expect("search visits at least one leaf"))
}

struct Search<'a> {
    tokens: &'a [Vec<u8>],
    edges: &'a [(usize, usize, &'a str)],
    adj: Vec<Vec<(u32, usize)>>,
    best: Option<Labeling>,
    automorphisms: Vec<Vec<usize>>,
}

impl<'a> Search<'a> {
    fn new(tokens: &'a [Vec<u8>], edges: &'a [(usize, usize, &'a str)]) -> Self {
        let mut kinds: Vec<&str> = edges.iter().map(|e| e.2).collect();
        kinds.sort_unstable();
        kinds.dedup();
        let mut adj = vec![Vec::new(); tokens.len()];
        for &(u, v, kind) in edges {
            let code = kinds.binary_search(&kind).expect("kind collected above") as u32;
            adj[u].push((code, v));
            adj[v].push((code, u));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Self { tokens, edges, adj, best: None, automorphisms: Vec::new() }
    }

    fn refine(&self, colors: &mut Vec<u32>) {
        let n = colors.len();
        let mut distinct = count_distinct(colors);
        while distinct < n {
            let sigs: Vec<(u32, Vec<(u32, u32)>)> = (0..n)
                .map(|v| {
                    let mut around: Vec<(u32, u32)> = self.adj[v].iter().map(|&(code, u)| (code, colors[u])).collect();
                    around.sort_unstable();
                    (colors[v], around)
                })
                .collect();
            let next = dense_rank(&sigs);
            let next_distinct = count_distinct(&next);
            *colors = next;
            if next_distinct == distinct {
                break;
            }
            distinct = next_distinct;
        }
    }

    fn run(&mut self, colors: Vec<u32>, fixed: &mut Vec<usize>) {
        let n = colors.len();
        if count_distinct(&colors) == n {
            self.leaf(&colors);
            return;
        }
        let cell = target_cell(&colors);
        // orbits of the automorphisms found so far that fix the current prefix
        let mut parent: Vec<usize> = (0..n).collect();
        let mut absorbed = 0;
        let mut explored: Vec<usize> = Vec::new();
        for &v in &cell {
            for gen in &self.automorphisms[absorbed..] {
                if fixed.iter().all(|&f| gen[f] == f) {
                    for (a, &b) in gen.iter().enumerate() {
                        union(&mut parent, a, b);
                    }
                }
            }
            absorbed = self.automorphisms.len();
            let root = find(&mut parent, v);
            if explored.iter().any(|&u| self.twins(u, v) || find(&mut parent, u) == root) {
                continue;
            }
            explored.push(v);
            let mut child = individualize(&colors, v);
            self.refine(&mut child);
            fixed.push(v);
            self.run(child, fixed);
            fixed.pop();
        }
    }

    /// Swapping `u` and `v` is an automorphism: same color cell and the same
    /// neighbors (each other excepted) over the same edge kinds.
    fn twins(&self, u: usize, v: usize) -> bool {
        if self.tokens[u] != self.tokens[v] || self.adj[u].len() != self.adj[v].len() {
            return false;
        }
        let strip = |list: &[(u32, usize)], other: usize| -> Vec<(u32, usize)> {
            list.iter().copied().filter(|&(_, w)| w != other).collect()
        };
        let (a, b) = (strip(&self.adj[u], v), strip(&self.adj[v], u));
        let kind_uv = self.adj[u].iter().find(|&&(_, w)| w == v).map(|&(c, _)| c);
        let kind_vu = self.adj[v].iter().find(|&&(_, w)| w == u).map(|&(c, _)| c);
        a == b && kind_uv == kind_vu
    }

    fn leaf(&mut self, colors: &[u32]) {
        let labeling = self.encode(colors);
        match &self.best {
            None => self.best = Some(labeling),
            Some(best) => match labeling.bytes.cmp(&best.bytes) {
                std::cmp::Ordering::Less => self.best = Some(labeling),
                std::cmp::Ordering::Equal => {
                    let mut gen = vec![0; colors.len()];
                    for (pos, &v) in labeling.order.iter().enumerate() {
                        gen[v] = best.order[pos];
                    }
                    if gen.iter().enumerate().any(|(a, &b)| a != b) {
                        self.automorphisms.push(gen);
                    }
                }
                std::cmp::Ordering::Greater => {}
            },
        }
    }

    fn encode(&self, colors: &[u32]) -> Labeling {
        let n = colors.len();
        let mut order = vec![0; n];
        for (v, &c) in colors.iter().enumerate() {
            order[c as usize] = v;
        }
        let mut bytes = Vec::with_capacity(16 * n + 24 * self.edges.len());
        bytes.extend_from_slice(&(n as u64).to_le_bytes());
        for &v in &order {
            bytes.extend_from_slice(&(self.tokens[v].len() as u64).to_le_bytes());
            bytes.extend_from_slice(&self.tokens[v]);
        }
        let mut placed: Vec<(u32, u32, &str)> = self
            .edges
            .iter()
            .map(|&(u, v, kind)| {
                let (a, b) = (colors[u], colors[v]);
                (a.min(b), a.max(b), kind)
            })
            .collect();
        placed.sort_unstable();
        bytes.extend_from_slice(&(placed.len() as u64).to_le_bytes());
        for (a, b, kind) in placed {
            bytes.extend_from_slice(&a.to_le_bytes());
            bytes.extend_from_slice(&b.to_le_bytes());
            push_str(&mut bytes, kind);
        }
        Labeling { bytes, order }
    }
}

fn dense_rank<T: Ord>(items: &[T]) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.sort_by(|&a, &b| items[a].cmp(&items[b]));
    let mut out = vec![0u32; items.len()];
    let mut rank = 0u32;
    for w in 0..idx.len() {
        if w > 0 && items[idx[w]] != items[idx[w - 1]] {
            rank += 1;
        }
        out[idx[w]] = rank;
    }
    out
}

fn count_distinct(colors: &[u32]) -> usize {
    // colors are dense ranks
    colors.iter().max().map_or(0, |&m| m as usize + 1)
}

/// Smallest non-singleton cell, lowest color on ties; members ascending.
fn target_cell(colors: &[u32]) -> Vec<usize> {
    let k = count_distinct(colors);
    let mut sizes = vec![0usize; k];
    for &c in colors {
        sizes[c as usize] += 1;
    }
    let color = (0..k)
        .filter(|&c| sizes[c] > 1)
        .min_by_key(|&c| (sizes[c], c))
        .expect("non-discrete coloring has a non-singleton cell") as u32;
    (0..colors.len()).filter(|&v| colors[v] == color).collect()
}

fn individualize(colors: &[u32], v: usize) -> Vec<u32> {
    let keyed: Vec<(u32, bool)> = colors.iter().enumerate().map(|(u, &c)| (c, u != v)).collect();
    dense_rank(&keyed)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}
