//! Random labeled graphs with planted motif rules and exact ground truth.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::{environment_feature_id, FeatureId};
use crate::graph::{EdgeLabel, EnvPattern, EnvironmentDescriptor, LabeledGraph, NodeLabel};
use crate::ingest::{Dataset, Sample};

pub const GRAFT_ATTEMPTS: usize = 100;

/// Stream-splitting seed: a SplitMix64 finalizer over `seed` and `index`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// `effect` when the single motif is present.
    Additive,
    /// `effect` when exactly one of the two motifs is present.
    XorPair,
    /// `effect` when neither of the two motifs is present.
    AbsencePair,
}

impl RuleKind {
    pub fn arity(self) -> usize {
        match self {
            RuleKind::Additive => 1,
            RuleKind::XorPair | RuleKind::AbsencePair => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedRule {
    pub name: String,
    pub kind: RuleKind,
    pub motifs: Vec<EnvironmentDescriptor>,
    pub effect: f64,
    /// Share of graphs that receive each motif of this rule.
    #[serde(default = "half")]
    pub fraction: f64,
}

fn half() -> f64 {
    0.5
}

impl PlantedRule {
    pub fn applies(&self, present: &[bool]) -> bool {
        match self.kind {
            RuleKind::Additive => present[0],
            RuleKind::XorPair => present[0] != present[1],
            RuleKind::AbsencePair => !present[0] && !present[1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub node_alphabet: Vec<NodeLabel>,
    pub edge_alphabet: Vec<EdgeLabel>,
    /// Extra edges beyond the spanning tree, per host node.
    #[serde(default = "default_density")]
    pub edge_density: f64,
    #[serde(default)]
    pub rules: Vec<PlantedRule>,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub baseline: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_density() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    Invalid(String),
    #[error("rule `{rule}`: motif {motif} could not be planted cleanly in graph {graph} after {attempts} attempts")]
    GraftFailed { rule: String, motif: usize, graph: usize, attempts: usize },
    #[error("spec file: {0}")]
    Format(String),
}

/// Compiled motif: the pattern plus where it attaches to the host.
struct Motif {
    rule: usize,
    pattern: EnvPattern,
    attach: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotifTruth {
    pub rule: String,
    pub index: usize,
    pub feature: FeatureId,
    pub subgraph: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleTruth {
    pub name: String,
    pub kind: RuleKind,
    pub effect: f64,
    pub features: Vec<FeatureId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub baseline: f64,
    pub noise: f64,
    pub rules: Vec<RuleTruth>,
    pub motifs: Vec<MotifTruth>,
    /// `presence[sample][motif]`, motifs in rule order.
    pub presence: Vec<Vec<bool>>,
}

impl SynthSpec {
    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let spec: SynthSpec = serde_json::from_str(text).map_err(|e| SynthError::Format(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.node_alphabet.is_empty() || self.edge_alphabet.is_empty() {
            return bad("alphabets must be non-empty".into());
        }
        if self.min_nodes == 0 || self.min_nodes > self.max_nodes {
            return bad(format!("node range {}..={} is empty or starts at 0", self.min_nodes, self.max_nodes));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) || !self.baseline.is_finite() {
            return bad("noise must be finite and >= 0, baseline finite".into());
        }
        if !(self.edge_density >= 0.0 && self.edge_density.is_finite()) {
            return bad("edge_density must be finite and >= 0".into());
        }
        for r in &self.rules {
            if !(r.effect.is_finite() && r.effect != 0.0) {
                return bad(format!("rule `{}`: effect must be finite and nonzero", r.name));
            }
            if !(r.fraction > 0.0 && r.fraction < 1.0) {
                return bad(format!("rule `{}`: fraction must lie in (0, 1)", r.name));
            }
            if r.motifs.len() != r.kind.arity() {
                return bad(format!("rule `{}`: {:?} needs {} motif(s)", r.name, r.kind, r.kind.arity()));
            }
            for (i, m) in r.motifs.iter().enumerate() {
                m.validate().map_err(|e| SynthError::Invalid(format!("rule `{}` motif {i}: {e}", r.name)))?;
                if m.node_count() > self.min_nodes {
                    return bad(format!("rule `{}` motif {i} has more nodes than min_nodes", r.name));
                }
            }
        }
        Ok(())
    }

    fn compile(&self) -> Vec<Motif> {
        let mut out = Vec::new();
        for (ri, r) in self.rules.iter().enumerate() {
            for m in &r.motifs {
                let g = m.to_graph("motif").expect("validated");
                let dist = g.distances_from(m.root, m.radius);
                let attach = (0..m.node_count()).find(|&v| dist[v] == Some(m.radius)).unwrap_or(m.root);
                out.push(Motif { rule: ri, pattern: EnvPattern::new(m), attach });
            }
        }
        out
    }
}

/// Noiseless target of `g` under `rules`.
pub fn oracle_eval(g: &LabeledGraph, rules: &[PlantedRule], baseline: f64) -> f64 {
    let mut y = baseline;
    for r in rules {
        let present: Vec<bool> = r.motifs.iter().map(|m| EnvPattern::new(m).matches(g)).collect();
        if r.applies(&present) {
            y += r.effect;
        }
    }
    y
}

fn rule_value(rules: &[PlantedRule], baseline: f64, present: &[bool]) -> f64 {
    let mut y = baseline;
    let mut k = 0;
    for r in rules {
        let p = &present[k..k + r.motifs.len()];
        k += r.motifs.len();
        if r.applies(p) {
            y += r.effect;
        }
    }
    y
}

/// Chooses which graphs carry each motif. Each motif is balanced within every
/// cell of the partition induced by the motifs chosen before it.
fn select(n: usize, fractions: &[f64], rng: &mut ChaCha8Rng) -> Vec<Vec<bool>> {
    let mut chosen = vec![vec![false; fractions.len()]; n];
    for (m, &frac) in fractions.iter().enumerate() {
        let mut cells: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
        for (i, row) in chosen.iter().enumerate() {
            cells.entry(row[..m].to_vec()).or_default().push(i);
        }
        for members in cells.values() {
            let take = (members.len() as f64 * frac).round() as usize;
            for k in sample(rng, members.len(), take.min(members.len())) {
                chosen[members[k]][m] = true;
            }
        }
    }
    chosen
}

fn random_host(
    spec: &SynthSpec,
    nodes: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<NodeLabel>, Vec<(usize, usize, EdgeLabel)>) {
    let pick_node = |rng: &mut ChaCha8Rng| spec.node_alphabet[rng.random_range(0..spec.node_alphabet.len())].clone();
    let pick_edge = |rng: &mut ChaCha8Rng| spec.edge_alphabet[rng.random_range(0..spec.edge_alphabet.len())].clone();
    let labels: Vec<NodeLabel> = (0..nodes).map(|_| pick_node(rng)).collect();
    let mut edges = Vec::new();
    let mut present = std::collections::HashSet::new();
    for v in 1..nodes {
        let u = rng.random_range(0..v);
        present.insert((u, v));
        edges.push((u, v, pick_edge(rng)));
    }
    let extra = (spec.edge_density * nodes as f64).round() as usize;
    let max_extra = nodes * nodes.saturating_sub(1) / 2 - edges.len();
    let mut added = 0;
    let mut tries = 0;
    while added < extra.min(max_extra) && tries < 20 * extra + 20 {
        tries += 1;
        let (a, b) = (rng.random_range(0..nodes), rng.random_range(0..nodes));
        let (a, b) = (a.min(b), a.max(b));
        if a != b && present.insert((a, b)) {
            edges.push((a, b, pick_edge(rng)));
            added += 1;
        }
    }
    (labels, edges)
}

fn build_graph(
    spec: &SynthSpec,
    motifs: &[Motif],
    chosen: &[bool],
    index: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(LabeledGraph, Vec<bool>), SynthError> {
    let planted_nodes: usize =
        motifs.iter().zip(chosen).filter(|(_, c)| **c).map(|(m, _)| m.pattern.environment().node_count()).sum();
    let mut last_bad = 0;
    for _ in 0..GRAFT_ATTEMPTS {
        let total = rng.random_range(spec.min_nodes..=spec.max_nodes);
        let host = total.saturating_sub(planted_nodes).max(1);
        let (mut labels, mut edges) = random_host(spec, host, rng);
        for (m, _) in motifs.iter().zip(chosen).filter(|(_, c)| **c) {
            let env = m.pattern.environment();
            let offset = labels.len();
            labels.extend(env.nodes.iter().cloned());
            edges.extend(env.edges.iter().map(|(u, v, l)| (u + offset, v + offset, l.clone())));
            let anchor = rng.random_range(0..host);
            let kind = spec.edge_alphabet[rng.random_range(0..spec.edge_alphabet.len())].clone();
            edges.push((anchor, m.attach + offset, kind));
        }
        let g = LabeledGraph::new(format!("g{index}"), labels, edges).expect("generator emits valid graphs");
        let present: Vec<bool> = motifs.iter().map(|m| m.pattern.matches(&g)).collect();
        match present.iter().zip(chosen).position(|(p, c)| p != c) {
            None => return Ok((g, present)),
            Some(k) => last_bad = k,
        }
    }
    let m = &motifs[last_bad];
    let first = motifs.iter().position(|x| x.rule == m.rule).unwrap_or(0);
    Err(SynthError::GraftFailed {
        rule: spec.rules[m.rule].name.clone(),
        motif: last_bad - first,
        graph: index,
        attempts: GRAFT_ATTEMPTS,
    })
}

pub fn gen_dataset(spec: &SynthSpec) -> Result<(Dataset, GroundTruth), SynthError> {
    spec.validate()?;
    let motifs = spec.compile();
    let fractions: Vec<f64> = motifs.iter().map(|m| spec.rules[m.rule].fraction).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, u64::MAX));
    let chosen = select(spec.n, &fractions, &mut rng);
    let noise = Normal::new(0.0, spec.noise).map_err(|e| SynthError::Invalid(e.to_string()))?;

    let built: Vec<(LabeledGraph, Vec<bool>, f64)> = (0..spec.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, i as u64));
            let (g, present) = build_graph(spec, &motifs, &chosen[i], i, &mut rng)?;
            let eps = if spec.noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            let y = rule_value(&spec.rules, spec.baseline, &present) + eps;
            Ok((g, present, y))
        })
        .collect::<Result<_, SynthError>>()?;

    let mut truth_motifs = Vec::new();
    let mut rules = Vec::new();
    for r in &spec.rules {
        let mut features = Vec::new();
        for (mi, m) in r.motifs.iter().enumerate() {
            let feature = environment_feature_id(m).map_err(|e| SynthError::Invalid(e.to_string()))?;
            features.push(feature);
            let (_, canonical) =
                m.canonicalize(crate::graph::DEFAULT_NODE_BUDGET).map_err(|e| SynthError::Invalid(e.to_string()))?;
            truth_motifs.push(MotifTruth {
                rule: r.name.clone(),
                index: mi,
                feature,
                subgraph: canonical.canonical_text(),
            });
        }
        rules.push(RuleTruth { name: r.name.clone(), kind: r.kind, effect: r.effect, features });
    }
    let mut samples = Vec::with_capacity(spec.n);
    let mut presence = Vec::with_capacity(spec.n);
    for (g, p, y) in built {
        samples.push(Sample { graph: g, y });
        presence.push(p);
    }
    let ds = Dataset::new("synth", samples).map_err(|e| SynthError::Invalid(e.to_string()))?;
    Ok((ds, GroundTruth { baseline: spec.baseline, noise: spec.noise, rules, motifs: truth_motifs, presence }))
}
