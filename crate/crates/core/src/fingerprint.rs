//! Circular environment fingerprints with a reverse registry.
//!
//! Radius 0 ids hash the node token. Radius `r >= 1` ids hash the canonical
//! encoding of the rooted induced `r`-ball, so two nodes share an id exactly
//! when their balls are label-isomorphic with roots corresponding.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::graph::{
    extract_environment, CanonError, EnvironmentDescriptor, LabeledGraph, NodeLabel, DEFAULT_NODE_BUDGET,
};
use crate::ingest::Dataset;

pub const HASH_VERSION: &str = "fnv1a64-lp/v1";
pub const DEFAULT_RADIUS: u32 = 3;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId(pub u64);

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:016x}", self.0)
    }
}

impl std::str::FromStr for FeatureId {
    type Err = std::num::ParseIntError;

    /// Accepts `0x`-prefixed hex or plain decimal.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_prefix("0x") {
            Some(hex) => u64::from_str_radix(hex, 16).map(FeatureId),
            None => s.parse().map(FeatureId),
        }
    }
}

// JSON numbers lose precision above 2^53, so ids travel as hex strings.
impl Serialize for FeatureId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FeatureId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("graph `{graph}`: {source}")]
    Canon { graph: String, source: CanonError },
    #[error("fold length {0} must be a power of two and at least 64")]
    FoldLength(usize),
    #[error("feature matrix: {0}")]
    Matrix(String),
}

pub fn node_feature_id(label: &NodeLabel) -> FeatureId {
    let mut buf = 0u32.to_le_bytes().to_vec();
    buf.extend(label.token());
    FeatureId(fnv1a64(&buf))
}

fn ball_id(radius: u32, canonical: &[u8]) -> FeatureId {
    let mut buf = radius.to_le_bytes().to_vec();
    buf.extend_from_slice(canonical);
    FeatureId(fnv1a64(&buf))
}

/// Id of a rooted environment, consistent with [`featurize`].
pub fn environment_feature_id(env: &EnvironmentDescriptor) -> Result<FeatureId, CanonError> {
    if env.radius == 0 {
        return Ok(node_feature_id(&env.nodes[env.root]));
    }
    let (bytes, _) = env.canonicalize(DEFAULT_NODE_BUDGET)?;
    Ok(ball_id(env.radius, &bytes))
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Record {
    env: EnvironmentDescriptor,
    canonical: Vec<u8>,
}

/// Reverse map from feature id to a representative environment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubgraphRegistry {
    records: BTreeMap<FeatureId, Record>,
    collisions: BTreeMap<FeatureId, BTreeSet<Vec<u8>>>,
}

impl SubgraphRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: FeatureId) -> Option<&EnvironmentDescriptor> {
        self.records.get(&id).map(|r| &r.env)
    }

    pub fn ids(&self) -> impl Iterator<Item = FeatureId> + '_ {
        self.records.keys().copied()
    }

    /// Ids whose hash was produced by more than one canonical form, with those forms.
    pub fn collisions(&self) -> &BTreeMap<FeatureId, BTreeSet<Vec<u8>>> {
        &self.collisions
    }

    fn insert_record(&mut self, id: FeatureId, rec: Record) {
        match self.records.get_mut(&id) {
            None => {
                self.records.insert(id, rec);
            }
            Some(old) if old.canonical == rec.canonical => {}
            Some(old) => {
                let log = self.collisions.entry(id).or_default();
                log.insert(old.canonical.clone());
                log.insert(rec.canonical.clone());
                if rec.canonical < old.canonical {
                    *old = rec;
                }
            }
        }
    }

    /// Union of two registries; the result does not depend on merge order.
    pub fn merge(&mut self, other: SubgraphRegistry) {
        for (id, forms) in other.collisions {
            self.collisions.entry(id).or_default().extend(forms);
        }
        for (id, rec) in other.records {
            self.insert_record(id, rec);
        }
    }

    pub fn to_json(&self) -> String {
        let map: BTreeMap<String, &EnvironmentDescriptor> =
            self.records.iter().map(|(id, r)| (id.0.to_string(), &r.env)).collect();
        let mut s = serde_json::to_string_pretty(&map).expect("registry serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, FingerprintError> {
        let map: BTreeMap<FeatureId, EnvironmentDescriptor> =
            serde_json::from_str(text).map_err(|e| FingerprintError::Matrix(e.to_string()))?;
        let mut reg = SubgraphRegistry::new();
        for (id, env) in map {
            env.validate().map_err(|e| FingerprintError::Matrix(format!("entry {id}: {e}")))?;
            let (canonical, env) = env
                .canonicalize(DEFAULT_NODE_BUDGET)
                .map_err(|source| FingerprintError::Canon { graph: id.to_string(), source })?;
            reg.insert_record(id, Record { env, canonical });
        }
        Ok(reg)
    }
}

/// Feature set of one graph plus its registry contributions.
#[derive(Debug, Clone, Default)]
pub struct Fingerprint {
    pub ids: BTreeSet<FeatureId>,
    pub registry: SubgraphRegistry,
}

pub fn featurize(g: &LabeledGraph, radius: u32) -> Result<Fingerprint, FingerprintError> {
    let mut fp = Fingerprint::default();
    for v in 0..g.node_count() {
        for r in 0..=radius {
            let env = extract_environment(g, v, r);
            let (canonical, env) = env
                .canonicalize(DEFAULT_NODE_BUDGET)
                .map_err(|source| FingerprintError::Canon { graph: g.id().to_string(), source })?;
            let id = if r == 0 { node_feature_id(g.node(v)) } else { ball_id(r, &canonical) };
            if fp.ids.insert(id) || fp.registry.records.get(&id).is_some_and(|old| old.canonical != canonical) {
                fp.registry.insert_record(id, Record { env, canonical });
            }
        }
    }
    Ok(fp)
}

/// Matrix exports list the vocabulary as decimal strings.
mod decimal_ids {
    use super::FeatureId;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ids: &[FeatureId], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(ids.iter().map(|id| id.0.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<FeatureId>, D::Error> {
        Vec::<String>::deserialize(d)?.iter().map(|s| s.parse().map_err(serde::de::Error::custom)).collect()
    }
}

/// Sparse binary sample-by-feature matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    #[serde(with = "decimal_ids")]
    vocab: Vec<FeatureId>,
    rows: Vec<Vec<u32>>,
}

impl FeatureMatrix {
    pub fn from_sets(sets: &[BTreeSet<FeatureId>]) -> Self {
        let vocab: Vec<FeatureId> = sets.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let index: HashMap<FeatureId, u32> = vocab.iter().enumerate().map(|(i, &id)| (id, i as u32)).collect();
        let rows = sets.iter().map(|s| s.iter().map(|id| index[id]).collect()).collect();
        Self { vocab, rows }
    }

    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab(&self) -> &[FeatureId] {
        &self.vocab
    }

    /// Sorted vocabulary indices present in sample `i`.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i]
    }

    pub fn row_ids(&self, i: usize) -> BTreeSet<FeatureId> {
        self.rows[i].iter().map(|&k| self.vocab[k as usize]).collect()
    }

    pub fn index_of(&self, id: FeatureId) -> Option<usize> {
        self.vocab.binary_search(&id).ok()
    }

    pub fn contains(&self, sample: usize, id: FeatureId) -> bool {
        self.index_of(id).is_some_and(|k| self.rows[sample].binary_search(&(k as u32)).is_ok())
    }

    /// Presence column for `id`; all false for ids outside the vocabulary.
    pub fn column(&self, id: FeatureId) -> Vec<bool> {
        match self.index_of(id) {
            None => vec![false; self.rows.len()],
            Some(k) => self.rows.iter().map(|r| r.binary_search(&(k as u32)).is_ok()).collect(),
        }
    }

    /// For every vocabulary index, the ascending list of samples containing it.
    pub fn postings(&self) -> Vec<Vec<u32>> {
        let mut cols = vec![Vec::new(); self.vocab.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for &k in row {
                cols[k as usize].push(i as u32);
            }
        }
        cols
    }

    /// Matrix restricted to the given samples, vocabulary unchanged.
    pub fn select_rows(&self, samples: &[usize]) -> Self {
        Self { vocab: self.vocab.clone(), rows: samples.iter().map(|&i| self.rows[i].clone()).collect() }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("matrix serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, FingerprintError> {
        let m: FeatureMatrix = serde_json::from_str(text).map_err(|e| FingerprintError::Matrix(e.to_string()))?;
        if m.vocab.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FingerprintError::Matrix("vocab is not strictly ascending".into()));
        }
        for (i, row) in m.rows.iter().enumerate() {
            if row.windows(2).any(|w| w[0] >= w[1]) || row.last().is_some_and(|&k| k as usize >= m.vocab.len()) {
                return Err(FingerprintError::Matrix(format!("row {i} has unsorted or out-of-range indices")));
            }
        }
        Ok(m)
    }
}

pub fn featurize_dataset(ds: &Dataset, radius: u32) -> Result<(FeatureMatrix, SubgraphRegistry), FingerprintError> {
    let fps: Vec<Fingerprint> = ds.samples.par_iter().map(|s| featurize(&s.graph, radius)).collect::<Result<_, _>>()?;
    let mut registry = SubgraphRegistry::new();
    let mut sets = Vec::with_capacity(fps.len());
    for fp in fps {
        registry.merge(fp.registry);
        sets.push(fp.ids);
    }
    Ok((FeatureMatrix::from_sets(&sets), registry))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Folded {
    pub bits: Vec<bool>,
    /// Bits hit by more than one id, with the ids that landed there.
    pub collisions: Vec<(usize, Vec<FeatureId>)>,
}

pub fn fold(ids: &BTreeSet<FeatureId>, len: usize) -> Result<Folded, FingerprintError> {
    if len < 64 || !len.is_power_of_two() {
        return Err(FingerprintError::FoldLength(len));
    }
    let mut hits: BTreeMap<usize, Vec<FeatureId>> = BTreeMap::new();
    for &id in ids {
        hits.entry((id.0 % len as u64) as usize).or_default().push(id);
    }
    let mut bits = vec![false; len];
    for &b in hits.keys() {
        bits[b] = true;
    }
    let collisions = hits.into_iter().filter(|(_, v)| v.len() > 1).collect();
    Ok(Folded { bits, collisions })
}

/// Groups of features with identical presence columns.
pub type AliasMap = BTreeMap<FeatureId, Vec<FeatureId>>;

/// Merges features whose columns are identical into one representative.
///
/// The representative is the smallest environment (radius, then node count,
/// then id). The returned map lists the other members of every merged group.
pub fn collapse_aliases(x: &FeatureMatrix, registry: &SubgraphRegistry) -> (FeatureMatrix, AliasMap) {
    let postings = x.postings();
    let mut groups: HashMap<&[u32], Vec<usize>> = HashMap::new();
    for (k, p) in postings.iter().enumerate() {
        groups.entry(p.as_slice()).or_default().push(k);
    }
    let size = |id: FeatureId| registry.get(id).map_or((u32::MAX, usize::MAX), |e| (e.radius, e.node_count()));
    let mut keep = vec![false; x.vocab.len()];
    let mut aliases = AliasMap::new();
    for members in groups.into_values() {
        let ids: Vec<FeatureId> = members.iter().map(|&k| x.vocab[k]).collect();
        let rep = *ids.iter().min_by_key(|&&id| (size(id), id)).expect("non-empty group");
        keep[x.index_of(rep).expect("rep in vocab")] = true;
        if ids.len() > 1 {
            let mut others: Vec<FeatureId> = ids.into_iter().filter(|&id| id != rep).collect();
            others.sort();
            aliases.insert(rep, others);
        }
    }
    let sets: Vec<BTreeSet<FeatureId>> = x
        .rows
        .iter()
        .map(|r| r.iter().filter(|&&k| keep[k as usize]).map(|&k| x.vocab[k as usize]).collect())
        .collect();
    let mut collapsed = FeatureMatrix::from_sets(&sets);
    // features absent from every row survive as empty columns only if they were representatives
    let kept: Vec<FeatureId> = (0..x.vocab.len()).filter(|&k| keep[k]).map(|k| x.vocab[k]).collect();
    if kept.len() != collapsed.vocab.len() {
        let index: HashMap<FeatureId, u32> = kept.iter().enumerate().map(|(i, &id)| (id, i as u32)).collect();
        collapsed.rows = sets.iter().map(|s| s.iter().map(|id| index[id]).collect()).collect();
        collapsed.vocab = kept;
    }
    (collapsed, aliases)
}
