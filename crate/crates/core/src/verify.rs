//! Hypothesis checks: single-edit mutations scored by an oracle, and matched
//! pairs drawn from the dataset itself.

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::{FeatureId, FeatureMatrix, SubgraphRegistry};
use crate::graph::{mutate_with_rng, Edit, EnvPattern, LabeledGraph, MutateError, MutationSpec};
use crate::hypothesis::Direction;
use crate::ingest::{graph_to_json, Dataset};
use crate::synth::{derive_seed, oracle_eval, PlantedRule, SynthSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("could not run oracle: {0}")]
    Spawn(String),
    #[error("oracle exited with {0}")]
    Exit(String),
    #[error("oracle output `{0}` is not a finite number")]
    Output(String),
}

/// Property oracle scoring a graph.
pub trait Oracle: Sync {
    fn evaluate(&self, g: &LabeledGraph) -> Result<f64, OracleError>;
}

/// Noiseless planted-rule evaluation.
#[derive(Debug, Clone)]
pub struct SynthOracle {
    pub rules: Vec<PlantedRule>,
    pub baseline: f64,
}

impl SynthOracle {
    pub fn from_spec(spec: &SynthSpec) -> Self {
        Self { rules: spec.rules.clone(), baseline: spec.baseline }
    }
}

impl Oracle for SynthOracle {
    fn evaluate(&self, g: &LabeledGraph) -> Result<f64, OracleError> {
        Ok(oracle_eval(g, &self.rules, self.baseline))
    }
}

/// External program: graph JSON (no `y`) on stdin, one number on stdout.
#[derive(Debug, Clone)]
pub struct ExternalOracle {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl Oracle for ExternalOracle {
    fn evaluate(&self, g: &LabeledGraph) -> Result<f64, OracleError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| OracleError::Spawn(format!("{}: {e}", self.program.display())))?;
        let payload = graph_to_json(g, None);
        {
            let mut stdin = child.stdin.take().expect("stdin is piped");
            // a program that exits without reading is reported through its status
            let _ = stdin.write_all(payload.as_bytes()).and_then(|_| stdin.write_all(b"\n"));
        }
        let out = child.wait_with_output().map_err(|e| OracleError::Spawn(e.to_string()))?;
        if !out.status.success() {
            return Err(OracleError::Exit(out.status.to_string()));
        }
        let text = String::from_utf8_lossy(&out.stdout).trim().to_string();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(OracleError::Output(text)),
        }
    }
}

/// Closure-backed oracle, mostly for tests.
pub struct FnOracle<F>(pub F);

impl<F: Fn(&LabeledGraph) -> f64 + Sync> Oracle for FnOracle<F> {
    fn evaluate(&self, g: &LabeledGraph) -> Result<f64, OracleError> {
        Ok((self.0)(g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Mutation,
    MatchedPair,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRecord {
    pub with: String,
    pub without: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edit: Option<Edit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attempts: Option<usize>,
    pub y_with: Option<f64>,
    pub y_without: Option<f64>,
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub feature: FeatureId,
    pub protocol: Protocol,
    pub expected: Direction,
    /// Samples examined.
    pub examined: usize,
    /// Pairs with a usable delta.
    pub pair_count: usize,
    /// `pair_count / examined`.
    pub yield_fraction: f64,
    /// Mean `y_with - y_without`; absent when no pairs.
    pub effect: Option<f64>,
    /// Sign agreement with `expected`; absent below the configured pair minimum.
    pub agreement: Option<bool>,
    pub pairs: Vec<PairRecord>,
}

impl VerificationReport {
    pub fn is_degenerate(&self) -> bool {
        self.pair_count == 0
    }

    fn assemble(
        feature: FeatureId,
        protocol: Protocol,
        expected: Direction,
        examined: usize,
        pairs: Vec<PairRecord>,
        min_pairs: usize,
    ) -> Self {
        let deltas: Vec<f64> = pairs.iter().filter_map(|p| p.delta).collect();
        let pair_count = deltas.len();
        let effect = (pair_count > 0).then(|| deltas.iter().sum::<f64>() / pair_count as f64);
        let agreement = match effect {
            Some(e) if pair_count >= min_pairs.max(1) => Some(expected != Direction::None && e * expected.sign() > 0.0),
            _ => None,
        };
        let yield_fraction = if examined == 0 { 0.0 } else { pair_count as f64 / examined as f64 };
        Self { feature, protocol, expected, examined, pair_count, yield_fraction, effect, agreement, pairs }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("feature {0} has no registry entry")]
    UnknownFeature(FeatureId),
    #[error("feature matrix has {rows} rows for {samples} samples")]
    Shape { rows: usize, samples: usize },
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MutationConfig {
    pub attempts: usize,
    pub seed: u64,
    /// Stop once this many pairs are collected (samples are visited in order).
    pub max_pairs: Option<usize>,
    pub min_pairs: usize,
    /// Concurrent oracle evaluations; 0 uses the global pool.
    pub concurrency: usize,
}

impl Default for MutationConfig {
    fn default() -> Self {
        Self { attempts: 200, seed: 0, max_pairs: None, min_pairs: 10, concurrency: 0 }
    }
}

fn run_in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, VerifyError> {
    if threads == 0 {
        return Ok(f());
    }
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| VerifyError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

const CHUNK: usize = 64;

/// Single-edit mutation protocol.
///
/// For every sample the generator proposes edits of the original graph until
/// one flips the target bit while leaving every guard bit unchanged; the
/// oracle scores both graphs. `aliases` are features with the same presence
/// column as the target and must flip together with it.
#[allow(clippy::too_many_arguments)]
pub fn mutation_test(
    ds: &Dataset,
    registry: &SubgraphRegistry,
    feature: FeatureId,
    aliases: &[FeatureId],
    guards: &[FeatureId],
    expected: Direction,
    oracle: &dyn Oracle,
    spec: &MutationSpec,
    config: &MutationConfig,
) -> Result<VerificationReport, VerifyError> {
    let compile = |ids: &mut dyn Iterator<Item = FeatureId>| {
        ids.map(|f| registry.get(f).map(EnvPattern::new).ok_or(VerifyError::UnknownFeature(f)))
            .collect::<Result<Vec<_>, _>>()
    };
    let group: Vec<FeatureId> = std::iter::once(feature).chain(aliases.iter().copied()).collect();
    let targets = compile(&mut group.iter().copied())?;
    let guard_patterns = compile(&mut guards.iter().copied().filter(|g| !group.contains(g)))?;
    let bits = |ps: &[EnvPattern], g: &LabeledGraph| -> Vec<bool> { ps.iter().map(|p| p.matches(g)).collect() };

    let one = |i: usize| -> Option<PairRecord> {
        let g = &ds.samples[i].graph;
        if g.is_empty() {
            return None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, i as u64));
        let had = bits(&targets, g);
        let before = bits(&guard_patterns, g);
        for attempt in 1..=config.attempts {
            let (m, edit) = match mutate_with_rng(g, &mut rng, spec) {
                Ok(x) => x,
                Err(MutateError::Disconnects(_)) => continue,
                Err(_) => return None,
            };
            if bits(&targets, &m).iter().zip(&had).any(|(a, b)| a == b) || bits(&guard_patterns, &m) != before {
                continue;
            }
            let had = had[0];
            let m = m.with_id(format!("{}~{attempt}", g.id()));
            let (gw, gwo) = if had { (g, &m) } else { (&m, g) };
            let (yw, ywo) = (oracle.evaluate(gw), oracle.evaluate(gwo));
            let error = yw.as_ref().err().or(ywo.as_ref().err()).map(ToString::to_string);
            let (yw, ywo) = (yw.ok(), ywo.ok());
            return Some(PairRecord {
                with: gw.id().to_string(),
                without: gwo.id().to_string(),
                edit: Some(edit),
                distance: None,
                attempts: Some(attempt),
                y_with: yw,
                y_without: ywo,
                delta: yw.zip(ywo).map(|(a, b)| a - b),
                error,
            });
        }
        None
    };

    let (pairs, examined) = run_in_pool(config.concurrency, || {
        let mut pairs = Vec::new();
        let mut examined = 0;
        for start in (0..ds.len()).step_by(CHUNK) {
            let end = (start + CHUNK).min(ds.len());
            let found: Vec<Option<PairRecord>> = (start..end).into_par_iter().map(one).collect();
            for rec in found {
                examined += 1;
                if let Some(r) = rec {
                    pairs.push(r);
                }
                if config.max_pairs.is_some_and(|m| pairs.iter().filter(|p| p.delta.is_some()).count() >= m) {
                    return (pairs, examined);
                }
            }
        }
        (pairs, examined)
    })?;
    Ok(VerificationReport::assemble(feature, Protocol::Mutation, expected, examined, pairs, config.min_pairs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Largest allowed Hamming distance over the comparison features.
    pub tau: usize,
    pub min_pairs: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { tau: 2, min_pairs: 10 }
    }
}

/// Features that enter the Hamming distance.
#[derive(Debug, Clone, PartialEq)]
pub enum MatchScope {
    /// The whole vocabulary.
    All,
    /// A fixed list, typically the guard set of top-ranked features.
    Features(Vec<FeatureId>),
}

/// Matched-pair protocol over the existing samples.
pub fn matched_pairs(
    ds: &Dataset,
    x: &FeatureMatrix,
    feature: FeatureId,
    scope: &MatchScope,
    expected: Direction,
    config: &MatchConfig,
) -> Result<VerificationReport, VerifyError> {
    if x.n_samples() != ds.len() {
        return Err(VerifyError::Shape { rows: x.n_samples(), samples: ds.len() });
    }
    let column = x.column(feature);
    let target = x.index_of(feature).map(|k| k as u32);
    let signature: Vec<Vec<u32>> = match scope {
        MatchScope::All => {
            (0..x.n_samples()).map(|i| x.row(i).iter().copied().filter(|&k| Some(k) != target).collect()).collect()
        }
        MatchScope::Features(list) => {
            let mut keys: Vec<u32> =
                list.iter().filter(|&&f| f != feature).filter_map(|&f| x.index_of(f)).map(|k| k as u32).collect();
            keys.sort_unstable();
            keys.dedup();
            (0..x.n_samples())
                .map(|i| keys.iter().copied().filter(|k| x.row(i).binary_search(k).is_ok()).collect())
                .collect()
        }
    };
    let with: Vec<usize> = (0..ds.len()).filter(|&i| column[i]).collect();
    let without: Vec<usize> = (0..ds.len()).filter(|&i| !column[i]).collect();
    let (signature, without) = (&signature, &without);
    let mut candidates: Vec<(usize, usize, usize)> = with
        .par_iter()
        .flat_map_iter(|&i| {
            without.iter().filter_map(move |&j| {
                let d = sorted_hamming(&signature[i], &signature[j], config.tau);
                (d <= config.tau).then_some((d, i, j))
            })
        })
        .collect();
    candidates.sort_unstable();
    let mut used = vec![false; ds.len()];
    let mut pairs = Vec::new();
    for (d, i, j) in candidates {
        if used[i] || used[j] {
            continue;
        }
        used[i] = true;
        used[j] = true;
        let (yw, ywo) = (ds.samples[i].y, ds.samples[j].y);
        pairs.push(PairRecord {
            with: ds.samples[i].graph.id().to_string(),
            without: ds.samples[j].graph.id().to_string(),
            edit: None,
            distance: Some(d),
            attempts: None,
            y_with: Some(yw),
            y_without: Some(ywo),
            delta: Some(yw - ywo),
            error: None,
        });
    }
    Ok(VerificationReport::assemble(feature, Protocol::MatchedPair, expected, with.len(), pairs, config.min_pairs))
}

/// Size of the symmetric difference of two sorted lists, stopping early past `cap`.
fn sorted_hamming(a: &[u32], b: &[u32], cap: usize) -> usize {
    let (mut i, mut j, mut d) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => {
                d += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                d += 1;
                j += 1;
            }
        }
        if d > cap {
            return d;
        }
    }
    d + (a.len() - i) + (b.len() - j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingerprint::{environment_feature_id, featurize_dataset};
    use crate::graph::{extract_environment, EdgeLabel, MutationKind, NodeLabel};
    use crate::ingest::{parse_molecule, Sample};
    use std::collections::BTreeSet;

    fn ds(items: &[(&str, f64)]) -> Dataset {
        Dataset::new(
            "t",
            items
                .iter()
                .enumerate()
                .map(|(i, (s, y))| Sample { graph: parse_molecule(s).unwrap().with_id(format!("m{i}")), y: *y })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn hamming_counts_symmetric_difference() {
        assert_eq!(sorted_hamming(&[1, 2, 3], &[2, 3, 4], 9), 2);
        assert_eq!(sorted_hamming(&[], &[1, 2], 9), 2);
        assert_eq!(sorted_hamming(&[5], &[5], 0), 0);
    }

    #[test]
    fn single_matched_pair() {
        let d = ds(&[("CC=O", 4.0), ("CCO", 1.0)]);
        let (x, _) = featurize_dataset(&d, 0).unwrap();
        let (x1, reg1) = featurize_dataset(&d, 1).unwrap();
        let carbonyl = environment_feature_id(&extract_environment(&d.samples[0].graph, 2, 1)).unwrap();
        assert!(reg1.get(carbonyl).is_some());
        let r = matched_pairs(
            &d,
            &x1,
            carbonyl,
            &MatchScope::Features(vec![]),
            Direction::Increase,
            &MatchConfig::default(),
        )
        .unwrap();
        assert_eq!(r.pair_count, 1);
        assert_eq!(r.effect, Some(3.0));
        assert_eq!(r.agreement, None);
        let absent =
            matched_pairs(&d, &x, FeatureId(1), &MatchScope::All, Direction::Increase, &MatchConfig::default())
                .unwrap();
        assert!(absent.is_degenerate());
    }

    #[test]
    fn greedy_uses_each_sample_once() {
        let sets: Vec<BTreeSet<FeatureId>> = [vec![1, 10], vec![1, 10], vec![10], vec![10, 11]]
            .iter()
            .map(|r| r.iter().map(|&k| FeatureId(k)).collect())
            .collect();
        let x = FeatureMatrix::from_sets(&sets);
        let d = ds(&[("C", 5.0), ("C", 6.0), ("C", 1.0), ("C", 2.0)]);
        let cfg = MatchConfig { tau: 1, min_pairs: 2 };
        let r = matched_pairs(&d, &x, FeatureId(1), &MatchScope::All, Direction::Increase, &cfg).unwrap();
        let got: Vec<(String, String, Option<usize>)> =
            r.pairs.iter().map(|p| (p.with.clone(), p.without.clone(), p.distance)).collect();
        assert_eq!(got, vec![("m0".into(), "m2".into(), Some(0)), ("m1".into(), "m3".into(), Some(1))]);
        assert_eq!(r.effect, Some(4.0));
        assert_eq!(r.agreement, Some(true));
    }

    fn carbonyl_setup() -> (Dataset, SubgraphRegistry, FeatureId) {
        let d = ds(&[("CC=O", 0.0), ("CCC", 0.0), ("OCC", 0.0), ("CC(=O)C", 0.0)]);
        let (_, reg) = featurize_dataset(&d, 1).unwrap();
        let f = environment_feature_id(&extract_environment(&d.samples[0].graph, 2, 1)).unwrap();
        (d, reg, f)
    }

    fn bond_spec() -> MutationSpec {
        MutationSpec::uniform(
            ["C", "O"].iter().map(|k| parse_molecule(k).unwrap().node(0).clone()).collect(),
            ["single", "double"].iter().map(|k| EdgeLabel::new(*k)).collect(),
        )
    }

    #[test]
    fn mutation_pairs_flip_only_target() {
        let (d, reg, f) = carbonyl_setup();
        let oracle =
            FnOracle(|g: &LabeledGraph| if g.edges().iter().any(|e| e.label.kind == "double") { 2.0 } else { 0.0 });
        let cfg = MutationConfig { min_pairs: 1, ..Default::default() };
        let r = mutation_test(&d, &reg, f, &[], &[], Direction::Increase, &oracle, &bond_spec(), &cfg).unwrap();
        assert!(r.pair_count >= 3, "{r:?}");
        let pattern = EnvPattern::new(reg.get(f).unwrap());
        for p in &r.pairs {
            assert!(p.attempts.unwrap() >= 1);
            assert!(p.edit.is_some());
        }
        assert!(pattern.matches(&d.samples[0].graph));
        assert_eq!(mutation_test(&d, &reg, f, &[], &[], Direction::Increase, &oracle, &bond_spec(), &cfg).unwrap(), r);
    }

    #[test]
    fn constant_oracle_disagrees() {
        let (d, reg, f) = carbonyl_setup();
        let cfg = MutationConfig { min_pairs: 1, ..Default::default() };
        let r = mutation_test(
            &d,
            &reg,
            f,
            &[],
            &[],
            Direction::Increase,
            &FnOracle(|_: &LabeledGraph| 1.5),
            &bond_spec(),
            &cfg,
        )
        .unwrap();
        assert_eq!(r.effect, Some(0.0));
        assert_eq!(r.agreement, Some(false));
    }

    #[test]
    fn unplantable_feature_is_degenerate() {
        let d = ds(&[("CC", 0.0), ("CCC", 0.0)]);
        let (_, mut reg) = featurize_dataset(&d, 0).unwrap();
        let far = crate::graph::EnvironmentDescriptor {
            nodes: vec![NodeLabel::new("Xe")],
            edges: vec![],
            radius: 0,
            root: 0,
        };
        let extra = crate::fingerprint::featurize(&far.to_graph("x").unwrap(), 0).unwrap();
        reg.merge(extra.registry);
        let id = environment_feature_id(&far).unwrap();
        let spec = MutationSpec::only(MutationKind::EdgeAdd, vec![NodeLabel::new("C")], vec![EdgeLabel::new("single")]);
        let r = mutation_test(
            &d,
            &reg,
            id,
            &[],
            &[],
            Direction::Increase,
            &FnOracle(|_: &LabeledGraph| 0.0),
            &spec,
            &MutationConfig::default(),
        )
        .unwrap();
        assert!(r.is_degenerate());
        assert_eq!(r.effect, None);
        assert_eq!(r.agreement, None);
    }

    #[test]
    fn external_oracle_protocol() {
        let ok = ExternalOracle { program: "sh".into(), args: vec!["-c".into(), "cat >/dev/null; echo 2.5".into()] };
        let g = parse_molecule("CO").unwrap();
        assert_eq!(ok.evaluate(&g), Ok(2.5));
        let fail = ExternalOracle { program: "sh".into(), args: vec!["-c".into(), "exit 3".into()] };
        assert!(matches!(fail.evaluate(&g), Err(OracleError::Exit(_))));
        let junk = ExternalOracle { program: "sh".into(), args: vec!["-c".into(), "echo nope".into()] };
        assert_eq!(junk.evaluate(&g), Err(OracleError::Output("nope".into())));
        let echo = ExternalOracle { program: "sh".into(), args: vec!["-c".into(), "grep -c '\"y\"' || true".into()] };
        assert_eq!(echo.evaluate(&g), Ok(0.0));
    }
}
