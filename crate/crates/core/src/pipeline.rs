//! End-to-end orchestration shared by the CLI, the FFI layer and the tests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::boost::{fit_ensemble_traced, mse, ranked_importances, BoostConfig, BoostError, BoostedEnsemble, MseTrace};
use crate::combine::{search_macro_features, CombineConfig, MacroFeature, Op};
use crate::fingerprint::{
    collapse_aliases, featurize_dataset, AliasMap, FeatureId, FeatureMatrix, FingerprintError, SubgraphRegistry,
    DEFAULT_RADIUS, HASH_VERSION,
};
use crate::graph::MutationSpec;
use crate::hypothesis::{generate_hypotheses, HistogramError, Hypothesis, HypothesisConfig};
use crate::ingest::{Dataset, IngestError};
use crate::report::{combined_csv, hypotheses_csv, render_histogram_svg, render_subgraph_dot, HistogramLabels};
use crate::synth::{derive_seed, SynthError};
use crate::verify::{
    matched_pairs, mutation_test, MatchConfig, MatchScope, MutationConfig, Oracle, VerificationReport, VerifyError,
};

const SPLIT_STREAM: u64 = 0x0053_504c_4954;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{origin}: {message}")]
pub struct ConfigError {
    /// `line N` for config files, `--key` for flags.
    pub origin: String,
    pub message: String,
}

/// Every tunable of a run, flat so it can live in a `key = value` file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub radius: u32,
    pub stages: usize,
    pub shrinkage: f64,
    pub depth: usize,
    pub min_leaf: usize,
    pub subsample: f64,
    pub colsample: f64,
    pub validation: f64,
    pub top_k: usize,
    pub d_min: f64,
    pub support_min: Option<usize>,
    pub bins: usize,
    pub property: String,
    pub combine_k: usize,
    pub ops: Vec<Op>,
    pub gain_min: f64,
    pub triples: bool,
    pub verify_top: usize,
    pub attempts: usize,
    pub max_pairs: Option<usize>,
    pub min_pairs: usize,
    pub tau: usize,
    pub match_all: bool,
    pub oracle_concurrency: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let b = BoostConfig::default();
        let h = HypothesisConfig::default();
        let c = CombineConfig::default();
        let m = MutationConfig::default();
        Self {
            radius: DEFAULT_RADIUS,
            stages: b.stages,
            shrinkage: b.shrinkage,
            depth: b.max_depth,
            min_leaf: b.min_leaf,
            subsample: b.subsample,
            colsample: b.colsample,
            validation: 0.1,
            top_k: h.top_k,
            d_min: h.d_min,
            support_min: h.support_min,
            bins: h.bins,
            property: h.property,
            combine_k: c.k,
            ops: c.ops,
            gain_min: c.gain_min,
            triples: c.triples,
            verify_top: 5,
            attempts: m.attempts,
            max_pairs: Some(200),
            min_pairs: m.min_pairs,
            tau: MatchConfig::default().tau,
            match_all: false,
            oracle_concurrency: 0,
            seed: 0,
            threads: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(v: &str, what: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("`{v}` is not a valid {what}"))
}

fn parse_optional<T: std::str::FromStr>(v: &str, what: &str) -> Result<Option<T>, String> {
    if v == "auto" || v == "none" {
        Ok(None)
    } else {
        parse(v, what).map(Some)
    }
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "radius",
        "stages",
        "shrinkage",
        "depth",
        "min_leaf",
        "subsample",
        "colsample",
        "validation",
        "top_k",
        "d_min",
        "support_min",
        "bins",
        "property",
        "combine_k",
        "ops",
        "gain_min",
        "triples",
        "verify_top",
        "attempts",
        "max_pairs",
        "min_pairs",
        "tau",
        "match_all",
        "oracle_concurrency",
        "seed",
        "threads",
    ];

    /// Sets one key; dashes and underscores are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key.replace('-', "_").as_str() {
            "radius" => self.radius = parse(v, "radius")?,
            "stages" => self.stages = parse(v, "stage count")?,
            "shrinkage" => self.shrinkage = parse(v, "number")?,
            "depth" => self.depth = parse(v, "depth")?,
            "min_leaf" => self.min_leaf = parse(v, "count")?,
            "subsample" => self.subsample = parse(v, "fraction")?,
            "colsample" => self.colsample = parse(v, "fraction")?,
            "validation" => {
                let f: f64 = parse(v, "fraction")?;
                if !(0.0..1.0).contains(&f) {
                    return Err(format!("validation fraction {f} is outside [0, 1)"));
                }
                self.validation = f;
            }
            "top_k" => self.top_k = parse(v, "count")?,
            "d_min" => self.d_min = parse(v, "number")?,
            "support_min" => self.support_min = parse_optional(v, "count")?,
            "bins" => self.bins = parse(v, "count")?,
            "property" => self.property = v.to_string(),
            "combine_k" => self.combine_k = parse(v, "count")?,
            "ops" => {
                let ops = v
                    .split(',')
                    .map(|t| t.trim().parse::<Op>().map_err(|_| format!("unknown operator `{}`", t.trim())))
                    .collect::<Result<Vec<_>, _>>()?;
                if ops.is_empty() {
                    return Err("no operators given".into());
                }
                self.ops = ops;
            }
            "gain_min" => self.gain_min = parse(v, "number")?,
            "triples" => self.triples = parse(v, "boolean")?,
            "verify_top" => self.verify_top = parse(v, "count")?,
            "attempts" => self.attempts = parse(v, "count")?,
            "max_pairs" => self.max_pairs = parse_optional(v, "count")?,
            "min_pairs" => self.min_pairs = parse(v, "count")?,
            "tau" => self.tau = parse(v, "distance")?,
            "match_all" => self.match_all = parse(v, "boolean")?,
            "oracle_concurrency" => self.oracle_concurrency = parse(v, "count")?,
            "seed" => self.seed = parse(v, "seed")?,
            "threads" => self.threads = parse(v, "thread count")?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let origin = format!("line {}", i + 1);
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError { origin, message: format!("expected `key = value`, found `{line}`") });
            };
            self.set(k.trim(), v).map_err(|message| ConfigError { origin, message })?;
        }
        Ok(())
    }

    pub fn boost(&self) -> BoostConfig {
        BoostConfig {
            stages: self.stages,
            shrinkage: self.shrinkage,
            max_depth: self.depth,
            min_leaf: self.min_leaf,
            seed: self.seed,
            subsample: self.subsample,
            colsample: self.colsample,
        }
    }

    pub fn hypothesis(&self) -> HypothesisConfig {
        HypothesisConfig {
            top_k: self.top_k,
            d_min: self.d_min,
            support_min: self.support_min,
            bins: self.bins,
            property: self.property.clone(),
        }
    }

    pub fn combine(&self) -> CombineConfig {
        CombineConfig {
            k: self.combine_k,
            ops: self.ops.clone(),
            gain_min: self.gain_min,
            support_min: self.support_min,
            d_min: self.d_min,
            triples: self.triples,
        }
    }

    pub fn mutation(&self) -> MutationConfig {
        MutationConfig {
            attempts: self.attempts,
            seed: self.seed,
            max_pairs: self.max_pairs,
            min_pairs: self.min_pairs,
            concurrency: self.oracle_concurrency,
        }
    }

    pub fn matching(&self) -> MatchConfig {
        MatchConfig { tau: self.tau, min_pairs: self.min_pairs }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
    #[error(transparent)]
    Boost(#[from] BoostError),
    #[error(transparent)]
    Histogram(#[from] HistogramError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{0}")]
    Mismatch(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub fn read_file(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.display().to_string(), source })
}

/// Raw fingerprints plus the alias-collapsed matrix that training sees.
#[derive(Debug, Clone)]
pub struct Features {
    pub raw: FeatureMatrix,
    pub x: FeatureMatrix,
    pub registry: SubgraphRegistry,
    pub aliases: AliasMap,
}

impl Features {
    pub fn new(raw: FeatureMatrix, registry: SubgraphRegistry) -> Self {
        let (x, aliases) = collapse_aliases(&raw, &registry);
        Self { raw, x, registry, aliases }
    }
}

pub fn featurize_stage(ds: &Dataset, config: &RunConfig) -> Result<Features, PipelineError> {
    if ds.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let (raw, registry) = featurize_dataset(ds, config.radius)?;
    Ok(Features::new(raw, registry))
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitSummary {
    pub train: usize,
    pub validation: usize,
    pub train_mse: f64,
    pub validation_mse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: BoostedEnsemble,
    pub trace: MseTrace,
    pub split: SplitSummary,
}

/// Sample indices held out for validation, sorted.
pub fn validation_rows(n: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let k = ((n as f64) * fraction).round() as usize;
    if k == 0 || n < k + 2 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, SPLIT_STREAM)));
    let mut held = idx[..k].to_vec();
    held.sort_unstable();
    held
}

pub fn train_stage(ds: &Dataset, features: &Features, config: &RunConfig) -> Result<Trained, PipelineError> {
    let y = ds.targets();
    let held = validation_rows(y.len(), config.validation, config.seed);
    let mut is_held = vec![false; y.len()];
    for &i in &held {
        is_held[i] = true;
    }
    let train: Vec<usize> = (0..y.len()).filter(|&i| !is_held[i]).collect();
    let xt = features.x.select_rows(&train);
    let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let (model, trace) = fit_ensemble_traced(&xt, &yt, &config.boost())?;
    let validation_mse = (!held.is_empty()).then(|| {
        let yv: Vec<f64> = held.iter().map(|&i| y[i]).collect();
        mse(&model, &features.x.select_rows(&held), &yv)
    });
    let split =
        SplitSummary { train: train.len(), validation: held.len(), train_mse: mse(&model, &xt, &yt), validation_mse };
    Ok(Trained { model, trace, split })
}

pub fn hypotheses_stage(
    ds: &Dataset,
    features: &Features,
    model: &BoostedEnsemble,
    config: &RunConfig,
) -> Result<Vec<Hypothesis>, PipelineError> {
    Ok(generate_hypotheses(
        model,
        &features.x,
        &ds.targets(),
        &features.registry,
        &features.aliases,
        &config.hypothesis(),
    )?)
}

pub fn combine_stage(
    ds: &Dataset,
    features: &Features,
    model: &BoostedEnsemble,
    config: &RunConfig,
) -> Vec<MacroFeature> {
    let candidates: Vec<FeatureId> = ranked_importances(model).into_iter().map(|(f, _)| f).collect();
    search_macro_features(&candidates, &features.x, &ds.targets(), &config.combine())
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisCheck {
    pub rank: usize,
    pub feature: FeatureId,
    pub text: String,
    pub reports: Vec<VerificationReport>,
}

/// Runs matched pairs, and mutation when an oracle is given, on the leading hypotheses.
pub fn verify_stage(
    ds: &Dataset,
    features: &Features,
    model: &BoostedEnsemble,
    hypotheses: &[Hypothesis],
    oracle: Option<&dyn Oracle>,
    config: &RunConfig,
) -> Result<Vec<HypothesisCheck>, PipelineError> {
    let guards: Vec<FeatureId> = ranked_importances(model).into_iter().take(config.top_k).map(|(f, _)| f).collect();
    let scope = if config.match_all { MatchScope::All } else { MatchScope::Features(guards.clone()) };
    let (nodes, edges) = ds.alphabets();
    let spec = MutationSpec::uniform(nodes, edges);
    let mut out = Vec::new();
    for h in hypotheses.iter().filter(|h| h.is_reported()).take(config.verify_top) {
        let mut reports = Vec::new();
        if let Some(oracle) = oracle {
            reports.push(mutation_test(
                ds,
                &features.registry,
                h.feature,
                &h.aliases,
                &guards,
                h.stats.direction,
                oracle,
                &spec,
                &config.mutation(),
            )?);
        }
        reports.push(matched_pairs(ds, &features.x, h.feature, &scope, h.stats.direction, &config.matching())?);
        out.push(HypothesisCheck { rank: h.rank, feature: h.feature, text: h.text.clone(), reports });
    }
    Ok(out)
}

/// Wall-clock seconds per stage, kept out of the deterministic outputs.
pub type Timings = Vec<(String, f64)>;

#[derive(Debug, Clone)]
pub struct Analysis {
    pub features: Features,
    pub trained: Trained,
    pub hypotheses: Vec<Hypothesis>,
    pub combined: Vec<MacroFeature>,
    pub verification: Vec<HypothesisCheck>,
    pub timings: Timings,
}

/// Featurize, train, hypothesize, combine and verify.
pub fn analyze(ds: &Dataset, config: &RunConfig, oracle: Option<&dyn Oracle>) -> Result<Analysis, PipelineError> {
    let mut timings = Timings::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str| {
        timings.push((name.to_string(), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };
    let features = featurize_stage(ds, config)?;
    lap("featurize");
    let trained = train_stage(ds, &features, config)?;
    lap("train");
    let hypotheses = hypotheses_stage(ds, &features, &trained.model, config)?;
    lap("hypotheses");
    let combined = combine_stage(ds, &features, &trained.model, config);
    lap("combine");
    let verification = verify_stage(ds, &features, &trained.model, &hypotheses, oracle, config)?;
    lap("verify");
    Ok(Analysis { features, trained, hypotheses, combined, verification, timings })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Writes files into one directory and remembers their digests.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(root).map_err(|source| PipelineError::Io { path: root.display().to_string(), source })?;
        Ok(Self { root: root.to_path_buf(), written: BTreeMap::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), PipelineError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|source| PipelineError::Io { path: path.display().to_string(), source })?;
        self.written.insert(name.to_string(), sha256_hex(contents.as_bytes()));
        Ok(())
    }

    pub fn digests(&self) -> Vec<FileDigest> {
        self.written.iter().map(|(p, d)| FileDigest { path: p.clone(), sha256: d.clone() }).collect()
    }
}

pub fn digest_inputs(paths: &[&Path]) -> Result<Vec<FileDigest>, PipelineError> {
    paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|source| PipelineError::Io { path: p.display().to_string(), source })?;
            Ok(FileDigest { path: p.display().to_string(), sha256: sha256_hex(&bytes) })
        })
        .collect()
}

fn json<T: Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s
}

pub fn write_features(out: &mut OutputDir, f: &Features) -> Result<(), PipelineError> {
    out.write("features.json", &f.raw.to_json())?;
    out.write("registry.json", &f.registry.to_json())?;
    let aliases: BTreeMap<String, Vec<String>> =
        f.aliases.iter().map(|(k, v)| (k.to_string(), v.iter().map(ToString::to_string).collect())).collect();
    out.write("aliases.json", &json(&aliases))
}

pub fn write_model(out: &mut OutputDir, t: &Trained) -> Result<(), PipelineError> {
    out.write("model.json", &t.model.to_json())?;
    out.write("training.json", &json(&serde_json::json!({ "split": t.split, "mse_trace": t.trace })))
}

/// Tables, per-hypothesis SVG and DOT files.
pub fn write_hypotheses(
    out: &mut OutputDir,
    hyps: &[Hypothesis],
    registry: &SubgraphRegistry,
    property: &str,
) -> Result<(), PipelineError> {
    let reported: Vec<Hypothesis> = hyps.iter().filter(|h| h.is_reported()).cloned().collect();
    out.write("hypotheses.csv", &hypotheses_csv(&reported))?;
    out.write("hypotheses.json", &json(hyps))?;
    for h in &reported {
        let labels = HistogramLabels {
            feature: h.feature.to_string(),
            subgraph: h.subgraph.clone(),
            property: property.to_string(),
        };
        out.write(&format!("hist_{}.svg", h.feature), &render_histogram_svg(&h.histogram, &labels))?;
        if let Some(env) = registry.get(h.feature) {
            out.write(&format!("motif_{}.dot", h.feature), &render_subgraph_dot(env))?;
        }
    }
    Ok(())
}

pub fn write_combined(out: &mut OutputDir, found: &[MacroFeature]) -> Result<(), PipelineError> {
    out.write("combined_hypotheses.csv", &combined_csv(found))?;
    out.write("combined_hypotheses.json", &json(found))
}

pub fn write_verification(out: &mut OutputDir, checks: &[HypothesisCheck]) -> Result<(), PipelineError> {
    out.write("verification.json", &json(checks))
}

/// Reproduction record written last into every output directory.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub hash_version: &'static str,
    pub command: String,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    pub metrics: serde_json::Value,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, inputs: Vec<FileDigest>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            hash_version: HASH_VERSION,
            command: command.to_string(),
            config: config.clone(),
            inputs,
            metrics: serde_json::Value::Null,
            outputs: Vec::new(),
        }
    }

    pub fn finish(mut self, out: &mut OutputDir) -> Result<(), PipelineError> {
        self.outputs = out.digests();
        out.write("manifest.json", &json(&self))
    }
}

pub fn timings_json(t: &Timings) -> String {
    let map: BTreeMap<&str, f64> = t.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    json(&map)
}
