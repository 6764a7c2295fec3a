//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::boost::BoostedEnsemble;
use crate::fingerprint::{FeatureMatrix, SubgraphRegistry};
use crate::ingest::{load_dataset, Dataset, IngestError};
use crate::pipeline::{
    combine_stage, digest_inputs, featurize_stage, hypotheses_stage, read_file, timings_json, train_stage,
    verify_stage, write_combined, write_features, write_hypotheses, write_model, write_verification, ConfigError,
    Features, OutputDir, PipelineError, RunConfig, RunManifest, Timings, Trained,
};
use crate::synth::{gen_dataset, SynthSpec};
use crate::verify::{ExternalOracle, Oracle, SynthOracle};

#[derive(Debug, Parser)]
#[command(name = "hypograph", version, about = "Subgraph hypotheses from graph-labelled regression data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a planted-rule dataset.
    Synth(SynthArgs),
    /// Fingerprint every graph.
    Featurize(StageArgs),
    /// Fit the boosted ensemble.
    Train(StageArgs),
    /// Rank single-feature hypotheses.
    Hypotheses(StageArgs),
    /// Search Boolean combinations of top features.
    Combine(StageArgs),
    /// Check the leading hypotheses with matched pairs and, given an oracle, mutations.
    Verify(StageArgs),
    /// All stages in sequence.
    Run(StageArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Generator spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output dataset (JSON lines); ground truth goes to `<out>.truth.json`.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the spec seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct StageArgs {
    /// Dataset: `.jsonl` graph records or a molecule file.
    #[arg(long)]
    data: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Directory of an earlier stage whose features and model are reused.
    #[arg(long)]
    from: Option<PathBuf>,
    /// Flat `key = value` config file; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write wall-clock stage timings to timings.json.
    #[arg(long)]
    timings: bool,
    /// `synth:<spec.json>` or an executable.
    #[arg(long)]
    oracle: Option<String>,
    /// Argument passed to an external oracle (repeatable).
    #[arg(long = "oracle-arg", allow_hyphen_values = true)]
    oracle_args: Vec<String>,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Debug, Args)]
struct Tuning {
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    stages: Option<String>,
    #[arg(long)]
    shrinkage: Option<String>,
    #[arg(long)]
    depth: Option<String>,
    #[arg(long = "min-leaf")]
    min_leaf: Option<String>,
    #[arg(long = "top-k")]
    top_k: Option<String>,
    #[arg(long = "d-min")]
    d_min: Option<String>,
    #[arg(long = "support-min")]
    support_min: Option<String>,
    #[arg(long)]
    bins: Option<String>,
    #[arg(long)]
    property: Option<String>,
    #[arg(long = "combine-k")]
    combine_k: Option<String>,
    /// Comma-separated subset of and,or,xor.
    #[arg(long)]
    ops: Option<String>,
    #[arg(long = "gain-min")]
    gain_min: Option<String>,
    #[arg(long)]
    triples: bool,
    #[arg(long = "verify-top")]
    verify_top: Option<String>,
    #[arg(long)]
    attempts: Option<String>,
    #[arg(long = "max-pairs")]
    max_pairs: Option<String>,
    #[arg(long = "min-pairs")]
    min_pairs: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    threads: Option<String>,
}

impl Tuning {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut add = |k: &'static str, v: &Option<String>| {
            if let Some(v) = v {
                out.push((k, v.clone()));
            }
        };
        add("radius", &self.radius);
        add("stages", &self.stages);
        add("shrinkage", &self.shrinkage);
        add("depth", &self.depth);
        add("min-leaf", &self.min_leaf);
        add("top-k", &self.top_k);
        add("d-min", &self.d_min);
        add("support-min", &self.support_min);
        add("bins", &self.bins);
        add("property", &self.property);
        add("combine-k", &self.combine_k);
        add("ops", &self.ops);
        add("gain-min", &self.gain_min);
        add("verify-top", &self.verify_top);
        add("attempts", &self.attempts);
        add("max-pairs", &self.max_pairs);
        add("min-pairs", &self.min_pairs);
        add("tau", &self.tau);
        add("seed", &self.seed);
        add("threads", &self.threads);
        if self.triples {
            out.push(("triples", "true".into()));
        }
        out
    }
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(format!("config {e}"))
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            1
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            2
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Featurize(a) => stage("featurize", a),
        Command::Train(a) => stage("train", a),
        Command::Hypotheses(a) => stage("hypotheses", a),
        Command::Combine(a) => stage("combine", a),
        Command::Verify(a) => stage("verify", a),
        Command::Run(a) => stage("run", a),
    }
}

fn synth(a: SynthArgs) -> Result<(), Failure> {
    let mut spec =
        SynthSpec::from_json(&read_file(&a.spec)?).map_err(|e| Failure::Data(format!("{}: {e}", a.spec.display())))?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let (ds, truth) = gen_dataset(&spec).map_err(|e| Failure::Data(e.to_string()))?;
    let name =
        a.out.file_name().and_then(|n| n.to_str()).ok_or_else(|| Failure::Usage("--out must name a file".into()))?;
    let parent = match a.out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut out = OutputDir::create(parent)?;
    out.write(name, &ds.to_jsonl())?;
    let mut truth_json = serde_json::to_string_pretty(&truth).expect("serializable truth");
    truth_json.push('\n');
    out.write(&format!("{name}.truth.json"), &truth_json)?;
    let mut manifest =
        RunManifest::new("synth", &RunConfig { seed: spec.seed, ..RunConfig::default() }, digest_inputs(&[&a.spec])?);
    manifest.metrics = serde_json::json!({ "samples": ds.len() });
    manifest.outputs = out.digests();
    let mut m = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
    m.push('\n');
    out.write(&format!("{name}.manifest.json"), &m)?;
    Ok(())
}

type BuiltOracle = (Option<Box<dyn Oracle>>, Vec<PathBuf>);

fn build_oracle(a: &StageArgs) -> Result<BuiltOracle, Failure> {
    match &a.oracle {
        None => Ok((None, Vec::new())),
        Some(s) => match s.strip_prefix("synth:") {
            Some("") => Err(Failure::Usage("--oracle synth: needs a spec path".into())),
            Some(path) => {
                let p = PathBuf::from(path);
                let spec = SynthSpec::from_json(&read_file(&p)?).map_err(|e| Failure::Data(format!("{path}: {e}")))?;
                Ok((Some(Box::new(SynthOracle::from_spec(&spec))), vec![p]))
            }
            None => Ok((Some(Box::new(ExternalOracle { program: s.into(), args: a.oracle_args.clone() })), Vec::new())),
        },
    }
}

fn load_features(dir: &Path, ds: &Dataset) -> Result<Option<(Features, Vec<PathBuf>)>, Failure> {
    let (fx, fr) = (dir.join("features.json"), dir.join("registry.json"));
    if !fx.exists() || !fr.exists() {
        return Ok(None);
    }
    let data = |p: &Path, e: String| Failure::Data(format!("{}: {e}", p.display()));
    let raw = FeatureMatrix::from_json(&read_file(&fx)?).map_err(|e| data(&fx, e.to_string()))?;
    let registry = SubgraphRegistry::from_json(&read_file(&fr)?).map_err(|e| data(&fr, e.to_string()))?;
    if raw.n_samples() != ds.len() {
        return Err(data(&fx, format!("{} rows for {} samples", raw.n_samples(), ds.len())));
    }
    Ok(Some((Features::new(raw, registry), vec![fx, fr])))
}

fn stage(command: &str, a: StageArgs) -> Result<(), Failure> {
    let mut config = RunConfig::default();
    let mut inputs: Vec<PathBuf> = vec![a.data.clone()];
    if let Some(p) = &a.config {
        config.apply_text(&read_file(p).map_err(|e| Failure::Usage(e.to_string()))?)?;
        inputs.push(p.clone());
    }
    for (k, v) in a.tuning.pairs() {
        config.set(k, &v).map_err(|m| Failure::Usage(format!("--{k}: {m}")))?;
    }
    if config.threads > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(config.threads).build_global();
    }
    let (oracle, oracle_inputs) = build_oracle(&a)?;
    inputs.extend(oracle_inputs);
    let ds = load_dataset(&a.data).map_err(|e| match e {
        IngestError::Io { .. } => Failure::Data(e.to_string()),
        _ => Failure::Data(format!("{}: {e}", a.data.display())),
    })?;
    if ds.is_empty() {
        return Err(Failure::Data(format!("{}: dataset is empty", a.data.display())));
    }

    let mut out = OutputDir::create(&a.out)?;
    let mut timings = Timings::new();
    let mut clock = std::time::Instant::now();
    let mut lap = |name: &str, t: &mut Timings| {
        t.push((name.to_string(), clock.elapsed().as_secs_f64()));
        clock = std::time::Instant::now();
    };
    let mut metrics = serde_json::Map::new();
    metrics.insert("samples".into(), ds.len().into());

    let reused = match &a.from {
        Some(dir) => load_features(dir, &ds)?,
        None => None,
    };
    let features = match reused {
        Some((f, paths)) => {
            inputs.extend(paths);
            f
        }
        None => {
            let f = featurize_stage(&ds, &config)?;
            write_features(&mut out, &f)?;
            lap("featurize", &mut timings);
            f
        }
    };
    metrics.insert("features".into(), features.raw.n_features().into());
    metrics.insert("features_after_alias_collapse".into(), features.x.n_features().into());
    if command == "featurize" {
        return finish(command, &config, &inputs, metrics, out, a.timings.then_some(&timings));
    }

    let model_path = a.from.as_ref().map(|d| d.join("model.json")).filter(|p| p.exists());
    let model: BoostedEnsemble = match (&model_path, command) {
        (Some(p), c) if c != "train" => {
            inputs.push(p.clone());
            BoostedEnsemble::from_json(&read_file(p)?).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?
        }
        _ => {
            let t: Trained = train_stage(&ds, &features, &config)?;
            write_model(&mut out, &t)?;
            lap("train", &mut timings);
            metrics.insert("split".into(), serde_json::to_value(&t.split).expect("serializable split"));
            t.model
        }
    };
    if command == "train" {
        return finish(command, &config, &inputs, metrics, out, a.timings.then_some(&timings));
    }

    if command == "combine" {
        let found = combine_stage(&ds, &features, &model, &config);
        lap("combine", &mut timings);
        metrics.insert("combined".into(), found.len().into());
        write_combined(&mut out, &found)?;
        return finish(command, &config, &inputs, metrics, out, a.timings.then_some(&timings));
    }

    let hyps = hypotheses_stage(&ds, &features, &model, &config)?;
    lap("hypotheses", &mut timings);
    metrics.insert("hypotheses".into(), hyps.len().into());
    write_hypotheses(&mut out, &hyps, &features.registry, &config.property)?;

    if command == "run" {
        let found = combine_stage(&ds, &features, &model, &config);
        lap("combine", &mut timings);
        metrics.insert("combined".into(), found.len().into());
        write_combined(&mut out, &found)?;
    }
    if command == "run" || command == "verify" {
        let checks = verify_stage(&ds, &features, &model, &hyps, oracle.as_deref(), &config)?;
        lap("verify", &mut timings);
        write_verification(&mut out, &checks)?;
    }
    finish(command, &config, &inputs, metrics, out, a.timings.then_some(&timings))
}

fn finish(
    command: &str,
    config: &RunConfig,
    inputs: &[PathBuf],
    metrics: serde_json::Map<String, serde_json::Value>,
    mut out: OutputDir,
    timings: Option<&Timings>,
) -> Result<(), Failure> {
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let mut manifest = RunManifest::new(command, config, digest_inputs(&refs)?);
    manifest.metrics = serde_json::Value::Object(metrics);
    manifest.finish(&mut out)?;
    if let Some(t) = timings {
        out.write("timings.json", &timings_json(t))?;
    }
    Ok(())
}
