//! Ranked single-feature hypotheses with effect statistics and conditional histograms.

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::boost::{ranked_importances, BoostedEnsemble};
use crate::fingerprint::{AliasMap, FeatureId, FeatureMatrix, SubgraphRegistry};

pub const DEFAULT_D_MIN: f64 = 0.2;
pub const DEFAULT_TOP_K: usize = 30;
pub const DEFAULT_BINS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increase,
    Decrease,
    None,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Increase => 1.0,
            Direction::Decrease => -1.0,
            Direction::None => 0.0,
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Increase => "increase",
            Direction::Decrease => "decrease",
            Direction::None => "none",
        })
    }
}

fn ser_real<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        None => s.serialize_none(),
        Some(x) if x.is_finite() => s.serialize_f64(*x),
        Some(x) => s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" }),
    }
}

/// Formats an optional statistic for tables and captions.
pub fn fmt_real(v: Option<f64>, digits: usize) -> String {
    match v {
        None => "NA".to_string(),
        Some(x) if x.is_infinite() => if x > 0.0 { "inf" } else { "-inf" }.to_string(),
        Some(x) => format!("{x:.digits$}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectStats {
    pub n1: usize,
    pub n0: usize,
    #[serde(serialize_with = "ser_real")]
    pub mean1: Option<f64>,
    #[serde(serialize_with = "ser_real")]
    pub mean0: Option<f64>,
    /// `mean1 - mean0`; absent when either side is empty.
    #[serde(serialize_with = "ser_real")]
    pub s: Option<f64>,
    /// `s` over the pooled standard deviation; infinite when both sides are constant.
    #[serde(serialize_with = "ser_real")]
    pub d: Option<f64>,
    pub direction: Direction,
    pub no_contrast: bool,
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    (mean, ss)
}

pub fn effect_strength(column: &[bool], y: &[f64]) -> EffectStats {
    effect_strength_with(column, y, DEFAULT_D_MIN)
}

/// Conditional-mean contrast; `direction` is `none` when `|d| < d_min`.
pub fn effect_strength_with(column: &[bool], y: &[f64], d_min: f64) -> EffectStats {
    assert_eq!(column.len(), y.len(), "column and targets must align");
    let on: Vec<f64> = column.iter().zip(y).filter(|(c, _)| **c).map(|(_, v)| *v).collect();
    let off: Vec<f64> = column.iter().zip(y).filter(|(c, _)| !**c).map(|(_, v)| *v).collect();
    let (n1, n0) = (on.len(), off.len());
    if n1 == 0 || n0 == 0 {
        let mean = |v: &[f64]| (!v.is_empty()).then(|| mean_var(v).0);
        return EffectStats {
            n1,
            n0,
            mean1: mean(&on),
            mean0: mean(&off),
            s: None,
            d: None,
            direction: Direction::None,
            no_contrast: true,
        };
    }
    let (m1, ss1) = mean_var(&on);
    let (m0, ss0) = mean_var(&off);
    let s = m1 - m0;
    let dof = (n1 + n0).saturating_sub(2);
    let pooled = if dof == 0 { 0.0 } else { ((ss1 + ss0) / dof as f64).sqrt() };
    let d = if pooled > 0.0 {
        s / pooled
    } else if s == 0.0 {
        0.0
    } else {
        s.signum() * f64::INFINITY
    };
    let direction = if d.abs() < d_min || s == 0.0 {
        Direction::None
    } else if s > 0.0 {
        Direction::Increase
    } else {
        Direction::Decrease
    };
    EffectStats { n1, n0, mean1: Some(m1), mean0: Some(m0), s: Some(s), d: Some(d), direction, no_contrast: false }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HistogramError {
    #[error("need at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("column and targets differ in length")]
    LengthMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramPair {
    pub edges: Vec<f64>,
    pub true_counts: Vec<usize>,
    pub false_counts: Vec<usize>,
    /// All targets equal: one zero-width bin.
    pub degenerate: bool,
}

/// Equal-width bins over `[min y, max y]`; bins are left-closed, the last also right-closed.
pub fn conditional_histogram(column: &[bool], y: &[f64], bins: usize) -> Result<HistogramPair, HistogramError> {
    if bins < 2 {
        return Err(HistogramError::TooFewBins(bins));
    }
    if column.len() != y.len() {
        return Err(HistogramError::LengthMismatch);
    }
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if y.is_empty() || lo == hi {
        let edges = if y.is_empty() { vec![0.0, 0.0] } else { vec![lo, hi] };
        let t = column.iter().filter(|c| **c).count();
        return Ok(HistogramPair { edges, true_counts: vec![t], false_counts: vec![y.len() - t], degenerate: true });
    }
    let width = hi - lo;
    let mut edges: Vec<f64> = (0..bins).map(|k| lo + width * k as f64 / bins as f64).collect();
    edges.push(hi);
    let inner = &edges[1..bins];
    let mut true_counts = vec![0; bins];
    let mut false_counts = vec![0; bins];
    for (&c, &v) in column.iter().zip(y) {
        let b = inner.partition_point(|&e| e <= v);
        if c {
            true_counts[b] += 1;
        } else {
            false_counts[b] += 1;
        }
    }
    Ok(HistogramPair { edges, true_counts, false_counts, degenerate: false })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HypothesisConfig {
    pub top_k: usize,
    pub d_min: f64,
    /// `None` means `max(5, ceil(0.5% of n))`.
    pub support_min: Option<usize>,
    pub bins: usize,
    pub property: String,
}

impl Default for HypothesisConfig {
    fn default() -> Self {
        Self { top_k: DEFAULT_TOP_K, d_min: DEFAULT_D_MIN, support_min: None, bins: DEFAULT_BINS, property: "y".into() }
    }
}

impl HypothesisConfig {
    pub fn support_for(&self, n: usize) -> usize {
        self.support_min.unwrap_or_else(|| 5.max((n as f64 * 0.005).ceil() as usize))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypothesis {
    pub rank: usize,
    pub feature: FeatureId,
    /// Features with an identical presence column.
    pub aliases: Vec<FeatureId>,
    pub subgraph: String,
    pub importance: f64,
    pub stats: EffectStats,
    pub histogram: HistogramPair,
    pub text: String,
}

impl Hypothesis {
    /// Directional hypotheses are reported; the rest stay in machine-readable output only.
    pub fn is_reported(&self) -> bool {
        self.stats.direction != Direction::None
    }
}

pub fn render_sentence(feature: &str, subgraph: &str, property: &str, st: &EffectStats) -> String {
    let change = match st.direction {
        Direction::Increase => "increase",
        Direction::Decrease => "decrease",
        Direction::None => "no clear change",
    };
    format!(
        "Feature {feature} ({subgraph}) leads to {change} of {property} (s = {}, d = {}, support = {}/{})",
        fmt_real(st.s, 4),
        fmt_real(st.d, 3),
        st.n1,
        st.n1 + st.n0
    )
}

pub fn generate_hypotheses(
    e: &BoostedEnsemble,
    x: &FeatureMatrix,
    y: &[f64],
    registry: &SubgraphRegistry,
    aliases: &AliasMap,
    config: &HypothesisConfig,
) -> Result<Vec<Hypothesis>, HistogramError> {
    let support = config.support_for(y.len());
    let mut out = Vec::new();
    for (feature, importance) in ranked_importances(e).into_iter().take(config.top_k) {
        let Some(env) = registry.get(feature) else { continue };
        let column = x.column(feature);
        let stats = effect_strength_with(&column, y, config.d_min);
        if stats.n1 < support || stats.n0 < support {
            continue;
        }
        let histogram = conditional_histogram(&column, y, config.bins)?;
        let subgraph = env.canonical_text();
        let text = render_sentence(&feature.to_string(), &subgraph, &config.property, &stats);
        out.push(Hypothesis {
            rank: out.len() + 1,
            feature,
            aliases: aliases.get(&feature).cloned().unwrap_or_default(),
            subgraph,
            importance,
            stats,
            histogram,
            text,
        });
    }
    Ok(out)
}
