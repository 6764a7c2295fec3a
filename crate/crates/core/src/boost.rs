//! Least-squares gradient boosting with regression trees over presence bits.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::{FeatureId, FeatureMatrix, HASH_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub stages: usize,
    pub shrinkage: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
    /// Fraction of rows drawn (without replacement) per stage.
    pub subsample: f64,
    /// Fraction of features offered to each tree.
    pub colsample: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self { stages: 200, shrinkage: 0.1, max_depth: 3, min_leaf: 5, seed: 0, subsample: 1.0, colsample: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoostError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("{targets} targets for {rows} feature rows")]
    LengthMismatch { targets: usize, rows: usize },
    #[error("target {index} is not finite")]
    NonFinite { index: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: FeatureId,
        /// Squared-error reduction achieved by this split.
        gain: f64,
        /// Training rows reaching the node.
        cover: usize,
        /// Feature absent.
        left: Box<TreeNode>,
        /// Feature present.
        right: Box<TreeNode>,
    },
    Leaf {
        value: f64,
    },
}

impl TreeNode {
    pub fn leaf(value: f64) -> Self {
        TreeNode::Leaf { value }
    }

    pub fn split(feature: FeatureId, left: TreeNode, right: TreeNode) -> Self {
        TreeNode::Split { feature, gain: 0.0, cover: 0, left: Box::new(left), right: Box::new(right) }
    }

    pub fn eval(&self, has: impl Fn(FeatureId) -> bool) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { feature, left, right, .. } => {
                    node = if has(*feature) { right } else { left };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn visit_splits(&self, f: &mut impl FnMut(FeatureId, f64, usize)) {
        if let TreeNode::Split { feature, gain, cover, left, right } = self {
            f(*feature, *gain, *cover);
            left.visit_splits(f);
            right.visit_splits(f);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    pub hash_version: String,
    pub c0: f64,
    pub gamma: f64,
    pub trees: Vec<TreeNode>,
    pub config: BoostConfig,
    /// Rows the ensemble was trained on; importances are normalized by it.
    pub n_train: usize,
}

impl BoostedEnsemble {
    /// Ensemble with no stages that predicts `c0` everywhere.
    pub fn constant(c0: f64) -> Self {
        Self {
            hash_version: HASH_VERSION.to_string(),
            c0,
            gamma: 1.0,
            trees: Vec::new(),
            config: BoostConfig::default(),
            n_train: 0,
        }
    }

    pub fn predict_with(&self, has: impl Fn(FeatureId) -> bool) -> f64 {
        let mut out = self.c0;
        for tree in &self.trees {
            out += self.gamma * tree.eval(&has);
        }
        out
    }

    pub fn predict(&self, features: &std::collections::BTreeSet<FeatureId>) -> f64 {
        self.predict_with(|id| features.contains(&id))
    }

    pub fn predict_row(&self, x: &FeatureMatrix, i: usize) -> f64 {
        self.predict_with(|id| x.contains(i, id))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, BoostError> {
        let m: BoostedEnsemble = serde_json::from_str(text).map_err(|e| BoostError::Format(e.to_string()))?;
        if m.hash_version != HASH_VERSION {
            return Err(BoostError::Format(format!("hash version `{}`, expected `{HASH_VERSION}`", m.hash_version)));
        }
        Ok(m)
    }
}

pub fn mse(e: &BoostedEnsemble, x: &FeatureMatrix, y: &[f64]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    y.iter().enumerate().map(|(i, t)| (t - e.predict_row(x, i)).powi(2)).sum::<f64>() / y.len() as f64
}

#[derive(Default)]
struct Scratch {
    count: Vec<u32>,
    sum: Vec<f64>,
    touched: Vec<u32>,
}

struct Grower<'a> {
    x: &'a FeatureMatrix,
    residuals: &'a [f64],
    allowed: Option<&'a [bool]>,
    max_depth: usize,
    min_leaf: usize,
    scratch: Scratch,
}

impl Grower<'_> {
    fn grow(&mut self, rows: &[u32], depth: usize) -> TreeNode {
        let n = rows.len();
        let total: f64 = rows.iter().map(|&i| self.residuals[i as usize]).sum();
        let mean = total / n as f64;
        if depth >= self.max_depth || n < 2 * self.min_leaf.max(1) {
            return TreeNode::leaf(mean);
        }
        let Some((k, gain)) = self.best_split(rows, total) else {
            return TreeNode::leaf(mean);
        };
        let (present, absent): (Vec<u32>, Vec<u32>) =
            rows.iter().partition(|&&i| self.x.row(i as usize).binary_search(&k).is_ok());
        let left = self.grow(&absent, depth + 1);
        let right = self.grow(&present, depth + 1);
        TreeNode::Split {
            feature: self.x.vocab()[k as usize],
            gain,
            cover: n,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Highest-gain split; features are scanned in ascending id order and
    /// only a strictly better gain (beyond rounding noise) replaces the incumbent.
    fn best_split(&mut self, rows: &[u32], total: f64) -> Option<(u32, f64)> {
        let n = rows.len() as f64;
        let s = &mut self.scratch;
        for &i in rows {
            let r = self.residuals[i as usize];
            for &k in self.x.row(i as usize) {
                if self.allowed.is_some_and(|a| !a[k as usize]) {
                    continue;
                }
                if s.count[k as usize] == 0 {
                    s.touched.push(k);
                }
                s.count[k as usize] += 1;
                s.sum[k as usize] += r;
            }
        }
        s.touched.sort_unstable();
        let mean = total / n;
        let sse: f64 = rows.iter().map(|&i| (self.residuals[i as usize] - mean).powi(2)).sum();
        let tol = 1e-13 * sse;
        let mut best: Option<(u32, f64)> = None;
        for &k in &s.touched {
            let n1 = s.count[k as usize] as usize;
            let n0 = rows.len() - n1;
            if n1 < self.min_leaf || n0 < self.min_leaf || n0 == 0 {
                continue;
            }
            let s1 = s.sum[k as usize];
            let m1 = s1 / n1 as f64;
            let m0 = (total - s1) / n0 as f64;
            let gain = (n1 as f64) * (n0 as f64) / n * (m1 - m0).powi(2);
            if gain > tol && best.is_none_or(|(_, g)| gain > g + tol) {
                best = Some((k, gain));
            }
        }
        for &k in &s.touched {
            s.count[k as usize] = 0;
            s.sum[k as usize] = 0.0;
        }
        s.touched.clear();
        best
    }
}

fn scratch(n_features: usize) -> Scratch {
    Scratch { count: vec![0; n_features], sum: vec![0.0; n_features], touched: Vec::new() }
}

/// Greedy CART regression tree on squared error over all rows of `x`.
pub fn fit_tree(x: &FeatureMatrix, residuals: &[f64], max_depth: usize, min_leaf: usize) -> TreeNode {
    assert_eq!(residuals.len(), x.n_samples(), "one residual per row");
    let rows: Vec<u32> = (0..x.n_samples() as u32).collect();
    if rows.is_empty() {
        return TreeNode::leaf(0.0);
    }
    let mut g = Grower { x, residuals, allowed: None, max_depth, min_leaf, scratch: scratch(x.n_features()) };
    g.grow(&rows, 0)
}

fn check_config(c: &BoostConfig) -> Result<(), BoostError> {
    if !(c.shrinkage > 0.0 && c.shrinkage <= 1.0) {
        return Err(BoostError::Config(format!("shrinkage {} outside (0, 1]", c.shrinkage)));
    }
    if !(c.subsample > 0.0 && c.subsample <= 1.0) {
        return Err(BoostError::Config(format!("subsample {} outside (0, 1]", c.subsample)));
    }
    if !(c.colsample > 0.0 && c.colsample <= 1.0) {
        return Err(BoostError::Config(format!("colsample {} outside (0, 1]", c.colsample)));
    }
    Ok(())
}

/// Per-stage training MSE, starting with the constant model.
pub type MseTrace = Vec<f64>;

pub fn fit_ensemble(x: &FeatureMatrix, y: &[f64], config: &BoostConfig) -> Result<BoostedEnsemble, BoostError> {
    fit_ensemble_traced(x, y, config).map(|(e, _)| e)
}

pub fn fit_ensemble_traced(
    x: &FeatureMatrix,
    y: &[f64],
    config: &BoostConfig,
) -> Result<(BoostedEnsemble, MseTrace), BoostError> {
    check_config(config)?;
    let n = y.len();
    if n != x.n_samples() {
        return Err(BoostError::LengthMismatch { targets: n, rows: x.n_samples() });
    }
    if n < 2 {
        return Err(BoostError::TooFewSamples(n));
    }
    if let Some(index) = y.iter().position(|v| !v.is_finite()) {
        return Err(BoostError::NonFinite { index });
    }
    let c0 = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![c0; n];
    let mut residuals: Vec<f64> = y.iter().map(|t| t - c0).collect();
    let mut trace = vec![residuals.iter().map(|r| r * r).sum::<f64>() / n as f64];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let all_rows: Vec<u32> = (0..n as u32).collect();
    let mut scr = scratch(x.n_features());
    let mut trees = Vec::with_capacity(config.stages);
    let mut mask = Vec::new();
    for _ in 0..config.stages {
        let rows = if config.subsample < 1.0 {
            let m = ((n as f64 * config.subsample).round() as usize).clamp(1, n);
            let mut r: Vec<u32> = sample(&mut rng, n, m).into_iter().map(|i| i as u32).collect();
            r.sort_unstable();
            r
        } else {
            all_rows.clone()
        };
        let allowed = if config.colsample < 1.0 {
            let f = x.n_features();
            let m = ((f as f64 * config.colsample).round() as usize).clamp(1, f.max(1));
            mask = vec![false; f];
            for k in sample(&mut rng, f, m.min(f)) {
                mask[k] = true;
            }
            true
        } else {
            false
        };
        let mut g = Grower {
            x,
            residuals: &residuals,
            allowed: allowed.then_some(mask.as_slice()),
            max_depth: config.max_depth,
            min_leaf: config.min_leaf,
            scratch: std::mem::take(&mut scr),
        };
        let tree = g.grow(&rows, 0);
        scr = g.scratch;
        for i in 0..n {
            pred[i] += config.shrinkage * tree.eval(|id| x.contains(i, id));
            residuals[i] = y[i] - pred[i];
        }
        trace.push(residuals.iter().map(|r| r * r).sum::<f64>() / n as f64);
        trees.push(tree);
    }
    let e = BoostedEnsemble {
        hash_version: HASH_VERSION.to_string(),
        c0,
        gamma: config.shrinkage,
        trees,
        config: config.clone(),
        n_train: n,
    };
    Ok((e, trace))
}

/// Normalized importance: `Σ (cover / n) · (gain / cover)` over every split on a feature.
pub fn importances(e: &BoostedEnsemble) -> BTreeMap<FeatureId, f64> {
    let n = e.n_train.max(1) as f64;
    let mut raw: BTreeMap<FeatureId, f64> = BTreeMap::new();
    for tree in &e.trees {
        tree.visit_splits(&mut |f, gain, cover| {
            let cover = cover.max(1) as f64;
            *raw.entry(f).or_default() += (cover / n) * (gain.max(0.0) / cover);
        });
    }
    let total: f64 = raw.values().sum();
    if total <= 0.0 {
        return BTreeMap::new();
    }
    raw.values_mut().for_each(|v| *v /= total);
    raw
}

/// Importances sorted descending; ties by ascending id.
pub fn ranked_importances(e: &BoostedEnsemble) -> Vec<(FeatureId, f64)> {
    let mut v: Vec<(FeatureId, f64)> = importances(e).into_iter().collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn matrix(rows: &[&[u64]]) -> FeatureMatrix {
        let sets: Vec<BTreeSet<FeatureId>> = rows.iter().map(|r| r.iter().map(|&k| FeatureId(k)).collect()).collect();
        FeatureMatrix::from_sets(&sets)
    }

    #[test]
    fn constant_residuals_give_one_leaf() {
        let x = matrix(&[&[1], &[2], &[1, 2], &[]]);
        assert_eq!(fit_tree(&x, &[3.0; 4], 3, 1), TreeNode::leaf(3.0));
    }

    #[test]
    fn perfect_split() {
        let x = matrix(&[&[2], &[2], &[1, 2], &[1, 2]]);
        let t = fit_tree(&x, &[0.0, 0.0, 4.0, 4.0], 3, 1);
        assert_eq!(t.depth(), 1);
        match t {
            TreeNode::Split { feature, left, right, .. } => {
                assert_eq!(feature, FeatureId(1));
                assert_eq!(*left, TreeNode::leaf(0.0));
                assert_eq!(*right, TreeNode::leaf(4.0));
            }
            TreeNode::Leaf { .. } => panic!("expected split"),
        }
    }

    #[test]
    fn equal_gain_prefers_lower_id() {
        // features 5 and 9 split identically
        let x = matrix(&[&[5, 9], &[5, 9], &[], &[]]);
        match fit_tree(&x, &[1.0, 1.0, -1.0, -1.0], 1, 1) {
            TreeNode::Split { feature, .. } => assert_eq!(feature, FeatureId(5)),
            TreeNode::Leaf { .. } => panic!("expected split"),
        }
    }

    #[test]
    fn flat_targets() {
        let x = matrix(&[&[1], &[], &[1], &[2]]);
        let e = fit_ensemble(&x, &[7.0; 4], &BoostConfig { stages: 5, min_leaf: 1, ..Default::default() }).unwrap();
        assert_eq!(e.c0, 7.0);
        assert!(e.trees.iter().all(|t| *t == TreeNode::leaf(0.0)));
        assert!(importances(&e).is_empty());
    }

    #[test]
    fn single_exact_correction() {
        let x = matrix(&[&[2], &[2], &[1, 2], &[1, 2]]);
        let y = [0.0, 0.0, 4.0, 4.0];
        let cfg = BoostConfig { stages: 1, shrinkage: 1.0, max_depth: 1, min_leaf: 1, ..Default::default() };
        let e = fit_ensemble(&x, &y, &cfg).unwrap();
        assert_eq!(mse(&e, &x, &y), 0.0);
        assert_eq!(e.predict(&[FeatureId(2)].into()), 0.0);
        assert_eq!(e.predict(&[FeatureId(1)].into()), 4.0);
        assert_eq!(importances(&e), BTreeMap::from([(FeatureId(1), 1.0)]));
    }

    #[test]
    fn hand_built_ensemble() {
        let mut e = BoostedEnsemble::constant(1.0);
        e.gamma = 0.5;
        e.trees.push(TreeNode::split(FeatureId(3), TreeNode::leaf(-2.0), TreeNode::leaf(4.0)));
        e.trees.push(TreeNode::leaf(1.0));
        assert_eq!(e.predict(&[FeatureId(3)].into()), 1.0 + 2.0 + 0.5);
        assert_eq!(e.predict(&BTreeSet::new()), 1.0 - 1.0 + 0.5);
        assert_eq!(BoostedEnsemble::constant(2.5).predict(&[FeatureId(3)].into()), 2.5);
    }

    #[test]
    fn symmetric_features_share_importance() {
        // two independent features with identical effect sizes and coverage
        let mut rows: Vec<&[u64]> = Vec::new();
        let mut y = Vec::new();
        for (r, v) in [(&[][..], 0.0), (&[1][..], 1.0), (&[2][..], 1.0), (&[1, 2][..], 2.0)] {
            for _ in 0..4 {
                rows.push(r);
                y.push(v);
            }
        }
        let x = matrix(&rows);
        let cfg = BoostConfig { stages: 1, shrinkage: 1.0, max_depth: 2, min_leaf: 1, ..Default::default() };
        let imp = importances(&fit_ensemble(&x, &y, &cfg).unwrap());
        assert!((imp[&FeatureId(1)] - 0.5).abs() < 1e-12);
        assert!((imp[&FeatureId(2)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let x = matrix(&[&[1]]);
        assert_eq!(fit_ensemble(&x, &[1.0], &BoostConfig::default()), Err(BoostError::TooFewSamples(1)));
        let x = matrix(&[&[1], &[]]);
        assert!(matches!(
            fit_ensemble(&x, &[1.0, 2.0], &BoostConfig { shrinkage: 0.0, ..Default::default() }),
            Err(BoostError::Config(_))
        ));
        assert_eq!(
            fit_ensemble(&x, &[1.0], &BoostConfig::default()),
            Err(BoostError::LengthMismatch { targets: 1, rows: 2 })
        );
    }

    #[test]
    fn model_json_round_trip() {
        let x = matrix(&[&[1], &[], &[1, 3], &[3]]);
        let e = fit_ensemble(&x, &[1.0, 2.0, 5.0, 0.5], &BoostConfig { stages: 3, min_leaf: 1, ..Default::default() })
            .unwrap();
        assert_eq!(BoostedEnsemble::from_json(&e.to_json()).unwrap(), e);
    }

    #[test]
    fn subsampling_is_seeded() {
        let x = matrix(&[&[1], &[], &[1, 3], &[3], &[1], &[2], &[2, 3], &[]]);
        let y = [1.0, 2.0, 5.0, 0.5, 1.5, 0.0, 3.0, 2.0];
        let cfg =
            BoostConfig { stages: 10, min_leaf: 1, subsample: 0.5, colsample: 0.5, seed: 4, ..Default::default() };
        assert_eq!(fit_ensemble(&x, &y, &cfg).unwrap(), fit_ensemble(&x, &y, &cfg).unwrap());
    }

    fn instance() -> impl Strategy<Value = (Vec<BTreeSet<FeatureId>>, Vec<f64>)> {
        (2usize..40, 1u64..12).prop_flat_map(|(n, f)| {
            (
                proptest::collection::vec(
                    proptest::collection::btree_set((0..f).prop_map(FeatureId), 0..f as usize),
                    n,
                ),
                proptest::collection::vec(-5.0f64..5.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn reconstruction_and_monotone_mse((sets, y) in instance(), gamma in prop_oneof![Just(0.1), Just(1.0)]) {
            let x = FeatureMatrix::from_sets(&sets);
            let cfg = BoostConfig { stages: 8, shrinkage: gamma, min_leaf: 1, ..Default::default() };
            let (e, trace) = fit_ensemble_traced(&x, &y, &cfg).unwrap();
            for w in trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12 * trace[0].max(1e-300));
            }
            prop_assert!((trace.last().unwrap() - mse(&e, &x, &y)).abs() <= 1e-12 * (1.0 + trace[0]));
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            prop_assert!((e.c0 - mean).abs() <= 1e-12 * mean.abs().max(1e-300));
            let imp = importances(&e);
            if !imp.is_empty() {
                prop_assert!((imp.values().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            prop_assert!(imp.values().all(|v| *v >= 0.0));
        }
    }
}
