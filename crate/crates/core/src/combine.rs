//! Boolean macro-features over pairs (optionally triples) of fingerprint bits.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::{FeatureId, FeatureMatrix};
use crate::hypothesis::{effect_strength_with, EffectStats, DEFAULT_D_MIN};

pub const MAX_TRIPLE_K: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Op {
    And,
    Or,
    Xor,
}

impl Op {
    pub const ALL: [Op; 3] = [Op::And, Op::Or, Op::Xor];

    fn name(self) -> &'static str {
        match self {
            Op::And => "AND",
            Op::Or => "OR",
            Op::Xor => "XOR",
        }
    }
}

impl std::str::FromStr for Op {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AND" => Ok(Op::And),
            "OR" => Ok(Op::Or),
            "XOR" => Ok(Op::Xor),
            other => Err(format!("unknown operator `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub feature: FeatureId,
    pub negated: bool,
}

impl Literal {
    pub fn pos(feature: FeatureId) -> Self {
        Self { feature, negated: false }
    }

    pub fn neg(feature: FeatureId) -> Self {
        Self { feature, negated: true }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "NOT {}", self.feature)
        } else {
            write!(f, "{}", self.feature)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("expression needs 2 or 3 literals, got {0}")]
    Arity(usize),
    #[error("feature {0} appears twice")]
    Repeated(FeatureId),
    #[error("cannot parse expression `{0}`")]
    Syntax(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LogicalExpr {
    pub op: Op,
    pub literals: Vec<Literal>,
}

impl LogicalExpr {
    /// Canonical form: literals sorted by feature, and for XOR all negations
    /// folded into the first literal (XOR is invariant under paired negation).
    pub fn new(op: Op, mut literals: Vec<Literal>) -> Result<Self, ExprError> {
        if !(2..=3).contains(&literals.len()) {
            return Err(ExprError::Arity(literals.len()));
        }
        literals.sort();
        if let Some(w) = literals.windows(2).find(|w| w[0].feature == w[1].feature) {
            return Err(ExprError::Repeated(w[0].feature));
        }
        if op == Op::Xor {
            let odd = literals.iter().filter(|l| l.negated).count() % 2 == 1;
            literals.iter_mut().for_each(|l| l.negated = false);
            literals[0].negated = odd;
        }
        Ok(Self { op, literals })
    }

    pub fn features(&self) -> Vec<FeatureId> {
        self.literals.iter().map(|l| l.feature).collect()
    }

    pub fn eval_with(&self, has: impl Fn(FeatureId) -> bool) -> bool {
        let mut bits = self.literals.iter().map(|l| has(l.feature) != l.negated);
        match self.op {
            Op::And => bits.all(|b| b),
            Op::Or => bits.any(|b| b),
            Op::Xor => bits.fold(false, |acc, b| acc ^ b),
        }
    }
}

impl fmt::Display for LogicalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.literals.iter().map(Literal::to_string).collect();
        write!(f, "{}({})", self.op.name(), parts.join(", "))
    }
}

impl std::str::FromStr for LogicalExpr {
    type Err = ExprError;

    /// Parses the canonical text form, e.g. `AND(NOT 0x00000000000000ff, 0x0000000000000a01)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ExprError::Syntax(s.to_string());
        let (op, rest) = s.trim().split_once('(').ok_or_else(bad)?;
        let op: Op = op.parse().map_err(|_| bad())?;
        let body = rest.strip_suffix(')').ok_or_else(bad)?;
        let literals = body
            .split(',')
            .map(|t| {
                let t = t.trim();
                let (negated, id) = match t.strip_prefix("NOT ") {
                    Some(id) => (true, id.trim()),
                    None => (false, t),
                };
                id.parse().map(|feature| Literal { feature, negated }).map_err(|_| bad())
            })
            .collect::<Result<Vec<_>, _>>()?;
        LogicalExpr::new(op, literals)
    }
}

pub fn eval_expr(expr: &LogicalExpr, row: &BTreeSet<FeatureId>) -> bool {
    expr.eval_with(|id| row.contains(&id))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CombineConfig {
    pub k: usize,
    pub ops: Vec<Op>,
    pub gain_min: f64,
    /// `None` means `max(5, ceil(0.5% of n))`.
    pub support_min: Option<usize>,
    pub d_min: f64,
    pub triples: bool,
}

impl Default for CombineConfig {
    fn default() -> Self {
        Self { k: 30, ops: Op::ALL.to_vec(), gain_min: 0.1, support_min: None, d_min: DEFAULT_D_MIN, triples: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroFeature {
    pub rank: usize,
    pub expr: LogicalExpr,
    pub text: String,
    pub stats: EffectStats,
    pub gain: f64,
}

fn abs_d(st: &EffectStats) -> f64 {
    st.d.map_or(0.0, f64::abs)
}

fn negation_patterns(arity: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..1u32 << arity).map(move |m| (0..arity).map(|i| m >> i & 1 == 1).collect())
}

/// Enumerates every canonical expression over the candidate features, in a fixed order.
pub fn enumerate_exprs(features: &[FeatureId], config: &CombineConfig) -> Vec<LogicalExpr> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut tuples: Vec<Vec<FeatureId>> = Vec::new();
    let k = features.len();
    for i in 0..k {
        for j in i + 1..k {
            tuples.push(vec![features[i], features[j]]);
            if config.triples {
                for l in j + 1..k {
                    tuples.push(vec![features[i], features[j], features[l]]);
                }
            }
        }
    }
    for t in &tuples {
        for &op in &config.ops {
            for neg in negation_patterns(t.len()) {
                if op == Op::Xor && neg.iter().any(|&b| b) {
                    continue;
                }
                let lits = t.iter().zip(&neg).map(|(&feature, &negated)| Literal { feature, negated }).collect();
                let Ok(e) = LogicalExpr::new(op, lits) else { continue };
                if seen.insert(e.clone()) {
                    out.push(e);
                }
            }
        }
    }
    out
}

/// Searches Boolean combinations of the top candidates for interaction effects.
///
/// `candidates` should arrive in importance order; the first `k` distinct ids
/// are used (at most 15 when triples are enabled).
pub fn search_macro_features(
    candidates: &[FeatureId],
    x: &FeatureMatrix,
    y: &[f64],
    config: &CombineConfig,
) -> Vec<MacroFeature> {
    let cap = if config.triples { config.k.min(MAX_TRIPLE_K) } else { config.k };
    let mut top: Vec<FeatureId> = Vec::new();
    for &c in candidates {
        if top.len() == cap {
            break;
        }
        if !top.contains(&c) {
            top.push(c);
        }
    }
    if top.len() < 2 {
        return Vec::new();
    }
    let columns: Vec<Vec<bool>> = top.iter().map(|&f| x.column(f)).collect();
    let lit_d: Vec<f64> = columns.iter().map(|c| abs_d(&effect_strength_with(c, y, config.d_min))).collect();
    let index = |f: FeatureId| top.iter().position(|&t| t == f).expect("literal from candidates");
    let support = config.support_min.unwrap_or_else(|| 5.max((y.len() as f64 * 0.005).ceil() as usize));

    let exprs = enumerate_exprs(&top, config);
    let mut found: Vec<MacroFeature> = exprs
        .into_par_iter()
        .filter_map(|expr| {
            let idx: Vec<usize> = expr.literals.iter().map(|l| index(l.feature)).collect();
            let col: Vec<bool> = (0..y.len())
                .map(|i| {
                    let mut bits = expr.literals.iter().zip(&idx).map(|(l, &k)| columns[k][i] != l.negated);
                    match expr.op {
                        Op::And => bits.all(|b| b),
                        Op::Or => bits.any(|b| b),
                        Op::Xor => bits.fold(false, |a, b| a ^ b),
                    }
                })
                .collect();
            let stats = effect_strength_with(&col, y, config.d_min);
            if stats.no_contrast || stats.n1 < support || stats.n0 < support {
                return None;
            }
            let base = idx.iter().map(|&k| lit_d[k]).fold(0.0, f64::max);
            let d = abs_d(&stats);
            let gain = if d.is_infinite() && base.is_infinite() { 0.0 } else { d - base };
            (gain >= config.gain_min).then(|| MacroFeature { rank: 0, text: expr.to_string(), expr, stats, gain })
        })
        .collect();
    found.sort_by(|a, b| {
        b.gain
            .total_cmp(&a.gain)
            .then_with(|| abs_d(&b.stats).total_cmp(&abs_d(&a.stats)))
            .then_with(|| a.text.cmp(&b.text))
    });
    for (i, m) in found.iter_mut().enumerate() {
        m.rank = i + 1;
    }
    found
}
