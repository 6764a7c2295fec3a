//! Cross-module invariants on random inputs.

use std::collections::BTreeSet;

use hypograph::combine::{Literal, LogicalExpr, Op};
use hypograph::fingerprint::{featurize, featurize_dataset, FeatureId, FeatureMatrix, SubgraphRegistry};
use hypograph::graph::{contains_environment, EdgeLabel, EnvPattern, LabeledGraph, MutationSpec, NodeLabel};
use hypograph::hypothesis::{conditional_histogram, effect_strength, Direction};
use hypograph::ingest::{graph_to_json, parse_graph_jsonl, Dataset, Sample};
use hypograph::verify::{matched_pairs, mutation_test, FnOracle, MatchConfig, MatchScope, MutationConfig};
use proptest::prelude::*;

fn graph() -> impl Strategy<Value = LabeledGraph> {
    (1..12usize).prop_flat_map(|n| {
        (
            prop::collection::vec(0..3usize, n),
            prop::collection::vec((any::<prop::sample::Index>(), 0..2usize), n.saturating_sub(1)),
            prop::collection::vec((0..n, 0..n, 0..2usize), 0..n),
        )
            .prop_map(move |(labels, tree, extra)| {
                let nodes = labels.iter().map(|&l| NodeLabel::new(["C", "N", "O"][l])).collect();
                let kinds = ["single", "double"];
                let mut edges = Vec::new();
                let mut seen = BTreeSet::new();
                for (v, (parent, k)) in tree.iter().enumerate() {
                    let u = parent.index(v + 1);
                    seen.insert((u, v + 1));
                    edges.push((u, v + 1, EdgeLabel::new(kinds[*k])));
                }
                for (a, b, k) in extra {
                    let (u, v) = (a.min(b), a.max(b));
                    if u != v && seen.insert((u, v)) {
                        edges.push((u, v, EdgeLabel::new(kinds[k])));
                    }
                }
                LabeledGraph::new("g", nodes, edges).unwrap()
            })
    })
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<usize>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fingerprint_is_permutation_invariant((g, perm) in graph().prop_flat_map(|g| { let n = g.node_count(); (Just(g), permutation(n)) })) {
        let a = featurize(&g, 3).unwrap().ids;
        let b = featurize(&g.permuted(&perm), 3).unwrap().ids;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn radius_is_monotone(g in graph()) {
        let mut prev = BTreeSet::new();
        for r in 0..=4 {
            let ids = featurize(&g, r).unwrap().ids;
            prop_assert!(prev.is_subset(&ids));
            prev = ids;
        }
    }

    #[test]
    fn registry_is_faithful(g in graph()) {
        let fp = featurize(&g, 3).unwrap();
        prop_assert_eq!(fp.registry.len(), fp.ids.len());
        for id in &fp.ids {
            prop_assert!(contains_environment(&g, fp.registry.get(*id).unwrap()));
        }
    }

    #[test]
    fn registry_json_round_trips(g in graph()) {
        let fp = featurize(&g, 2).unwrap();
        let back = SubgraphRegistry::from_json(&fp.registry.to_json()).unwrap();
        prop_assert_eq!(back, fp.registry);
    }

    #[test]
    fn graph_json_round_trips(g in graph(), y in -1e6f64..1e6) {
        let (back, got) = parse_graph_jsonl(&graph_to_json(&g, Some(y))).unwrap();
        prop_assert_eq!(back, g);
        prop_assert_eq!(got, Some(y));
    }

    #[test]
    fn histogram_partitions_samples(col in prop::collection::vec(any::<bool>(), 1..60), seed in any::<u64>(), bins in 2..50usize) {
        let y: Vec<f64> = (0..col.len()).map(|i| ((i as u64).wrapping_mul(seed | 1) % 97) as f64 / 7.0).collect();
        let h = conditional_histogram(&col, &y, bins).unwrap();
        let n1 = col.iter().filter(|c| **c).count();
        prop_assert_eq!(h.true_counts.iter().sum::<usize>(), n1);
        prop_assert_eq!(h.false_counts.iter().sum::<usize>(), col.len() - n1);
        prop_assert!(h.edges.windows(2).all(|w| w[0] <= w[1]));
        let st = effect_strength(&col, &y);
        if let (Some(s), Direction::Increase) = (st.s, st.direction) { prop_assert!(s > 0.0); }
        if let (Some(s), Direction::Decrease) = (st.s, st.direction) { prop_assert!(s < 0.0); }
    }

    #[test]
    fn expressions_print_and_parse(ids in prop::collection::btree_set(0u64..1000, 2..4), neg in prop::collection::vec(any::<bool>(), 3), op in 0..3usize) {
        let op = Op::ALL[op];
        let lits: Vec<Literal> = ids.iter().zip(&neg).map(|(&f, &n)| Literal { feature: FeatureId(f), negated: n }).collect();
        let e = LogicalExpr::new(op, lits.clone()).unwrap();
        let back: LogicalExpr = e.to_string().parse().unwrap();
        prop_assert_eq!(&back, &e);
        for mask in 0..(1u32 << ids.len()) {
            let present: BTreeSet<FeatureId> = ids.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &f)| FeatureId(f)).collect();
            let bits = lits.iter().map(|l| present.contains(&l.feature) != l.negated);
            let want = match op {
                Op::And => bits.clone().all(|b| b),
                Op::Or => bits.clone().any(|b| b),
                Op::Xor => bits.fold(false, |a, b| a ^ b),
            };
            prop_assert_eq!(e.eval_with(|f| present.contains(&f)), want);
        }
    }

    #[test]
    fn matched_pairs_are_well_formed(rows in prop::collection::vec(prop::collection::btree_set(0u64..6, 0..6), 2..40), tau in 0..3usize) {
        let sets: Vec<BTreeSet<FeatureId>> = rows.iter().map(|r| r.iter().map(|&k| FeatureId(k)).collect()).collect();
        let x = FeatureMatrix::from_sets(&sets);
        let samples = (0..sets.len()).map(|i| Sample { graph: LabeledGraph::empty(format!("s{i}")), y: i as f64 }).collect();
        let ds = Dataset::new("p", samples).unwrap();
        let r = matched_pairs(&ds, &x, FeatureId(0), &MatchScope::All, Direction::Increase, &MatchConfig { tau, min_pairs: 1 }).unwrap();
        let mut used = BTreeSet::new();
        for p in &r.pairs {
            let i: usize = p.with[1..].parse().unwrap();
            let j: usize = p.without[1..].parse().unwrap();
            prop_assert!(sets[i].contains(&FeatureId(0)) && !sets[j].contains(&FeatureId(0)));
            let d = sets[i].symmetric_difference(&sets[j]).filter(|f| **f != FeatureId(0)).count();
            prop_assert_eq!(Some(d), p.distance);
            prop_assert!(d <= tau);
            prop_assert!(used.insert(i) && used.insert(j));
        }
    }
}

#[test]
fn mutation_pairs_flip_target_and_keep_guards() {
    let graphs = ["C=O", "CC=O", "CCO", "OCC=O", "CC(C)O", "C=C", "CN", "NC=O", "CC", "OC=O"];
    let samples = graphs
        .iter()
        .enumerate()
        .map(|(i, s)| Sample { graph: hypograph::ingest::parse_molecule(s).unwrap().with_id(format!("m{i}")), y: 0.0 })
        .collect();
    let ds = Dataset::new("m", samples).unwrap();
    let (x, reg) = featurize_dataset(&ds, 1).unwrap();
    let (nodes, edges) = ds.alphabets();
    let spec = MutationSpec::uniform(nodes, edges);
    let ids: Vec<FeatureId> = x.vocab().to_vec();
    let target = ids[0];
    let guards = &ids[1..4];
    let oracle = FnOracle(|g: &LabeledGraph| g.edge_count() as f64);
    let r =
        mutation_test(&ds, &reg, target, &[], guards, Direction::Increase, &oracle, &spec, &MutationConfig::default())
            .unwrap();
    assert!(r.pair_count > 0);
    let pattern = EnvPattern::new(reg.get(target).unwrap());
    let guard_patterns: Vec<EnvPattern> = guards.iter().map(|g| EnvPattern::new(reg.get(*g).unwrap())).collect();
    for p in &r.pairs {
        let original = ds.samples.iter().find(|s| s.graph.id() == p.with || s.graph.id() == p.without).unwrap();
        let edit = p.edit.as_ref().unwrap();
        assert!(p.attempts.unwrap() >= 1);
        // replay the recorded edit on the original and check the bit pattern
        let mutated = replay(&original.graph, edit);
        assert_ne!(pattern.matches(&original.graph), pattern.matches(&mutated));
        for gp in &guard_patterns {
            assert_eq!(gp.matches(&original.graph), gp.matches(&mutated));
        }
    }
}

fn replay(g: &LabeledGraph, edit: &hypograph::graph::Edit) -> LabeledGraph {
    use hypograph::graph::Edit;
    let mut nodes = g.nodes().to_vec();
    let mut edges: Vec<(usize, usize, EdgeLabel)> = g.edge_triples();
    match edit {
        Edit::NodeRelabel { node, label } => nodes[*node] = label.clone(),
        Edit::EdgeRelabel { u, v, label } => {
            for e in &mut edges {
                if (e.0, e.1) == (*u.min(v), *u.max(v)) {
                    e.2 = label.clone();
                }
            }
        }
        Edit::EdgeAdd { u, v, label } => edges.push((*u, *v, label.clone())),
        Edit::EdgeDelete { u, v } => edges.retain(|e| (e.0, e.1) != (*u.min(v), *u.max(v))),
        Edit::LeafAdd { anchor, label, edge } => {
            nodes.push(label.clone());
            edges.push((*anchor, nodes.len() - 1, edge.clone()));
        }
        Edit::LeafDelete { node } => {
            nodes.remove(*node);
            edges.retain(|e| e.0 != *node && e.1 != *node);
            for e in &mut edges {
                if e.0 > *node {
                    e.0 -= 1;
                }
                if e.1 > *node {
                    e.1 -= 1;
                }
            }
        }
    }
    LabeledGraph::new("r", nodes, edges).unwrap()
}
