#![allow(dead_code)]

use hypograph::fingerprint::{AliasMap, FeatureId};
use hypograph::graph::{EdgeLabel, EnvironmentDescriptor, NodeLabel};
use hypograph::ingest::parse_molecule;
use hypograph::synth::{PlantedRule, RuleKind, SynthSpec};

/// `root` joined to each leaf by an edge of `kind`, radius 1.
pub fn star(root: &str, leaves: &[&str], kind: &str) -> EnvironmentDescriptor {
    let mut nodes = vec![NodeLabel::new(root)];
    let mut edges = Vec::new();
    for (i, l) in leaves.iter().enumerate() {
        nodes.push(NodeLabel::new(*l));
        edges.push((0, i + 1, EdgeLabel::new(kind)));
    }
    EnvironmentDescriptor { nodes, edges, radius: 1, root: 0 }
}

pub fn host_spec(n: usize, rules: Vec<PlantedRule>, seed: u64) -> SynthSpec {
    SynthSpec {
        n,
        min_nodes: 8,
        max_nodes: 20,
        node_alphabet: ["A", "B", "C", "D"].iter().map(|k| NodeLabel::new(*k)).collect(),
        edge_alphabet: vec![EdgeLabel::new("s")],
        edge_density: 0.2,
        rules,
        noise: 0.25,
        baseline: 1.0,
        seed,
    }
}

pub const EFFECTS: [f64; 5] = [2.0, 1.0, 0.5, -1.0, -2.0];

/// Five additive star motifs on double-kind edges, each in 30 to 50% of graphs.
pub fn five_motif_spec(n: usize, seed: u64) -> SynthSpec {
    let motifs = [
        star("A", &["B", "C"], "d"),
        star("B", &["C", "D"], "d"),
        star("C", &["D", "A"], "d"),
        star("D", &["A", "B"], "d"),
        star("A", &["D", "D"], "d"),
    ];
    let fractions = [0.3, 0.35, 0.4, 0.45, 0.5];
    let rules = motifs
        .into_iter()
        .zip(EFFECTS)
        .zip(fractions)
        .enumerate()
        .map(|(i, ((m, effect), fraction))| PlantedRule {
            name: format!("motif{i}"),
            kind: RuleKind::Additive,
            motifs: vec![m],
            effect,
            fraction,
        })
        .collect();
    host_spec(n, rules, seed)
}

pub fn pair_spec(kind: RuleKind, effect: f64, n: usize, seed: u64) -> SynthSpec {
    let rule = PlantedRule {
        name: "pair".into(),
        kind,
        motifs: vec![star("A", &["B", "C"], "d"), star("B", &["C", "D"], "d")],
        effect,
        fraction: 0.5,
    };
    host_spec(n, vec![rule], seed)
}

/// The id that stands for `f` after alias collapse.
pub fn representative(aliases: &AliasMap, f: FeatureId) -> FeatureId {
    aliases.iter().find(|(_, v)| v.contains(&f)).map_or(f, |(k, _)| *k)
}

pub type Counts = (usize, usize, usize, usize, usize, usize, usize, usize);

/// Counts in the order used by [`VALID_MOLECULES`].
pub fn molecule_counts(s: &str) -> Counts {
    let g = parse_molecule(s).unwrap_or_else(|e| panic!("{s}: {e}"));
    let nodes = g.nodes();
    let edges = g.edges();
    let kind = |k: &str| edges.iter().filter(|e| e.label.kind == k).count();
    (
        g.node_count(),
        g.edge_count(),
        nodes.iter().filter(|n| n.attr("aromatic") == Some("true")).count(),
        nodes.iter().filter(|n| n.attr("charge") != Some("0")).count(),
        nodes.iter().filter(|n| !matches!(n.attr("hcount"), Some("default") | Some("0"))).count(),
        kind("double"),
        kind("triple"),
        kind("aromatic"),
    )
}

/// Valid molecule strings with expected counts:
/// (text, atoms, bonds, aromatic atoms, charged atoms, bracket-H atoms, double, triple, aromatic bonds).
#[allow(clippy::type_complexity)]
pub const VALID_MOLECULES: &[(&str, usize, usize, usize, usize, usize, usize, usize, usize)] = &[
    ("C", 1, 0, 0, 0, 0, 0, 0, 0),
    ("CC", 2, 1, 0, 0, 0, 0, 0, 0),
    ("CCO", 3, 2, 0, 0, 0, 0, 0, 0),
    ("C=O", 2, 1, 0, 0, 0, 1, 0, 0),
    ("C#N", 2, 1, 0, 0, 0, 0, 1, 0),
    ("CC(=O)O", 4, 3, 0, 0, 0, 1, 0, 0),
    ("CC(C)(C)C", 5, 4, 0, 0, 0, 0, 0, 0),
    ("C1CCCCC1", 6, 6, 0, 0, 0, 0, 0, 0),
    ("c1ccccc1", 6, 6, 6, 0, 0, 0, 0, 6),
    ("c1ccncc1", 6, 6, 6, 0, 0, 0, 0, 6),
    ("Cc1ccccc1", 7, 7, 6, 0, 0, 0, 0, 6),
    ("Oc1ccccc1", 7, 7, 6, 0, 0, 0, 0, 6),
    ("[NH4+]", 1, 0, 0, 1, 1, 0, 0, 0),
    ("[O-]C=O", 3, 2, 0, 1, 0, 1, 0, 0),
    ("CC(=O)[O-]", 4, 3, 0, 1, 0, 1, 0, 0),
    ("[Na+].[Cl-]", 2, 0, 0, 2, 0, 0, 0, 0),
    ("C1CC1", 3, 3, 0, 0, 0, 0, 0, 0),
    ("C1CCC1", 4, 4, 0, 0, 0, 0, 0, 0),
    ("C1=CC=CC=C1", 6, 6, 0, 0, 0, 3, 0, 0),
    ("c1ccc2ccccc2c1", 10, 11, 10, 0, 0, 0, 0, 11),
    ("CCN(CC)CC", 7, 6, 0, 0, 0, 0, 0, 0),
    ("OC(=O)C(N)C", 6, 5, 0, 0, 0, 1, 0, 0),
    ("C(C(C(C)))C", 5, 4, 0, 0, 0, 0, 0, 0),
    ("CC#CC", 4, 3, 0, 0, 0, 0, 1, 0),
    ("C=C=C", 3, 2, 0, 0, 0, 2, 0, 0),
    ("[H][H]", 2, 1, 0, 0, 0, 0, 0, 0),
    ("[Fe+2]", 1, 0, 0, 1, 0, 0, 0, 0),
    ("[Fe++]", 1, 0, 0, 1, 0, 0, 0, 0),
    ("[nH]1cccc1", 5, 5, 5, 0, 1, 0, 0, 5),
    ("c1ccoc1", 5, 5, 5, 0, 0, 0, 0, 5),
    ("c1ccsc1", 5, 5, 5, 0, 0, 0, 0, 5),
    ("O=C1CCCCC1", 7, 7, 0, 0, 0, 1, 0, 0),
    ("C1CC2CCC1C2", 7, 8, 0, 0, 0, 0, 0, 0),
    ("CC(C)C(=O)O", 6, 5, 0, 0, 0, 1, 0, 0),
    ("N#CC#N", 4, 3, 0, 0, 0, 0, 2, 0),
    ("O=C=O", 3, 2, 0, 0, 0, 2, 0, 0),
    ("[O-][N+](=O)C", 4, 3, 0, 2, 0, 1, 0, 0),
    ("C[N+](C)(C)C", 5, 4, 0, 1, 0, 0, 0, 0),
    ("c1ccc(cc1)O", 7, 7, 6, 0, 0, 0, 0, 6),
    ("c1ccc(cc1)-c2ccccc2", 12, 13, 12, 0, 0, 0, 0, 12),
    ("C%10CCCCC%10", 6, 6, 0, 0, 0, 0, 0, 0),
    ("CCCCCCCCCC", 10, 9, 0, 0, 0, 0, 0, 0),
    ("ClCCl", 3, 2, 0, 0, 0, 0, 0, 0),
    ("BrC(Br)Br", 4, 3, 0, 0, 0, 0, 0, 0),
    ("FC(F)(F)F", 5, 4, 0, 0, 0, 0, 0, 0),
    ("C1CC1C1CC1", 6, 7, 0, 0, 0, 0, 0, 0),
    ("CC(=O)Nc1ccc(O)cc1", 11, 11, 6, 0, 0, 1, 0, 6),
    ("S(=O)(=O)(O)O", 5, 4, 0, 0, 0, 2, 0, 0),
    ("C1=CC=C1", 4, 4, 0, 0, 0, 2, 0, 0),
    ("[Cu+2].[O-2]", 2, 0, 0, 2, 0, 0, 0, 0),
];

/// Malformed strings with the 1-based column the error must point at.
pub const MALFORMED_MOLECULES: &[(&str, usize)] = &[
    ("CC(C", 3),
    ("CC)C", 3),
    ("C1CC", 2),
    ("CXC", 2),
    ("C[13C]", 3),
    ("C[C@H]", 4),
    ("C=", 2),
    ("=C", 1),
    ("C11", 3),
    ("C[Xx]", 3),
    ("C[CH4", 2),
    ("C()C", 3),
    ("C/C=C/C", 2),
    ("C*C", 2),
    ("C(=)C", 4),
    ("C.", 2),
    ("CC%1", 3),
    ("(C)C", 1),
    ("c1ccccc1)", 9),
    ("C[C+]]", 6),
];
