//! Molecular line-notation reader for a SMILES subset, and a debug writer.
//!
//! Supported: organic-subset atoms, aromatic lowercase atoms, bracket atoms
//! with explicit hydrogen count and charge, bonds `- = # :`, branches, ring
//! closures `1`-`9` and `%nn`, and `.` component separators. Stereo,
//! isotopes, wildcards and atom classes are rejected with a located error.
//!
//! Atoms become nodes with `kind` = element symbol and attributes
//! `aromatic`, `charge` and `hcount` (`"default"` for unbracketed atoms).
//! Implicit hydrogens are never materialized.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::{EdgeLabel, LabeledGraph, NodeLabel};

#[rustfmt::skip]
const ELEMENTS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar",
    "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br",
    "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te",
    "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm",
    "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn",
    "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr",
    "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
];

const ORGANIC: [&str; 10] = ["B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"];
const AROMATIC_ORGANIC: [&str; 6] = ["B", "C", "N", "O", "P", "S"];
const AROMATIC_BRACKET: [&str; 8] = ["B", "C", "N", "O", "P", "S", "Se", "As"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("column {column}: {kind}")]
pub struct SmilesError {
    /// 1-based character column.
    pub column: usize,
    pub kind: SmilesErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesErrorKind {
    #[error("empty input")]
    Empty,
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(char),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("unbalanced parenthesis")]
    UnbalancedParen,
    #[error("empty branch")]
    EmptyBranch,
    #[error("ring bond {0} is never closed")]
    UnclosedRing(u32),
    #[error("ring bond or bond without a preceding atom")]
    NoPrecedingAtom,
    #[error("bond is not followed by an atom")]
    DanglingBond,
    #[error("ring bond orders conflict")]
    RingBondConflict,
    #[error("ring bond closes onto its own atom")]
    RingSelfLoop,
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("`.` is not followed by an atom")]
    EmptyComponent,
    #[error("unclosed bracket atom")]
    UnclosedBracket,
    #[error("malformed ring number")]
    BadRingNumber,
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bond {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl Bond {
    fn kind(self) -> &'static str {
        match self {
            Bond::Single => "single",
            Bond::Double => "double",
            Bond::Triple => "triple",
            Bond::Aromatic => "aromatic",
        }
    }

    fn from_kind(kind: &str) -> Option<Self> {
        Some(match kind {
            "single" => Bond::Single,
            "double" => Bond::Double,
            "triple" => Bond::Triple,
            "aromatic" => Bond::Aromatic,
            _ => return None,
        })
    }

    fn from_char(c: char) -> Option<Self> {
        Some(match c {
            '-' => Bond::Single,
            '=' => Bond::Double,
            '#' => Bond::Triple,
            ':' => Bond::Aromatic,
            _ => return None,
        })
    }

    fn symbol(self) -> char {
        match self {
            Bond::Single => '-',
            Bond::Double => '=',
            Bond::Triple => '#',
            Bond::Aromatic => ':',
        }
    }

    fn implicit(a_aromatic: bool, b_aromatic: bool) -> Self {
        if a_aromatic && b_aromatic {
            Bond::Aromatic
        } else {
            Bond::Single
        }
    }
}

struct Atom {
    element: String,
    aromatic: bool,
    charge: i32,
    hcount: Option<u32>,
}

impl Atom {
    fn organic(element: &str, aromatic: bool) -> Self {
        Self { element: element.to_string(), aromatic, charge: 0, hcount: None }
    }

    fn label(&self) -> NodeLabel {
        NodeLabel::new(self.element.clone())
            .with_attr("aromatic", if self.aromatic { "true" } else { "false" })
            .with_attr("charge", format_charge(self.charge))
            .with_attr("hcount", self.hcount.map_or_else(|| "default".to_string(), |h| h.to_string()))
    }
}

fn format_charge(c: i32) -> String {
    if c > 0 {
        format!("+{c}")
    } else {
        c.to_string()
    }
}

struct Parser {
    chars: Vec<char>,
    i: usize,
    atoms: Vec<(Atom, NodeLabel)>,
    bonds: Vec<(usize, usize, Bond)>,
    prev: Option<usize>,
    pending: Option<(Bond, usize)>,
    branches: Vec<(Option<usize>, usize, usize)>,
    rings: BTreeMap<u32, (usize, Option<Bond>, usize)>,
}

fn err<T>(column: usize, kind: SmilesErrorKind) -> Result<T, SmilesError> {
    Err(SmilesError { column, kind })
}

/// Parses a molecule in the supported line-notation subset.
pub fn parse_molecule(s: &str) -> Result<LabeledGraph, SmilesError> {
    if s.is_empty() {
        return err(1, SmilesErrorKind::Empty);
    }
    let mut p = Parser {
        chars: s.chars().collect(),
        i: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        prev: None,
        pending: None,
        branches: Vec::new(),
        rings: BTreeMap::new(),
    };
    p.run()?;
    let nodes = p.atoms.into_iter().map(|(_, l)| l).collect();
    let edges = p.bonds.into_iter().map(|(a, b, bond)| (a, b, EdgeLabel::new(bond.kind()))).collect();
    Ok(LabeledGraph::new(s, nodes, edges).expect("parser enforces graph invariants"))
}

impl Parser {
    fn col(&self) -> usize {
        self.i + 1
    }

    fn peek(&self, off: usize) -> Option<char> {
        self.chars.get(self.i + off).copied()
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        while let Some(c) = self.peek(0) {
            let col = self.col();
            match c {
                '(' => {
                    if self.prev.is_none() {
                        return err(col, SmilesErrorKind::NoPrecedingAtom);
                    }
                    if self.pending.is_some() {
                        return err(col, SmilesErrorKind::DanglingBond);
                    }
                    self.branches.push((self.prev, col, self.atoms.len()));
                    self.i += 1;
                }
                ')' => {
                    let Some((prev, _, atoms_at_open)) = self.branches.pop() else {
                        return err(col, SmilesErrorKind::UnbalancedParen);
                    };
                    if self.pending.is_some() {
                        return err(col, SmilesErrorKind::DanglingBond);
                    }
                    if self.atoms.len() == atoms_at_open {
                        return err(col, SmilesErrorKind::EmptyBranch);
                    }
                    self.prev = prev;
                    self.i += 1;
                }
                '-' | '=' | '#' | ':' => {
                    if self.prev.is_none() {
                        return err(col, SmilesErrorKind::NoPrecedingAtom);
                    }
                    if self.pending.is_some() {
                        return err(col, SmilesErrorKind::DanglingBond);
                    }
                    self.pending = Bond::from_char(c).map(|b| (b, col));
                    self.i += 1;
                }
                '.' => {
                    if self.pending.is_some() {
                        return err(col, SmilesErrorKind::DanglingBond);
                    }
                    if self.prev.is_none() {
                        return err(col, SmilesErrorKind::NoPrecedingAtom);
                    }
                    if matches!(self.peek(1), None | Some('.')) {
                        return err(col, SmilesErrorKind::EmptyComponent);
                    }
                    self.prev = None;
                    self.i += 1;
                }
                '%' => {
                    let (Some(a), Some(b)) = (self.peek(1), self.peek(2)) else {
                        return err(col, SmilesErrorKind::BadRingNumber);
                    };
                    let (Some(a), Some(b)) = (a.to_digit(10), b.to_digit(10)) else {
                        return err(col, SmilesErrorKind::BadRingNumber);
                    };
                    self.i += 3;
                    self.ring(a * 10 + b, col)?;
                }
                '0'..='9' => {
                    self.i += 1;
                    self.ring(c.to_digit(10).unwrap_or(0), col)?;
                }
                '[' => {
                    let atom = self.bracket()?;
                    self.add_atom(atom, col)?;
                }
                '/' | '\\' => return err(col, SmilesErrorKind::Unsupported("directional bonds")),
                '@' => return err(col, SmilesErrorKind::Unsupported("stereo")),
                '*' => return err(col, SmilesErrorKind::Unsupported("wildcard atoms")),
                _ => {
                    let atom = self.organic(c, col)?;
                    self.add_atom(atom, col)?;
                }
            }
        }
        if let Some((_, col)) = self.pending {
            return err(col, SmilesErrorKind::DanglingBond);
        }
        if let Some(&(_, col, _)) = self.branches.last() {
            return err(col, SmilesErrorKind::UnbalancedParen);
        }
        if let Some((&num, &(_, _, col))) = self.rings.iter().min_by_key(|(_, v)| v.2) {
            return err(col, SmilesErrorKind::UnclosedRing(num));
        }
        Ok(())
    }

    fn organic(&mut self, c: char, col: usize) -> Result<Atom, SmilesError> {
        let atom = match c {
            'B' if self.peek(1) == Some('r') => {
                self.i += 1;
                Atom::organic("Br", false)
            }
            'C' if self.peek(1) == Some('l') => {
                self.i += 1;
                Atom::organic("Cl", false)
            }
            'B' | 'C' | 'N' | 'O' | 'P' | 'S' | 'F' | 'I' => Atom::organic(&c.to_string(), false),
            'b' | 'c' | 'n' | 'o' | 'p' | 's' => Atom::organic(&c.to_ascii_uppercase().to_string(), true),
            _ => return err(col, SmilesErrorKind::UnknownSymbol(c)),
        };
        self.i += 1;
        Ok(atom)
    }

    fn bracket(&mut self) -> Result<Atom, SmilesError> {
        let open = self.col();
        self.i += 1;
        let unclosed = || SmilesError { column: open, kind: SmilesErrorKind::UnclosedBracket };
        let c = self.peek(0).ok_or_else(unclosed)?;
        let col = self.col();
        if c.is_ascii_digit() {
            return err(col, SmilesErrorKind::Unsupported("isotopes"));
        }
        let (element, aromatic) = if c.is_ascii_uppercase() {
            let two = self.peek(1).filter(char::is_ascii_lowercase).map(|l| format!("{c}{l}"));
            match two {
                Some(sym) if ELEMENTS.contains(&sym.as_str()) => {
                    self.i += 2;
                    (sym, false)
                }
                _ => {
                    let sym = c.to_string();
                    if !ELEMENTS.contains(&sym.as_str()) {
                        return err(col, SmilesErrorKind::UnknownElement(sym));
                    }
                    self.i += 1;
                    (sym, false)
                }
            }
        } else if c.is_ascii_lowercase() {
            let two = self.peek(1).map(|l| format!("{}{l}", c.to_ascii_uppercase()));
            match two {
                Some(sym) if (sym == "Se" || sym == "As") => {
                    self.i += 2;
                    (sym, true)
                }
                _ => {
                    let sym = c.to_ascii_uppercase().to_string();
                    if !AROMATIC_BRACKET.contains(&sym.as_str()) {
                        return err(col, SmilesErrorKind::UnknownElement(c.to_string()));
                    }
                    self.i += 1;
                    (sym, true)
                }
            }
        } else if c == '*' {
            return err(col, SmilesErrorKind::Unsupported("wildcard atoms"));
        } else {
            return err(col, SmilesErrorKind::UnknownSymbol(c));
        };
        if self.peek(0) == Some('@') {
            return err(self.col(), SmilesErrorKind::Unsupported("stereo"));
        }
        let mut hcount = 0;
        if self.peek(0) == Some('H') {
            self.i += 1;
            hcount = self.digits().unwrap_or(1);
        }
        let mut charge = 0i32;
        if let Some(sign @ ('+' | '-')) = self.peek(0) {
            let unit = if sign == '+' { 1 } else { -1 };
            self.i += 1;
            if let Some(mag) = self.digits() {
                charge = unit * mag as i32;
            } else {
                charge = unit;
                while self.peek(0) == Some(sign) {
                    charge += unit;
                    self.i += 1;
                }
            }
        }
        match self.peek(0) {
            Some(']') => self.i += 1,
            Some(':') => return err(self.col(), SmilesErrorKind::Unsupported("atom classes")),
            Some('@') => return err(self.col(), SmilesErrorKind::Unsupported("stereo")),
            Some(other) => return err(self.col(), SmilesErrorKind::UnknownSymbol(other)),
            None => return Err(unclosed()),
        }
        Ok(Atom { element, aromatic, charge, hcount: Some(hcount) })
    }

    fn digits(&mut self) -> Option<u32> {
        let start = self.i;
        let mut v = 0u32;
        while let Some(d) = self.peek(0).and_then(|c| c.to_digit(10)) {
            v = v.saturating_mul(10).saturating_add(d);
            self.i += 1;
        }
        (self.i > start).then_some(v)
    }

    fn add_atom(&mut self, atom: Atom, col: usize) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        let aromatic = atom.aromatic;
        let label = atom.label();
        self.atoms.push((atom, label));
        if let Some(p) = self.prev {
            let bond = match self.pending.take() {
                Some((b, _)) => b,
                None => Bond::implicit(self.atoms[p].0.aromatic, aromatic),
            };
            self.add_bond(p, idx, bond, col)?;
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn add_bond(&mut self, a: usize, b: usize, bond: Bond, col: usize) -> Result<(), SmilesError> {
        let (a, b) = (a.min(b), a.max(b));
        if self.bonds.iter().any(|&(x, y, _)| (x, y) == (a, b)) {
            return err(col, SmilesErrorKind::DuplicateBond(a, b));
        }
        self.bonds.push((a, b, bond));
        Ok(())
    }

    fn ring(&mut self, num: u32, col: usize) -> Result<(), SmilesError> {
        let Some(cur) = self.prev else {
            return err(col, SmilesErrorKind::NoPrecedingAtom);
        };
        let pending = self.pending.take().map(|(b, _)| b);
        match self.rings.remove(&num) {
            None => {
                self.rings.insert(num, (cur, pending, col));
                Ok(())
            }
            Some((other, open_bond, _)) => {
                if other == cur {
                    return err(col, SmilesErrorKind::RingSelfLoop);
                }
                let bond = match (open_bond, pending) {
                    (Some(x), Some(y)) if x != y => return err(col, SmilesErrorKind::RingBondConflict),
                    (Some(x), _) | (None, Some(x)) => x,
                    (None, None) => Bond::implicit(self.atoms[other].0.aromatic, self.atoms[cur].0.aromatic),
                };
                self.add_bond(other, cur, bond, col)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WriteError {
    #[error("edge kind `{0}` is not a bond kind")]
    UnknownBond(String),
    #[error("node {node}: attribute `{key}` has unusable value `{value}`")]
    BadAttr { node: usize, key: &'static str, value: String },
}

struct WriteAtom {
    element: String,
    aromatic: bool,
    charge: i32,
    hcount: Option<u32>,
}

fn read_atom(g: &LabeledGraph, v: usize) -> Result<WriteAtom, WriteError> {
    let label = g.node(v);
    let aromatic = label.attr("aromatic") == Some("true");
    let charge = match label.attr("charge") {
        None => 0,
        Some(c) => c.trim_start_matches('+').parse().map_err(|_| WriteError::BadAttr {
            node: v,
            key: "charge",
            value: c.to_string(),
        })?,
    };
    let hcount = match label.attr("hcount") {
        None | Some("default") => None,
        Some(h) => Some(h.parse().map_err(|_| WriteError::BadAttr { node: v, key: "hcount", value: h.to_string() })?),
    };
    let element = label.kind.clone();
    if aromatic && !AROMATIC_BRACKET.contains(&element.as_str()) {
        return Err(WriteError::BadAttr { node: v, key: "aromatic", value: element });
    }
    Ok(WriteAtom { element, aromatic, charge, hcount })
}

fn atom_text(a: &WriteAtom) -> String {
    let symbol = if a.aromatic { a.element.to_ascii_lowercase() } else { a.element.clone() };
    let organic =
        if a.aromatic { AROMATIC_ORGANIC.contains(&a.element.as_str()) } else { ORGANIC.contains(&a.element.as_str()) };
    if organic && a.charge == 0 && a.hcount.is_none() {
        return symbol;
    }
    let mut s = format!("[{symbol}");
    match a.hcount {
        None | Some(0) => {}
        Some(1) => s.push('H'),
        Some(h) => s.push_str(&format!("H{h}")),
    }
    match a.charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c => s.push_str(&format_charge(c)),
    }
    s.push(']');
    s
}

enum RingMark {
    Open(usize),
    Close(usize),
}

/// Writes a graph that follows the molecule attribute conventions back to
/// line notation. Output re-parses to an isomorphic graph.
pub fn write_molecule(g: &LabeledGraph) -> Result<String, WriteError> {
    let n = g.node_count();
    let atoms = (0..n).map(|v| read_atom(g, v)).collect::<Result<Vec<_>, _>>()?;
    let bonds = g
        .edges()
        .iter()
        .map(|e| Bond::from_kind(&e.label.kind).ok_or_else(|| WriteError::UnknownBond(e.label.kind.clone())))
        .collect::<Result<Vec<_>, _>>()?;

    let mut visited = vec![false; n];
    let mut edge_seen = vec![false; g.edge_count()];
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut marks: Vec<Vec<RingMark>> = (0..n).map(|_| Vec::new()).collect();
    let mut roots = Vec::new();
    for start in 0..n {
        if visited[start] {
            continue;
        }
        roots.push(start);
        plan(g, start, &mut visited, &mut edge_seen, &mut children, &mut marks);
    }

    let mut w = Writer {
        g,
        atoms: &atoms,
        bonds: &bonds,
        children: &children,
        marks: &marks,
        digits: BTreeMap::new(),
        out: String::new(),
    };
    for (i, &root) in roots.iter().enumerate() {
        if i > 0 {
            w.out.push('.');
        }
        w.emit(root);
    }
    Ok(w.out)
}

fn plan(
    g: &LabeledGraph,
    v: usize,
    visited: &mut [bool],
    edge_seen: &mut [bool],
    children: &mut [Vec<(usize, usize)>],
    marks: &mut [Vec<RingMark>],
) {
    visited[v] = true;
    for &(u, e) in g.neighbors(v) {
        if edge_seen[e] {
            continue;
        }
        edge_seen[e] = true;
        if visited[u] {
            // back edge to an ancestor on the current path
            marks[u].push(RingMark::Open(e));
            marks[v].push(RingMark::Close(e));
        } else {
            children[v].push((u, e));
            plan(g, u, visited, edge_seen, children, marks);
        }
    }
}

struct Writer<'a> {
    g: &'a LabeledGraph,
    atoms: &'a [WriteAtom],
    bonds: &'a [Bond],
    children: &'a [Vec<(usize, usize)>],
    marks: &'a [Vec<RingMark>],
    digits: BTreeMap<usize, u32>,
    out: String,
}

impl Writer<'_> {
    fn bond_text(&self, e: usize) -> String {
        let edge = &self.g.edges()[e];
        let bond = self.bonds[e];
        if bond == Bond::implicit(self.atoms[edge.u].aromatic, self.atoms[edge.v].aromatic) {
            String::new()
        } else {
            bond.symbol().to_string()
        }
    }

    fn ring_digit(d: u32) -> String {
        if d < 10 {
            d.to_string()
        } else {
            format!("%{d}")
        }
    }

    fn emit(&mut self, v: usize) {
        self.out.push_str(&atom_text(&self.atoms[v]));
        for mark in &self.marks[v] {
            if let RingMark::Close(e) = mark {
                let d = self.digits.remove(e).expect("ring opened at an ancestor");
                let text = format!("{}{}", self.bond_text(*e), Self::ring_digit(d));
                self.out.push_str(&text);
            }
        }
        for mark in &self.marks[v] {
            if let RingMark::Open(e) = mark {
                let d = (1..).find(|d| !self.digits.values().any(|x| x == d)).expect("free ring digit");
                self.digits.insert(*e, d);
                self.out.push_str(&Self::ring_digit(d));
            }
        }
        let kids = &self.children[v];
        for (i, &(u, e)) in kids.iter().enumerate() {
            let bond = self.bond_text(e);
            if i + 1 < kids.len() {
                self.out.push('(');
                self.out.push_str(&bond);
                self.emit(u);
                self.out.push(')');
            } else {
                self.out.push_str(&bond);
                self.emit(u);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::canonical_form;

    fn kinds(g: &LabeledGraph) -> Vec<&str> {
        g.nodes().iter().map(|n| n.kind.as_str()).collect()
    }

    #[test]
    fn carbonyl() {
        let g = parse_molecule("C=O").unwrap();
        assert_eq!(kinds(&g), ["C", "O"]);
        assert_eq!(g.edge_between(0, 1).unwrap().kind, "double");
        assert_eq!(g.node(0).attr("hcount"), Some("default"));
    }

    #[test]
    fn cyclohexane_ring_closure() {
        let g = parse_molecule("C1CCCCC1").unwrap();
        assert_eq!(g.node_count(), 6);
        assert_eq!(g.edge_count(), 6);
        assert!((0..6).all(|v| g.degree(v) == 2));
        assert_eq!(g.edge_between(0, 5).unwrap().kind, "single");
    }

    #[test]
    fn carboxylate_branch_and_charge() {
        let g = parse_molecule("C(=O)[O-]").unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_between(0, 1).unwrap().kind, "double");
        assert_eq!(g.edge_between(0, 2).unwrap().kind, "single");
        assert_eq!(g.node(2).attr("charge"), Some("-1"));
        assert_eq!(g.node(2).attr("hcount"), Some("0"));
    }

    #[test]
    fn aromatic_bonds_are_implicit() {
        let g = parse_molecule("c1ccccc1-c1ccccc1").unwrap();
        assert_eq!(g.node_count(), 12);
        assert_eq!(g.edge_between(0, 1).unwrap().kind, "aromatic");
        assert_eq!(g.edge_between(5, 6).unwrap().kind, "single");
        assert_eq!(g.node(0).attr("aromatic"), Some("true"));
    }

    #[test]
    fn bracket_details() {
        let g = parse_molecule("[NH2+]C[nH]%12CC%12[Fe+++]").unwrap();
        assert_eq!(g.node(0).attr("hcount"), Some("2"));
        assert_eq!(g.node(0).attr("charge"), Some("+1"));
        assert_eq!(g.node(2).kind, "N");
        assert_eq!(g.node(2).attr("aromatic"), Some("true"));
        assert_eq!(g.node(5).attr("charge"), Some("+3"));
        assert!(g.edge_between(2, 4).is_some());
    }

    #[test]
    fn located_errors() {
        let e = |s: &str| parse_molecule(s).unwrap_err();
        assert_eq!(e("CC(C").column, 3);
        assert_eq!(e("CC(C").kind, SmilesErrorKind::UnbalancedParen);
        assert_eq!(e("CC)C").kind, SmilesErrorKind::UnbalancedParen);
        assert_eq!(e("C1CC").kind, SmilesErrorKind::UnclosedRing(1));
        assert_eq!(e("C1CC").column, 2);
        assert_eq!(e("CXC").column, 2);
        assert_eq!(e("C[13C]").kind, SmilesErrorKind::Unsupported("isotopes"));
        assert_eq!(e("C[C@H]").kind, SmilesErrorKind::Unsupported("stereo"));
        assert_eq!(e("C=").kind, SmilesErrorKind::DanglingBond);
        assert_eq!(e("=C").kind, SmilesErrorKind::NoPrecedingAtom);
        assert_eq!(e("C11").kind, SmilesErrorKind::RingSelfLoop);
        assert_eq!(e("C12CC12").kind, SmilesErrorKind::DuplicateBond(0, 2));
        assert_eq!(e("C[Xx]").kind, SmilesErrorKind::UnknownElement("X".into()));
        assert_eq!(e("C[CH4").kind, SmilesErrorKind::UnclosedBracket);
        assert_eq!(e("C=1CC-1").kind, SmilesErrorKind::RingBondConflict);
        assert_eq!(e("C()C").kind, SmilesErrorKind::EmptyBranch);
        assert_eq!(e("").kind, SmilesErrorKind::Empty);
        assert_eq!(e("C.").kind, SmilesErrorKind::EmptyComponent);
    }

    #[test]
    fn writer_round_trips() {
        for s in [
            "C=O",
            "C1CCCCC1",
            "C(=O)[O-]",
            "c1ccccc1-c1ccccc1",
            "[NH4+].[Cl-]",
            "C12CC1CC2",
            "N#CC(Br)(Cl)I",
            "c1cc[nH]c1",
            "[se]1cccc1",
        ] {
            let g = parse_molecule(s).unwrap();
            let text = write_molecule(&g).unwrap();
            let back = parse_molecule(&text).unwrap();
            assert_eq!(canonical_form(&g).unwrap(), canonical_form(&back).unwrap(), "{s} -> {text}");
        }
    }

    #[test]
    fn writer_rejects_foreign_graphs() {
        let g = LabeledGraph::new(
            "g",
            vec![NodeLabel::new("BS"), NodeLabel::new("DET")],
            vec![(0, 1, EdgeLabel::new("path"))],
        )
        .unwrap();
        assert_eq!(write_molecule(&g).unwrap_err(), WriteError::UnknownBond("path".into()));
    }
}
