//! Human-readable artifacts: histogram SVG, motif DOT, result tables.

use std::fmt::Write;

use crate::combine::MacroFeature;
use crate::graph::{EnvironmentDescriptor, DEFAULT_NODE_BUDGET};
use crate::hypothesis::{EffectStats, HistogramPair, Hypothesis};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 56.0;
const BOTTOM: f64 = 50.0;
const WITH_COLOR: &str = "#1f77b4";
const WITHOUT_COLOR: &str = "#ff7f0e";

/// Text around a histogram panel.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramLabels {
    pub feature: String,
    pub subgraph: String,
    pub property: String,
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Two overlaid count series, feature present against feature absent.
pub fn render_histogram_svg(h: &HistogramPair, labels: &HistogramLabels) -> String {
    let n1: usize = h.true_counts.iter().sum();
    let n0: usize = h.false_counts.iter().sum();
    let bins = h.true_counts.len().max(1);
    let peak = h.true_counts.iter().chain(&h.false_counts).copied().max().unwrap_or(0).max(1) as f64;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let bar_w = plot_w / bins as f64;
    let base = HEIGHT - BOTTOM;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let mut caption = format!("{} {}", labels.feature, labels.subgraph);
    if h.degenerate {
        caption.push_str(" (all values equal: single bin)");
    }
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle">{}</text>"#, WIDTH / 2.0, xml_escape(&caption));

    for (series, counts, color) in [("with", &h.true_counts, WITH_COLOR), ("without", &h.false_counts, WITHOUT_COLOR)] {
        let _ = writeln!(s, r#"<g class="{series}" fill="{color}" fill-opacity="0.5">"#);
        for (b, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let bh = plot_h * c as f64 / peak;
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{}" height="{}"/>"#,
                num(LEFT + bar_w * b as f64),
                num(base - bh),
                num(bar_w),
                num(bh)
            );
        }
        let _ = writeln!(s, "</g>");
    }

    let _ = writeln!(s, r#"<g stroke="black" fill="none">"#);
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{base}" x2="{}" y2="{base}"/>"#, WIDTH - RIGHT);
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{base}"/>"#);
    let _ = writeln!(s, "</g>");
    let lo = h.edges.first().copied().unwrap_or(0.0);
    let hi = h.edges.last().copied().unwrap_or(0.0);
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let x = LEFT + plot_w * t;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            num(x),
            num(base + 16.0),
            num(lo + (hi - lo) * t)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            num(LEFT - 6.0),
            num(base - plot_h * t + 4.0),
            (peak * t).round()
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        num(LEFT + plot_w / 2.0),
        num(HEIGHT - 10.0),
        xml_escape(&labels.property)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">count</text>"#,
        num(TOP + plot_h / 2.0),
        num(TOP + plot_h / 2.0)
    );
    for (row, (name, n, color)) in
        [("with feature", n1, WITH_COLOR), ("without feature", n0, WITHOUT_COLOR)].iter().enumerate()
    {
        let y = 30.0 + 14.0 * row as f64;
        let key = if row == 0 { "n1" } else { "n0" };
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}" fill-opacity="0.5"/>"#,
            num(WIDTH - 190.0),
            num(y - 9.0)
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{name} ({key}={n})</text>"#, num(WIDTH - 175.0), num(y));
    }
    s.push_str("</svg>\n");
    s
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// DOT drawing of an environment in canonical node order, root drawn bold.
pub fn render_subgraph_dot(env: &EnvironmentDescriptor) -> String {
    let env = env.canonicalize(DEFAULT_NODE_BUDGET).map(|(_, c)| c).unwrap_or_else(|_| env.clone());
    let mut s = String::from("graph motif {\n  node [shape=circle];\n");
    for (i, n) in env.nodes.iter().enumerate() {
        let style = if i == env.root { ", style=bold, penwidth=3" } else { "" };
        let _ = writeln!(s, "  n{i} [label={}{style}];", dot_quote(&n.to_string()));
    }
    for (u, v, l) in &env.edges {
        let _ = writeln!(s, "  n{u} -- n{v} [label={}];", dot_quote(&l.kind));
    }
    s.push_str("}\n");
    s
}

/// Full-precision cell text; `NA` when undefined.
pub fn cell(v: Option<f64>) -> String {
    match v {
        None => "NA".into(),
        Some(x) if x == f64::INFINITY => "inf".into(),
        Some(x) if x == f64::NEG_INFINITY => "-inf".into(),
        Some(x) => format!("{x}"),
    }
}

fn stats_cells(st: &EffectStats) -> [String; 6] {
    [cell(st.s), cell(st.d), st.n1.to_string(), st.n0.to_string(), cell(st.mean1), cell(st.mean0)]
}

fn to_csv(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 cells")
}

pub fn hypotheses_csv(hyps: &[Hypothesis]) -> String {
    to_csv(
        &[
            "rank",
            "feature_expr",
            "subgraph_canonical",
            "importance",
            "s",
            "d",
            "n1",
            "n0",
            "mean1",
            "mean0",
            "direction",
        ],
        hyps.iter().map(|h| {
            let mut row = vec![h.rank.to_string(), h.feature.to_string(), h.subgraph.clone(), cell(Some(h.importance))];
            row.extend(stats_cells(&h.stats));
            row.push(h.stats.direction.to_string());
            row
        }),
    )
}

pub fn combined_csv(found: &[MacroFeature]) -> String {
    to_csv(
        &["rank", "expr", "gain", "s", "d", "n1", "n0", "mean1", "mean0", "direction"],
        found.iter().map(|m| {
            let mut row = vec![m.rank.to_string(), m.text.clone(), cell(Some(m.gain))];
            row.extend(stats_cells(&m.stats));
            row.push(m.stats.direction.to_string());
            row
        }),
    )
}
