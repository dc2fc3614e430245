//! DOT export for event trees, hued trees and RDCEGs.
//!
//! Stage membership is rendered as vertex fill color and cluster membership
//! as edge color; singleton stages and clusters stay uncolored. Legends are
//! emitted as DOT comments.

use std::fmt::Write as _;

use crate::graph::rdceg::Rdceg;
use crate::graph::staging::HuedTree;
use crate::graph::tree::EventTree;

const PALETTE: [&str; 12] = [
    "#a6cee3", "#fdbf6f", "#b2df8a", "#fb9a99", "#cab2d6", "#ffff99", "#1f78b4", "#ff7f00",
    "#33a02c", "#e31a1c", "#6a3d9a", "#b15928",
];

fn palette(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn esc(s: &str) -> String {
    s.replace('"', "\\\"")
}

pub fn event_tree_dot(t: &EventTree) -> String {
    let mut out = String::new();
    writeln!(out, "digraph event_tree {{").unwrap();
    writeln!(out, "  rankdir=LR;").unwrap();
    writeln!(out, "  node [shape=circle, fontsize=10];").unwrap();
    for v in t.vertices() {
        let shape = if t.is_leaf(v.id) {
            ", shape=square"
        } else if v.continuation.is_some() {
            ", shape=doublecircle"
        } else {
            ""
        };
        writeln!(
            out,
            "  \"{}\" [label=\"{}\"{shape}];",
            esc(&v.name),
            esc(&v.name)
        )
        .unwrap();
    }
    for e in t.edges() {
        let style = if e.timed { "solid" } else { "dashed" };
        writeln!(
            out,
            "  \"{}\" -> \"{}\" [label=\"{}\", style={style}];",
            esc(&t.vertex(e.source).name),
            esc(&t.vertex(e.target).name),
            esc(&e.label)
        )
        .unwrap();
    }
    writeln!(out, "}}").unwrap();
    out
}

pub fn hued_tree_dot(h: &HuedTree) -> String {
    let m = h.modified();
    let mut out = String::new();
    writeln!(out, "digraph hued_tree {{").unwrap();
    writeln!(out, "  rankdir=LR;").unwrap();
    writeln!(
        out,
        "  node [shape=circle, style=filled, fillcolor=white, fontsize=10];"
    )
    .unwrap();
    for (i, cell) in h.staging().cells().iter().enumerate() {
        if cell.len() > 1 {
            let names: Vec<&str> = cell.iter().map(|&v| m.vertex(v).name.as_str()).collect();
            writeln!(
                out,
                "  // stage u{}: {} (fill {})",
                i,
                names.join(", "),
                palette(i)
            )
            .unwrap();
        }
    }
    for (i, cell) in h.clustering().cells().iter().enumerate() {
        if cell.len() > 1 {
            let names: Vec<String> = cell
                .iter()
                .map(|&e| {
                    format!(
                        "{}->{}",
                        m.vertex(m.edge(e).source).name,
                        m.vertex(m.edge(e).target).name
                    )
                })
                .collect();
            writeln!(
                out,
                "  // cluster c{} (kappa {}): {} (color {})",
                i,
                h.clustering().kappa(i),
                names.join(", "),
                palette(i)
            )
            .unwrap();
        }
    }
    for v in m.base().vertices() {
        if !m.is_alive(v.id) {
            continue;
        }
        let fill = match h.stage_of(v.id) {
            Some(s) if h.staging().cells()[s].len() > 1 => palette(s),
            _ => "white",
        };
        writeln!(
            out,
            "  \"{}\" [label=\"{}\", fillcolor=\"{}\"];",
            esc(&v.name),
            esc(&v.name),
            fill
        )
        .unwrap();
    }
    for e in m.base().edges() {
        if !m.is_alive(e.target) || !m.is_alive(e.source) {
            continue;
        }
        let color = match h.cluster_of(e.id) {
            Some(c) if e.timed && h.clustering().cells()[c].len() > 1 => palette(c),
            _ => "black",
        };
        let style = if e.timed { "solid" } else { "dashed" };
        writeln!(
            out,
            "  \"{}\" -> \"{}\" [label=\"{}\", color=\"{}\", style={style}];",
            esc(&m.vertex(e.source).name),
            esc(&m.vertex(e.target).name),
            esc(&e.label),
            color
        )
        .unwrap();
    }
    writeln!(out, "}}").unwrap();
    out
}

pub fn rdceg_dot(
    r: &Rdceg,
    staging_sizes: Option<&[usize]>,
    cluster_sizes: Option<&[usize]>,
) -> String {
    let mut out = String::new();
    writeln!(out, "digraph rdceg {{").unwrap();
    writeln!(out, "  rankdir=LR;").unwrap();
    writeln!(
        out,
        "  node [shape=circle, style=filled, fillcolor=white, fontsize=10];"
    )
    .unwrap();
    let stage_colored = |s: usize| staging_sizes.map(|sz| sz[s] > 1).unwrap_or(true);
    let cluster_colored = |c: usize| cluster_sizes.map(|sz| sz[c] > 1).unwrap_or(true);
    let mut legend: Vec<String> = Vec::new();
    for p in r.positions() {
        if let Some(s) = p.stage {
            if stage_colored(s) {
                legend.push(format!(
                    "  // position {} in stage u{} (fill {})",
                    p.name,
                    s,
                    palette(s)
                ));
            }
        }
    }
    for e in r.edges() {
        if let Some(c) = e.cluster {
            if cluster_colored(c) {
                legend.push(format!(
                    "  // edge {} -> {} '{}' in cluster c{} (color {})",
                    r.position(e.source).name,
                    r.position(e.target).name,
                    e.label,
                    c,
                    palette(c)
                ));
            }
        }
    }
    for line in legend {
        writeln!(out, "{line}").unwrap();
    }
    for p in r.positions() {
        let fill = match p.stage {
            Some(s) if stage_colored(s) => palette(s),
            _ => "white",
        };
        let shape = if p.is_sink {
            ", shape=doublecircle"
        } else {
            ""
        };
        writeln!(
            out,
            "  \"{}\" [label=\"{}\", fillcolor=\"{}\"{shape}];",
            esc(&p.name),
            esc(&p.name),
            fill
        )
        .unwrap();
    }
    for e in r.edges() {
        let color = match e.cluster {
            Some(c) if cluster_colored(c) => palette(c),
            _ => "black",
        };
        let style = if e.timed { "solid" } else { "dashed" };
        let arrow = if e.cyclic { ", arrowhead=empty" } else { "" };
        writeln!(
            out,
            "  \"{}\" -> \"{}\" [label=\"{}\", color=\"{}\", style={style}{arrow}];",
            esc(&r.position(e.source).name),
            esc(&r.position(e.target).name),
            esc(&e.label),
            color
        )
        .unwrap();
    }
    writeln!(out, "}}").unwrap();
    out
}
