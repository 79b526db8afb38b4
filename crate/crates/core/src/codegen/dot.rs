//! Graphviz rendering of graphs at any stage.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::graph::{DataObject, DataTable, Graph, ObjectId};
use crate::optimize::FilteredGraph;
use crate::verify::VerifiedGraph;

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn data_label(d: &DataObject) -> String {
    format!("{}\n{}", d.label(), d.kind.describe())
}

/// Data as ellipses (virtual ones dashed), operators as boxes. Objects outside
/// `alive` are drawn grey. Vertices are listed by id, edges in sorted order.
fn render(graph: &Graph, data: &DataTable, label: &str, alive: Option<&BTreeSet<ObjectId>>) -> String {
    let grey = |id: &ObjectId| alive.is_some_and(|a| !a.contains(id));
    let mut out = format!("digraph {} {{\n", quote(label));
    out.push_str("  rankdir=TB;\n");
    let used = graph.data_ids();
    for d in data.values().filter(|d| used.contains(&d.id) || graph.virtuals.contains(&d.id)) {
        let mut attrs = vec!["shape=ellipse".to_string()];
        if d.is_virtual {
            attrs.push("style=dashed".into());
        }
        if grey(&d.id) {
            attrs.push("color=grey".into());
            attrs.push("fontcolor=grey".into());
        }
        attrs.push(format!("label={}", quote(&data_label(d))));
        let _ = writeln!(out, "  d{} [{}];", d.id, attrs.join(", "));
    }
    for n in graph.nodes.values() {
        let mut attrs = vec!["shape=box".to_string()];
        if grey(&n.id) {
            attrs.push("color=grey".into());
            attrs.push("fontcolor=grey".into());
        }
        attrs.push(format!("label={}", quote(&n.label())));
        let _ = writeln!(out, "  n{} [{}];", n.id, attrs.join(", "));
    }
    let mut edges: Vec<(String, String)> = Vec::new();
    for n in graph.nodes.values() {
        for d in n.inputs() {
            edges.push((format!("d{d}"), format!("n{}", n.id)));
        }
        for d in n.outputs() {
            edges.push((format!("n{}", n.id), format!("d{d}")));
        }
    }
    edges.sort();
    edges.dedup();
    for (a, b) in edges {
        let _ = writeln!(out, "  {a} -> {b};");
    }
    out.push_str("}\n");
    out
}

/// DOT for a graph and the descriptors of its data.
pub fn emit_dot(graph: &Graph, data: &DataTable, label: &str) -> String {
    render(graph, data, label, None)
}

pub fn emit_dot_verified(vg: &VerifiedGraph, label: &str) -> String {
    render(vg.graph(), vg.data(), label, None)
}

/// The unfiltered graph with dead operators and data greyed out.
pub fn emit_dot_filtered(f: &FilteredGraph, label: &str) -> String {
    render(f.base.graph(), f.base.data(), label, Some(&f.alive))
}
