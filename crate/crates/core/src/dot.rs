//! Graphviz DOT rendering of trees and networks.

use std::fmt::Write as _;

use crate::net::Network;
use crate::tree::{DecisionTree, LeafValue, Node};

fn feature_label(names: Option<&[String]>, feature: usize) -> String {
    names
        .and_then(|n| n.get(feature))
        .cloned()
        .unwrap_or_else(|| format!("x{}", feature + 1))
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Branches labelled `name ≤ threshold`; left edges are the true side.
pub fn tree_to_dot(tree: &DecisionTree, feature_names: Option<&[String]>) -> String {
    let mut out = String::from("digraph tree {\n  node [shape=box];\n");
    let mut next = 0usize;
    emit_node(&tree.root, feature_names, &mut next, &mut out);
    out.push_str("}\n");
    out
}

fn emit_node(node: &Node, names: Option<&[String]>, next: &mut usize, out: &mut String) -> usize {
    let id = *next;
    *next += 1;
    match node {
        Node::Branch {
            feature,
            threshold,
            left,
            right,
            ..
        } => {
            let label = format!("{} ≤ {}", feature_label(names, *feature), threshold);
            let _ = writeln!(out, "  n{id} [label=\"{}\"];", escape(&label));
            let l = emit_node(left, names, next, out);
            let r = emit_node(right, names, next, out);
            let _ = writeln!(out, "  n{id} -> n{l} [label=\"yes\"];");
            let _ = writeln!(out, "  n{id} -> n{r} [label=\"no\"];");
        }
        Node::Leaf { value, .. } => {
            let label = match value {
                LeafValue::Class(c) => format!("class {c}"),
                LeafValue::Values(v) => v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", "),
            };
            let _ = writeln!(out, "  n{id} [label=\"{}\", shape=ellipse];", escape(&label));
        }
    }
    id
}

/// One node per neuron, one edge per nonzero weight; unity weights are drawn
/// with `penwidth=2`.
pub fn network_to_dot(net: &Network, feature_names: Option<&[String]>) -> String {
    let widths = net.widths();
    let last = widths.len() - 1;
    let mut out = String::from("digraph network {\n  rankdir=LR;\n  node [shape=circle, label=\"\"];\n");
    for (l, &w) in widths.iter().enumerate() {
        let _ = writeln!(out, "  subgraph layer{l} {{\n    rank=same;");
        for i in 0..w {
            let label = if l == 0 {
                feature_label(feature_names, i)
            } else if l == last {
                format!("y{}", i + 1)
            } else {
                String::new()
            };
            let _ = writeln!(out, "    l{l}_{i} [label=\"{}\"];", escape(&label));
        }
        out.push_str("  }\n");
    }
    for (m, layer) in net.layers().iter().enumerate() {
        for ((to, from), &w) in layer.weights.indexed_iter() {
            if w == 0.0 {
                continue;
            }
            let style = if w == 1.0 { ", penwidth=2" } else { "" };
            let _ = writeln!(out, "  l{m}_{from} -> l{}_{to} [tooltip=\"{w:.4}\"{style}];", m + 1);
        }
    }
    out.push_str("}\n");
    out
}
