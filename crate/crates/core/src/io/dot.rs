//! Graphviz rendering. Nodes are emitted in sequence order so output is
//! stable across runs.

use std::fmt::Write;

use crate::tree::{ConstituentNode, ConstituentTree, Head, Side};

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

fn label(labels: &[String], i: usize) -> String {
    labels.get(i).cloned().unwrap_or_else(|| i.to_string())
}

/// Dependency arcs drawn dependent → head. Roots point to a `ROOT` marker
/// with a dotted edge; rests are dashed nodes without edges. The heads need
/// not form a valid tree.
pub fn render_dependency(heads: &[Head], labels: &[String]) -> String {
    let mut out = String::from("digraph dependencies {\n  rankdir=LR;\n  node [shape=box];\n");
    for i in 0..heads.len() {
        let style = if heads[i] == Head::None { ", style=dashed" } else { "" };
        writeln!(out, "  n{} [label={}{}];", i, quote(&label(labels, i)), style).unwrap();
    }
    if heads.contains(&Head::Root) {
        out.push_str("  root [label=\"ROOT\", shape=plaintext];\n");
    }
    for (dep, h) in heads.iter().enumerate() {
        match h {
            Head::Index(head) => writeln!(out, "  n{} -> n{};", dep, head).unwrap(),
            Head::Root => writeln!(out, "  n{} -> root [style=dotted];", dep).unwrap(),
            Head::None => {}
        }
    }
    out.push_str("}\n");
    out
}

/// Constituent tree drawn top-down. Internal nodes carry the label of their
/// head element; edges to primary children are solid, to secondary
/// children dashed.
pub fn render_constituent(tree: &ConstituentTree, labels: &[String]) -> String {
    fn walk(node: &ConstituentNode, labels: &[String], next: &mut usize, edges: &mut String, nodes: &mut String) -> String {
        match node {
            ConstituentNode::Leaf(i) => format!("n{}", i),
            ConstituentNode::Internal {
                left,
                right,
                primary,
            } => {
                let id = format!("c{}", *next);
                *next += 1;
                writeln!(nodes, "  {} [label={}, shape=ellipse];", id, quote(&label(labels, node.head_element()))).unwrap();
                let l = walk(left, labels, next, edges, nodes);
                let r = walk(right, labels, next, edges, nodes);
                let (ls, rs) = match primary {
                    Side::Left => ("solid", "dashed"),
                    Side::Right => ("dashed", "solid"),
                };
                writeln!(edges, "  {} -> {} [style={}];", id, l, ls).unwrap();
                writeln!(edges, "  {} -> {} [style={}];", id, r, rs).unwrap();
                id
            }
        }
    }
    let mut out = String::from("digraph constituents {\n  node [shape=box];\n");
    for i in 0..tree.leaf_count() {
        writeln!(out, "  n{} [label={}];", i, quote(&label(labels, i))).unwrap();
    }
    let mut nodes = String::new();
    let mut edges = String::new();
    walk(tree.root(), labels, &mut 0, &mut edges, &mut nodes);
    out.push_str(&nodes);
    out.push_str(&edges);
    out.push_str("  { rank=same;");
    for i in 0..tree.leaf_count() {
        write!(out, " n{};", i).unwrap();
    }
    out.push_str(" }\n}\n");
    out
}
