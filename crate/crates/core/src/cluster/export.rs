use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{ContextNode, ContextTree};
use crate::ingest::IngestError;

pub fn write_tree_json(tree: &ContextTree) -> String {
    serde_json::to_string_pretty(tree).expect("tree serialises")
}

pub fn read_tree_json(text: &str) -> Result<ContextTree, IngestError> {
    serde_json::from_str(text)
        .map_err(|e| IngestError::Json { line: e.line(), column: e.column(), message: e.to_string() })
}

/// Up to two `key:value` labels: the most common keys among the node's
/// leaves, each with its most common value. Ties break alphabetically.
fn label(node: &ContextNode) -> Vec<String> {
    let mut keys: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for leaf in node.leaves() {
        for t in &leaf.tags {
            *keys.entry(t.key()).or_default().entry(t.value()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize, &str)> = keys
        .iter()
        .map(|(k, values)| {
            let total = values.values().sum();
            let (v, _) = values.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).expect("non-empty");
            (*k, total, *v)
        })
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let parts: Vec<String> = ranked.iter().take(2).map(|(k, _, v)| format!("{k}:{v}")).collect();
    if parts.is_empty() {
        vec![format!("#{}", node.id)]
    } else {
        parts
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz digraph with one node per cluster, in pre-order.
pub fn to_dot(tree: &ContextTree) -> String {
    let mut out = String::from("digraph context_tree {\n  node [shape=box, fontsize=10];\n");
    for n in tree.root.walk() {
        let shape = if n.is_leaf() { ", style=rounded" } else { "" };
        writeln!(out, "  n{} [label=\"{}\"{}];", n.id, label(n).iter().map(|p| escape(p)).collect::<Vec<_>>().join("\\n"), shape).unwrap();
    }
    for n in tree.root.walk() {
        for c in &n.children {
            writeln!(out, "  n{} -> n{};", n.id, c.id).unwrap();
        }
    }
    out.push_str("}\n");
    out
}
