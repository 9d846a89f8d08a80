//! Graphviz rendering of a traced lineage subgraph.
//!
//! Revisions are ellipses labelled `dataset:revision`, executions are boxes
//! labelled `transform:revision:execution`; executions where pruning stopped
//! the trace are dashed. Edges follow data flow and are labelled with the
//! slot name. Output is deterministic: nodes and edges are emitted in sorted id order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::model::EntityId;
use crate::store::Store;
use crate::trace::{self, Direction, LineageEdge, LineageNode, TraceError, TraceOptions};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DotOptions {
    pub trace: TraceOptions,
    /// Emit `rankdir=LR` so data flows left to right.
    pub left_to_right: bool,
}

/// Escapes a string for use inside a double-quoted DOT id.
pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

struct Ids {
    revisions: BTreeSet<EntityId>,
}

impl Ids {
    /// Revisions keep their id; an execution sharing an id with a revision
    /// is disambiguated with an `exec:` prefix.
    fn of(&self, node: &LineageNode) -> String {
        match node {
            LineageNode::Revision(id) => format!("\"{}\"", escape(id.as_str())),
            LineageNode::Execution(id) if self.revisions.contains(id) => format!("\"exec:{}\"", escape(id.as_str())),
            LineageNode::Execution(id) => format!("\"{}\"", escape(id.as_str())),
        }
    }
}

/// Traces from every root in `direction` and renders the union.
pub fn export_dot(
    store: &Store,
    roots: &[EntityId],
    direction: Direction,
    opts: &DotOptions,
) -> Result<String, TraceError> {
    if roots.is_empty() {
        return Ok("digraph lineage {}\n".to_owned());
    }
    let mut nodes: BTreeSet<LineageNode> = BTreeSet::new();
    let mut edges: BTreeSet<LineageEdge> = BTreeSet::new();
    let mut pruned: BTreeMap<EntityId, String> = BTreeMap::new();
    for root in roots {
        let t = trace::trace_in(store, root, direction, &opts.trace)?;
        nodes.extend(t.reached.into_keys());
        edges.extend(t.edges);
        pruned.extend(t.pruned_at);
    }
    let ids = Ids {
        revisions: nodes.iter().filter(|n| n.is_revision()).map(|n| n.id().clone()).collect(),
    };

    let mut out = String::from("digraph lineage {\n");
    if opts.left_to_right {
        out.push_str("  rankdir=LR;\n");
    }
    let mut ordered: Vec<(String, &LineageNode)> = nodes.iter().map(|n| (ids.of(n), n)).collect();
    ordered.sort();
    for (id, node) in ordered {
        let label = escape(&trace::node_label(store, node));
        match node {
            LineageNode::Revision(_) => {
                let _ = writeln!(out, "  {id} [shape=ellipse, label=\"{label}\"];");
            }
            LineageNode::Execution(e) => match pruned.get(e) {
                Some(prop) => {
                    let _ = writeln!(
                        out,
                        "  {id} [shape=box, style=dashed, label=\"{label}\", tooltip=\"pruned on {}\"];",
                        escape(prop)
                    );
                }
                None => {
                    let _ = writeln!(out, "  {id} [shape=box, label=\"{label}\"];");
                }
            },
        }
    }
    let mut ordered: Vec<(String, String, &LineageEdge)> =
        edges.iter().map(|e| (ids.of(&e.from), ids.of(&e.to), e)).collect();
    ordered.sort();
    for (from, to, edge) in ordered {
        let slot_name = store
            .execution_slot(&edge.via_slot)
            .and_then(|xs| store.transform_slot(&xs.transform_slot_id))
            .map(|s| s.name.clone())
            .unwrap_or_else(|| edge.via_slot.to_string());
        let _ = writeln!(out, "  {from} -> {to} [label=\"{}\"];", escape(&slot_name));
    }
    out.push_str("}\n");
    Ok(out)
}
