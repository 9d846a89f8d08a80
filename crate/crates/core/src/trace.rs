//! Lineage traversal over a store snapshot.
//!
//! The lineage graph has two node kinds, dataset revisions and transform
//! executions. Edges follow data flow: an input binding is
//! `revision -> execution`, an output binding is `execution -> revision`.
//! Forward traces follow edges, backward traces follow them in reverse; the
//! recorded edges keep their data-flow orientation either way.
//!
//! Depth counts executions: a revision's depth is the number of executions on
//! the shortest path from the origin, an execution sits one deeper than the
//! revision that triggered it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::model::{EntityId, EntityKey, EntityKind, EntityRecord, SlotDirection, Tri};
use crate::query;
use crate::store::Store;

/// Default cap on enumerated routes.
pub const DEFAULT_ROUTE_LIMIT: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", content = "id")]
pub enum LineageNode {
    #[serde(rename = "dataset_revision")]
    Revision(EntityId),
    #[serde(rename = "transform_execution")]
    Execution(EntityId),
}

impl LineageNode {
    pub fn id(&self) -> &EntityId {
        match self {
            LineageNode::Revision(id) | LineageNode::Execution(id) => id,
        }
    }

    pub fn key(&self) -> EntityKey {
        match self {
            LineageNode::Revision(id) => EntityKey::new(EntityKind::DatasetRevision, id.clone()),
            LineageNode::Execution(id) => EntityKey::new(EntityKind::TransformExecution, id.clone()),
        }
    }

    pub fn is_revision(&self) -> bool {
        matches!(self, LineageNode::Revision(_))
    }
}

impl fmt::Display for LineageNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.id().fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LineageEdge {
    pub from: LineageNode,
    pub to: LineageNode,
    pub via_slot: EntityId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward" => Ok(Direction::Forward),
            "backward" => Ok(Direction::Backward),
            other => Err(format!("direction must be `forward` or `backward`, got `{other}`")),
        }
    }
}

/// `property=value` test against an execution's transform revision.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PrunePredicate {
    pub property: String,
    pub value: bool,
}

impl PrunePredicate {
    pub fn new(property: impl Into<String>, value: bool) -> Self {
        PrunePredicate { property: property.into(), value }
    }

    /// Unknown property values never match.
    pub fn matches(&self, value: Tri) -> bool {
        value.as_bool() == Some(self.value)
    }
}

impl FromStr for PrunePredicate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (prop, val) = s.split_once('=').ok_or_else(|| format!("expected <property>=<true|false>, got `{s}`"))?;
        let value = match val {
            "true" => true,
            "false" => false,
            other => return Err(format!("prune value must be true or false, got `{other}`")),
        };
        if prop.is_empty() {
            return Err("prune property name is empty".into());
        }
        Ok(PrunePredicate::new(prop, value))
    }
}

impl fmt::Display for PrunePredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.property, self.value)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceOptions {
    pub prune_on: BTreeSet<PrunePredicate>,
    /// Maximum depth, counted in executions. Must be at least 1.
    pub max_depth: Option<u32>,
    /// Only traverse nodes belonging to this group (directly or through
    /// their dataset / transform revision / transform).
    pub restrict_to_group: Option<EntityId>,
}

impl TraceOptions {
    pub fn pruning(predicates: impl IntoIterator<Item = PrunePredicate>) -> Self {
        TraceOptions { prune_on: predicates.into_iter().collect(), ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("unknown dataset revision `{0}`")]
    UnknownRevision(EntityId),
    #[error("unknown dataset `{0}`")]
    UnknownDataset(EntityId),
    #[error("unknown group `{0}`")]
    UnknownGroup(EntityId),
    #[error("max_depth must be at least 1")]
    ZeroDepth,
    #[error("route endpoints must differ (`{0}`)")]
    SameEndpoints(EntityId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceResult {
    pub origin: EntityId,
    pub direction: Direction,
    /// Reached revisions and executions with their depth; includes the origin.
    pub reached: BTreeMap<LineageNode, u32>,
    pub edges: Vec<LineageEdge>,
    /// Executions whose successors were not expanded, with the property that matched.
    pub pruned_at: Vec<(EntityId, String)>,
    pub truncated_by_depth: bool,
}

impl TraceResult {
    pub fn contains(&self, node: &LineageNode) -> bool {
        self.reached.contains_key(node)
    }

    pub fn depth_of(&self, node: &LineageNode) -> Option<u32> {
        self.reached.get(node).copied()
    }

    pub fn revisions(&self) -> impl Iterator<Item = &EntityId> {
        self.reached.keys().filter(|n| n.is_revision()).map(LineageNode::id)
    }

    pub fn executions(&self) -> impl Iterator<Item = &EntityId> {
        self.reached.keys().filter(|n| !n.is_revision()).map(LineageNode::id)
    }

    pub fn is_pruned(&self, execution: &EntityId) -> bool {
        self.pruned_at.iter().any(|(e, _)| e == execution)
    }
}

impl Serialize for TraceResult {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Reached<'a> {
            #[serde(flatten)]
            node: &'a LineageNode,
            depth: u32,
        }
        #[derive(Serialize)]
        struct Pruned<'a> {
            execution: &'a EntityId,
            property: &'a str,
        }
        #[derive(Serialize)]
        struct Wire<'a> {
            origin: &'a EntityId,
            direction: Direction,
            reached: Vec<Reached<'a>>,
            edges: &'a [LineageEdge],
            pruned_at: Vec<Pruned<'a>>,
            truncated_by_depth: bool,
        }
        Wire {
            origin: &self.origin,
            direction: self.direction,
            reached: self.reached.iter().map(|(node, &depth)| Reached { node, depth }).collect(),
            edges: &self.edges,
            pruned_at: self.pruned_at.iter().map(|(e, p)| Pruned { execution: e, property: p }).collect(),
            truncated_by_depth: self.truncated_by_depth,
        }
        .serialize(s)
    }
}

/// Neighbours of a revision: the executions on the other side of its bindings.
fn revision_edges(store: &Store, rev: &EntityId, direction: Direction) -> Vec<LineageEdge> {
    match direction {
        Direction::Forward => store
            .consuming_slots(rev)
            .filter_map(|slot| store.execution_slot(slot))
            .map(|xs| LineageEdge {
                from: LineageNode::Revision(rev.clone()),
                to: LineageNode::Execution(xs.transform_execution_id.clone()),
                via_slot: xs.header.id.clone(),
            })
            .collect(),
        Direction::Backward => store
            .producer_of(rev)
            .map(|(exec, slot)| LineageEdge {
                from: LineageNode::Execution(exec.clone()),
                to: LineageNode::Revision(rev.clone()),
                via_slot: slot.clone(),
            })
            .into_iter()
            .collect(),
    }
}

fn execution_edges(store: &Store, exec: &EntityId, direction: Direction) -> Vec<LineageEdge> {
    match direction {
        Direction::Forward => store
            .bindings(exec, SlotDirection::Output)
            .into_iter()
            .map(|(slot, rev)| LineageEdge {
                from: LineageNode::Execution(exec.clone()),
                to: LineageNode::Revision(rev.clone()),
                via_slot: slot.clone(),
            })
            .collect(),
        Direction::Backward => store
            .bindings(exec, SlotDirection::Input)
            .into_iter()
            .map(|(slot, rev)| LineageEdge {
                from: LineageNode::Revision(rev.clone()),
                to: LineageNode::Execution(exec.clone()),
                via_slot: slot.clone(),
            })
            .collect(),
    }
}

/// The node an edge leads to when walking in `direction`.
fn far_end(edge: &LineageEdge, direction: Direction) -> &LineageNode {
    match direction {
        Direction::Forward => &edge.to,
        Direction::Backward => &edge.from,
    }
}

struct Scope {
    members: BTreeSet<EntityKey>,
}

impl Scope {
    fn admits(&self, store: &Store, node: &LineageNode) -> bool {
        if self.members.contains(&node.key()) {
            return true;
        }
        match node {
            LineageNode::Revision(id) => store
                .dataset_revision(id)
                .is_some_and(|r| self.members.contains(&EntityKey::new(EntityKind::Dataset, r.dataset_id.clone()))),
            LineageNode::Execution(id) => store.transform_execution(id).is_some_and(|e| {
                let tr = EntityKey::new(EntityKind::TransformRevision, e.transform_revision_id.clone());
                let transform = store
                    .transform_revision(&e.transform_revision_id)
                    .map(|r| EntityKey::new(EntityKind::Transform, r.transform_id.clone()));
                self.members.contains(&tr) || transform.is_some_and(|t| self.members.contains(&t))
            }),
        }
    }
}

fn matched_predicate<'a>(store: &Store, exec: &EntityId, opts: &'a TraceOptions) -> Option<&'a PrunePredicate> {
    if opts.prune_on.is_empty() {
        return None;
    }
    let props = &store
        .transform_revision(&store.transform_execution(exec)?.transform_revision_id)?
        .tracing_properties;
    opts.prune_on.iter().find(|p| p.matches(props.get(&p.property)))
}

fn trace(store: &Store, origin: &EntityId, direction: Direction, opts: &TraceOptions) -> Result<TraceResult, TraceError> {
    if store.dataset_revision(origin).is_none() {
        return Err(TraceError::UnknownRevision(origin.clone()));
    }
    if opts.max_depth == Some(0) {
        return Err(TraceError::ZeroDepth);
    }
    let scope = match &opts.restrict_to_group {
        None => None,
        Some(group) => {
            let members = query::group_members(store, group, true).map_err(|_| TraceError::UnknownGroup(group.clone()))?;
            Some(Scope { members: members.into_iter().collect() })
        }
    };
    let admitted = |node: &LineageNode| scope.as_ref().is_none_or(|s| s.admits(store, node));

    let mut reached: BTreeMap<LineageNode, u32> = BTreeMap::new();
    let mut edges: BTreeSet<LineageEdge> = BTreeSet::new();
    let mut pruned_at = Vec::new();
    let mut truncated_by_depth = false;

    reached.insert(LineageNode::Revision(origin.clone()), 0);
    let mut frontier: Vec<EntityId> = vec![origin.clone()];
    let mut depth = 0u32;

    while !frontier.is_empty() {
        let next_depth = depth + 1;
        let mut executions: BTreeSet<EntityId> = BTreeSet::new();
        for rev in &frontier {
            for edge in revision_edges(store, rev, direction) {
                let exec = far_end(&edge, direction).clone();
                if !admitted(&exec) {
                    continue;
                }
                if opts.max_depth.is_some_and(|max| next_depth > max) {
                    if !reached.contains_key(&exec) {
                        truncated_by_depth = true;
                    }
                    if reached.contains_key(&exec) {
                        edges.insert(edge);
                    }
                    continue;
                }
                if !reached.contains_key(&exec) {
                    reached.insert(exec.clone(), next_depth);
                    if let LineageNode::Execution(id) = &exec {
                        executions.insert(id.clone());
                    }
                }
                edges.insert(edge);
            }
        }

        let mut next_frontier = Vec::new();
        for exec in &executions {
            if let Some(p) = matched_predicate(store, exec, opts) {
                pruned_at.push((exec.clone(), p.property.clone()));
                continue;
            }
            for edge in execution_edges(store, exec, direction) {
                let rev = far_end(&edge, direction).clone();
                if !admitted(&rev) {
                    continue;
                }
                if !reached.contains_key(&rev) {
                    reached.insert(rev.clone(), next_depth);
                    next_frontier.push(rev.id().clone());
                }
                edges.insert(edge);
            }
        }
        frontier = next_frontier;
        depth = next_depth;
    }

    Ok(TraceResult {
        origin: origin.clone(),
        direction,
        reached,
        edges: edges.into_iter().collect(),
        pruned_at,
        truncated_by_depth,
    })
}

/// Everything derived from `origin` through consume -> produce edges.
pub fn forward_trace(store: &Store, origin: &EntityId, opts: &TraceOptions) -> Result<TraceResult, TraceError> {
    trace(store, origin, Direction::Forward, opts)
}

/// Everything `origin` was derived from.
pub fn backward_trace(store: &Store, origin: &EntityId, opts: &TraceOptions) -> Result<TraceResult, TraceError> {
    trace(store, origin, Direction::Backward, opts)
}

pub fn trace_in(
    store: &Store,
    origin: &EntityId,
    direction: Direction,
    opts: &TraceOptions,
) -> Result<TraceResult, TraceError> {
    trace(store, origin, direction, opts)
}

/// Revisions of `dataset` that `revision` was derived from, oldest first.
/// A revision is never its own ancestor.
pub fn ancestors(store: &Store, revision: &EntityId, dataset: &EntityId) -> Result<Vec<EntityId>, TraceError> {
    if store.dataset(dataset).is_none() {
        return Err(TraceError::UnknownDataset(dataset.clone()));
    }
    let back = backward_trace(store, revision, &TraceOptions::default())?;
    let mut found: Vec<(u64, EntityId)> = back
        .revisions()
        .filter(|r| *r != revision)
        .filter_map(|r| {
            let rec = store.dataset_revision(r)?;
            (rec.dataset_id == *dataset).then(|| (store.revision_sequence(r).unwrap_or(0), r.clone()))
        })
        .collect();
    found.sort();
    Ok(found.into_iter().map(|(_, id)| id).collect())
}

/// Alternating execution / revision steps between two revisions, endpoints excluded.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LineageRoute {
    pub steps: Vec<LineageNode>,
}

impl LineageRoute {
    /// Renders the route in the `[TR:E, DS:R, ...]` notation.
    pub fn notation(&self, store: &Store) -> String {
        let parts: Vec<String> = self.steps.iter().map(|n| node_label_short(store, n)).collect();
        format!("[{}]", parts.join(", "))
    }
}

/// `dataset:revision` or `transform:execution`.
pub fn node_label_short(store: &Store, node: &LineageNode) -> String {
    match node {
        LineageNode::Revision(id) => match store.dataset_revision(id) {
            Some(r) => format!("{}:{}", r.dataset_id, id),
            None => id.to_string(),
        },
        LineageNode::Execution(id) => match transform_of_execution(store, id) {
            Some((t, _)) => format!("{t}:{id}"),
            None => id.to_string(),
        },
    }
}

/// `dataset:revision` or `transform:revision:execution`.
pub fn node_label(store: &Store, node: &LineageNode) -> String {
    match node {
        LineageNode::Revision(_) => node_label_short(store, node),
        LineageNode::Execution(id) => match transform_of_execution(store, id) {
            Some((t, r)) => format!("{t}:{r}:{id}"),
            None => id.to_string(),
        },
    }
}

fn transform_of_execution<'a>(store: &'a Store, exec: &EntityId) -> Option<(&'a EntityId, &'a EntityId)> {
    let e = store.transform_execution(exec)?;
    let r = store.transform_revision(&e.transform_revision_id)?;
    Some((&r.transform_id, &e.transform_revision_id))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RouteSet {
    pub routes: Vec<LineageRoute>,
    /// More routes exist beyond the limit.
    pub truncated: bool,
}

/// Every route along which `source` contributed to `target`, in
/// lexicographic order of step ids. At most `limit` routes are returned
/// (default [`DEFAULT_ROUTE_LIMIT`]).
pub fn lineage_route(
    store: &Store,
    target: &EntityId,
    source: &EntityId,
    limit: Option<usize>,
) -> Result<RouteSet, TraceError> {
    for id in [target, source] {
        if store.dataset_revision(id).is_none() {
            return Err(TraceError::UnknownRevision(id.clone()));
        }
    }
    if target == source {
        return Err(TraceError::SameEndpoints(target.clone()));
    }
    let limit = limit.unwrap_or(DEFAULT_ROUTE_LIMIT);
    let upstream = backward_trace(store, target, &TraceOptions::default())?;
    let mut out = RouteSet::default();
    let start = LineageNode::Revision(source.clone());
    if !upstream.contains(&start) {
        return Ok(out);
    }
    let goal = LineageNode::Revision(target.clone());

    let successors = |node: &LineageNode| -> Vec<LineageNode> {
        let mut next: Vec<LineageNode> = match node {
            LineageNode::Revision(id) => revision_edges(store, id, Direction::Forward),
            LineageNode::Execution(id) => execution_edges(store, id, Direction::Forward),
        }
        .into_iter()
        .map(|e| e.to)
        .filter(|n| upstream.contains(n))
        .collect();
        next.sort_by(|a, b| a.id().cmp(b.id()).then_with(|| a.cmp(b)));
        next.dedup();
        next
    };

    // Iterative DFS; the graph is acyclic so every path is simple.
    let mut path: Vec<LineageNode> = Vec::new();
    let mut stack: Vec<std::vec::IntoIter<LineageNode>> = vec![successors(&start).into_iter()];
    while let Some(iter) = stack.last_mut() {
        match iter.next() {
            None => {
                stack.pop();
                path.pop();
            }
            Some(node) if node == goal => {
                if out.routes.len() == limit {
                    out.truncated = true;
                    return Ok(out);
                }
                out.routes.push(LineageRoute { steps: path.clone() });
            }
            Some(node) => {
                let next = successors(&node);
                path.push(node);
                stack.push(next.into_iter());
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ExternalRef {
    pub entity: EntityKey,
    pub field: String,
    pub value: String,
}

/// Everything needed to reproduce a revision.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Closure {
    pub dataset_revisions: BTreeSet<EntityId>,
    pub transform_revisions: BTreeSet<EntityId>,
    pub type_revisions: BTreeSet<EntityId>,
    pub external_refs: BTreeSet<ExternalRef>,
}

/// Full unpruned backward closure of a revision: the revisions, transform
/// revisions, type revisions and external identifiers behind it.
pub fn environment_closure(store: &Store, revision: &EntityId) -> Result<Closure, TraceError> {
    let back = backward_trace(store, revision, &TraceOptions::default())?;
    let mut c = Closure::default();
    for rev_id in back.revisions() {
        let Some(rev) = store.dataset_revision(rev_id) else { continue };
        c.dataset_revisions.insert(rev_id.clone());
        c.type_revisions.insert(rev.type_revision_id.clone());
        let key = EntityKey::new(EntityKind::DatasetRevision, rev_id.clone());
        c.external_refs.insert(ExternalRef {
            entity: key.clone(),
            field: "external_blob_id".into(),
            value: rev.external_blob_id.clone(),
        });
        if let Some(src) = &rev.external_source_id {
            c.external_refs.insert(ExternalRef { entity: key, field: "external_source_id".into(), value: src.clone() });
        }
    }
    for exec_id in back.executions() {
        let Some(exec) = store.transform_execution(exec_id) else { continue };
        c.transform_revisions.insert(exec.transform_revision_id.clone());
        if let Some(tr) = store.transform_revision(&exec.transform_revision_id) {
            c.external_refs.insert(ExternalRef {
                entity: EntityKey::new(EntityKind::TransformRevision, tr.header.id.clone()),
                field: "external_commit_id".into(),
                value: tr.external_commit_id.clone(),
            });
        }
        for xs in store.slots_of_execution(exec_id) {
            if let Some(slot) = store.transform_slot(&xs.transform_slot_id) {
                c.type_revisions.insert(slot.type_revision_id.clone());
            }
        }
    }
    Ok(c)
}

/// Revisions downstream of `revision` (itself included) that nothing consumes.
pub fn impacted_leaves(store: &Store, revision: &EntityId) -> Result<Vec<EntityId>, TraceError> {
    let fwd = forward_trace(store, revision, &TraceOptions::default())?;
    Ok(fwd.revisions().filter(|r| !store.is_consumed(r)).cloned().collect())
}

/// Entities of the lineage graph resolved to their records, for callers that
/// want the full entity behind a node.
pub fn node_record<'a>(store: &'a Store, node: &LineageNode) -> Option<&'a EntityRecord> {
    store.get(&node.key())
}
