//! Lookups layered on the store: textual references, relative revisions,
//! group membership and deprecation impact.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::model::{EntityId, EntityKey, EntityKind, EntityRef, Member, RelativePos};
use crate::store::Store;
use crate::trace::{self, LineageNode, TraceError, TraceOptions};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(EntityId),
    #[error("`{id}` is ambiguous: it names a {}", kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", a "))]
    Ambiguous { id: EntityId, kinds: Vec<EntityKind> },
    #[error("unknown dataset `{0}`")]
    UnknownDataset(EntityId),
    #[error("dataset `{0}` has no revisions")]
    EmptyDataset(EntityId),
    #[error("dataset `{dataset}` has {available} revision(s); `head-{requested}` is out of range")]
    IndexOutOfRange { dataset: EntityId, requested: u64, available: usize },
    #[error("revision `{revision}` does not belong to dataset `{dataset}`")]
    RevisionNotInDataset { dataset: EntityId, revision: EntityId },
    #[error("execution `{execution}` is not an execution of `{container}`")]
    ExecutionNotInTransform { container: EntityId, execution: EntityId },
    #[error("`{container}` is neither a dataset nor a transform")]
    UnknownContainer { container: EntityId },
    #[error("relative positions only apply to dataset revisions (`{0}`)")]
    RelativeExecution(EntityId),
    #[error("unknown group `{0}`")]
    UnknownGroup(EntityId),
    #[error("deprecation reports cover datasets, transforms and their revisions, not {0}")]
    UnsupportedKind(EntityKind),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Picks a revision of `dataset` by id or by relative position.
pub fn resolve_revision(store: &Store, dataset: &EntityId, member: &Member) -> Result<EntityId, QueryError> {
    if store.dataset(dataset).is_none() {
        return Err(QueryError::UnknownDataset(dataset.clone()));
    }
    let revisions = store.revisions_of(dataset);
    match member {
        Member::Id(id) => {
            if revisions.contains(&id) {
                Ok(id.clone())
            } else {
                Err(QueryError::RevisionNotInDataset { dataset: dataset.clone(), revision: id.clone() })
            }
        }
        Member::Relative(pos) => {
            if revisions.is_empty() {
                return Err(QueryError::EmptyDataset(dataset.clone()));
            }
            let picked = match *pos {
                RelativePos::Earliest => revisions.first(),
                RelativePos::Head(k) => usize::try_from(k)
                    .ok()
                    .and_then(|k| revisions.len().checked_sub(k + 1))
                    .and_then(|i| revisions.get(i)),
            };
            match (picked, pos) {
                (Some(id), _) => Ok((*id).clone()),
                (None, RelativePos::Head(k)) => Err(QueryError::IndexOutOfRange {
                    dataset: dataset.clone(),
                    requested: *k,
                    available: revisions.len(),
                }),
                (None, RelativePos::Earliest) => Err(QueryError::EmptyDataset(dataset.clone())),
            }
        }
    }
}

/// What a textual reference points at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Resolved {
    Entity(EntityKey),
    Route(Vec<EntityKey>),
}

/// Resolves a parsed reference against the store.
///
/// A bare id must name exactly one entity. `a:b` is `dataset:revision`, or
/// `transform:execution` / `transform_revision:execution` when `a` is not a
/// dataset.
pub fn resolve_ref(store: &Store, r: &EntityRef) -> Result<Resolved, QueryError> {
    match r {
        EntityRef::Route(parts) => {
            let mut keys = Vec::with_capacity(parts.len());
            for p in parts {
                match resolve_ref(store, p)? {
                    Resolved::Entity(k) => keys.push(k),
                    Resolved::Route(inner) => keys.extend(inner),
                }
            }
            Ok(Resolved::Route(keys))
        }
        other => resolve_single(store, other).map(Resolved::Entity),
    }
}

fn resolve_single(store: &Store, r: &EntityRef) -> Result<EntityKey, QueryError> {
    match r {
        EntityRef::Entity(id) => {
            let kinds = store.kinds_of(id);
            match kinds.as_slice() {
                [] => Err(QueryError::UnknownEntity(id.clone())),
                [kind] => Ok(EntityKey::new(*kind, id.clone())),
                _ => Err(QueryError::Ambiguous { id: id.clone(), kinds }),
            }
        }
        EntityRef::Revision { dataset, member } => {
            if store.dataset(dataset).is_some() {
                let id = resolve_revision(store, dataset, member)?;
                return Ok(EntityKey::new(EntityKind::DatasetRevision, id));
            }
            let is_transform = store.transform(dataset).is_some();
            let is_revision = store.transform_revision(dataset).is_some();
            if !is_transform && !is_revision {
                return Err(QueryError::UnknownContainer { container: dataset.clone() });
            }
            let Member::Id(exec) = member else {
                return Err(QueryError::RelativeExecution(dataset.clone()));
            };
            let belongs = store.transform_execution(exec).is_some_and(|e| {
                e.transform_revision_id == *dataset
                    || store
                        .transform_revision(&e.transform_revision_id)
                        .is_some_and(|tr| tr.transform_id == *dataset)
            });
            if belongs {
                Ok(EntityKey::new(EntityKind::TransformExecution, exec.clone()))
            } else {
                Err(QueryError::ExecutionNotInTransform { container: dataset.clone(), execution: exec.clone() })
            }
        }
        EntityRef::Execution { transform, revision, execution } => {
            let tr = store
                .transform_revision(revision)
                .filter(|tr| tr.transform_id == *transform)
                .ok_or_else(|| QueryError::ExecutionNotInTransform {
                    container: transform.clone(),
                    execution: execution.clone(),
                })?;
            match store.transform_execution(execution) {
                Some(e) if e.transform_revision_id == tr.header.id => {
                    Ok(EntityKey::new(EntityKind::TransformExecution, execution.clone()))
                }
                _ => Err(QueryError::ExecutionNotInTransform {
                    container: revision.clone(),
                    execution: execution.clone(),
                }),
            }
        }
        EntityRef::Route(_) => unreachable!("routes are handled by resolve_ref"),
    }
}

/// Items of a group in declaration order. With `recursive`, nested groups
/// are expanded depth-first and replaced by their members; every entity is
/// listed once.
pub fn group_members(store: &Store, group: &EntityId, recursive: bool) -> Result<Vec<EntityKey>, QueryError> {
    let root = store.group(group).ok_or_else(|| QueryError::UnknownGroup(group.clone()))?;
    if !recursive {
        return Ok(root.items.clone());
    }
    let mut out = Vec::new();
    let mut seen: BTreeSet<EntityKey> = BTreeSet::new();
    let mut visited_groups: BTreeSet<EntityId> = BTreeSet::from([group.clone()]);
    let mut stack: Vec<std::slice::Iter<'_, EntityKey>> = vec![root.items.iter()];
    while let Some(iter) = stack.last_mut() {
        let Some(item) = iter.next() else {
            stack.pop();
            continue;
        };
        if item.kind == EntityKind::Group {
            if visited_groups.insert(item.id.clone()) {
                if let Some(g) = store.group(&item.id) {
                    stack.push(g.items.iter());
                }
            }
        } else if seen.insert(item.clone()) {
            out.push(item.clone());
        }
    }
    Ok(out)
}

/// Everything downstream of an entity that is about to be deprecated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeprecationReport {
    pub subject: EntityKey,
    /// Dependent revisions and executions with their distance in executions.
    #[serde(serialize_with = "serialize_dependents")]
    pub dependents: BTreeMap<LineageNode, u32>,
    /// Dependent revisions nothing consumes.
    pub leaves: Vec<EntityId>,
}

fn serialize_dependents<S: serde::Serializer>(deps: &BTreeMap<LineageNode, u32>, s: S) -> Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Dep<'a> {
        #[serde(flatten)]
        node: &'a LineageNode,
        depth: u32,
    }
    s.collect_seq(deps.iter().map(|(node, &depth)| Dep { node, depth }))
}

impl DeprecationReport {
    pub fn dependent_revisions(&self) -> impl Iterator<Item = &EntityId> {
        self.dependents.keys().filter(|n| n.is_revision()).map(LineageNode::id)
    }
}

fn merge(into: &mut BTreeMap<LineageNode, u32>, node: LineageNode, depth: u32) {
    into.entry(node).and_modify(|d| *d = (*d).min(depth)).or_insert(depth);
}

fn revision_dependents(store: &Store, rev: &EntityId, offset: u32, into: &mut BTreeMap<LineageNode, u32>) -> Result<(), QueryError> {
    let fwd = trace::forward_trace(store, rev, &TraceOptions::default())?;
    for (node, depth) in fwd.reached {
        if offset == 0 && node == LineageNode::Revision(rev.clone()) {
            continue;
        }
        merge(into, node, depth + offset);
    }
    Ok(())
}

fn transform_revision_dependents(store: &Store, tr: &EntityId, into: &mut BTreeMap<LineageNode, u32>) -> Result<(), QueryError> {
    for exec in store.executions_of(tr) {
        merge(into, LineageNode::Execution(exec.clone()), 1);
        for (_, rev) in store.bindings(exec, crate::model::SlotDirection::Output) {
            revision_dependents(store, rev, 1, into)?;
        }
    }
    Ok(())
}

/// Impact of deprecating a dataset, dataset revision, transform or
/// transform revision: every downstream revision and execution, and the
/// leaves among them.
pub fn deprecation_report(store: &Store, subject: &EntityKey) -> Result<DeprecationReport, QueryError> {
    if store.get(subject).is_none() {
        return Err(QueryError::UnknownEntity(subject.id.clone()));
    }
    let mut dependents = BTreeMap::new();
    match subject.kind {
        EntityKind::DatasetRevision => revision_dependents(store, &subject.id, 0, &mut dependents)?,
        EntityKind::Dataset => {
            for rev in store.revisions_of(&subject.id) {
                revision_dependents(store, rev, 0, &mut dependents)?;
            }
        }
        EntityKind::TransformRevision => transform_revision_dependents(store, &subject.id, &mut dependents)?,
        EntityKind::Transform => {
            for tr in store.transform_revisions_of(&subject.id) {
                transform_revision_dependents(store, tr, &mut dependents)?;
            }
        }
        other => return Err(QueryError::UnsupportedKind(other)),
    }
    let leaves = dependents
        .keys()
        .filter(|n| n.is_revision() && !store.is_consumed(n.id()))
        .map(|n| n.id().clone())
        .collect();
    Ok(DeprecationReport { subject: subject.clone(), dependents, leaves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{parse_entity_ref, EntityHeader, Group};
    use crate::txn::TransactionDraft;

    fn resolve(store: &Store, text: &str) -> Result<Resolved, QueryError> {
        resolve_ref(store, &parse_entity_ref(text).unwrap())
    }

    fn rev_key(id: &str) -> Resolved {
        Resolved::Entity(EntityKey::new(EntityKind::DatasetRevision, id))
    }

    #[test]
    fn relative_revisions() {
        let log = fixtures::fanout_log();
        let s = log.live();
        assert_eq!(resolve(s, "DS_a:earliest").unwrap(), rev_key("R_a1"));
        assert_eq!(resolve(s, "DS_a:latest").unwrap(), rev_key("R_a2"));
        assert_eq!(resolve(s, "DS_a:head-0").unwrap(), rev_key("R_a2"));
        assert_eq!(resolve(s, "DS_a:head-1").unwrap(), rev_key("R_a1"));
        assert_eq!(
            resolve(s, "DS_a:head-2").unwrap_err(),
            QueryError::IndexOutOfRange { dataset: "DS_a".into(), requested: 2, available: 2 }
        );
        assert_eq!(resolve(s, "DS_a:R_a1").unwrap(), rev_key("R_a1"));
        assert!(matches!(resolve(s, "DS_a:R_c1").unwrap_err(), QueryError::RevisionNotInDataset { .. }));
        assert!(matches!(resolve(s, "DS_nope:latest").unwrap_err(), QueryError::UnknownContainer { .. }));
    }

    #[test]
    fn empty_dataset_has_no_latest() {
        let log = fixtures::bootstrap_log();
        assert_eq!(
            resolve_revision(log.live(), &"DS_in".into(), &Member::Relative(RelativePos::LATEST)).unwrap_err(),
            QueryError::EmptyDataset("DS_in".into())
        );
    }

    #[test]
    fn execution_references() {
        let log = fixtures::train_eval_log();
        let s = log.live();
        let e1 = Resolved::Entity(EntityKey::new(EntityKind::TransformExecution, "E_1"));
        assert_eq!(resolve(s, "TF_1:E_1").unwrap(), e1);
        assert_eq!(resolve(s, "TF_1_v1:E_1").unwrap(), e1);
        assert_eq!(resolve(s, "TF_1:TF_1_v1:E_1").unwrap(), e1);
        assert!(resolve(s, "TF_2:E_1").is_err());
        assert!(resolve(s, "TF_2:TF_1_v1:E_1").is_err());
        assert_eq!(resolve(s, "TF_1:latest").unwrap_err(), QueryError::RelativeExecution("TF_1".into()));
        match resolve(s, "[TF_1:E_1, DS_1:R_1, TF_2:E_2]").unwrap() {
            Resolved::Route(keys) => assert_eq!(keys.len(), 3),
            other => panic!("expected a route, got {other:?}"),
        }
        assert_eq!(resolve(s, "R_1").unwrap(), rev_key("R_1"));
        assert_eq!(resolve(s, "missing").unwrap_err(), QueryError::UnknownEntity("missing".into()));
    }

    #[test]
    fn bare_ids_shared_across_kinds_are_ambiguous() {
        let mut log = fixtures::bootstrap_log();
        let draft = TransactionDraft::new(fixtures::IDENTITY).add(fixtures::dataset("shared")).add(Group {
            header: EntityHeader::new("shared"),
            items: vec![EntityKey::new(EntityKind::Dataset, "DS_in")],
            ..Default::default()
        });
        log.commit(draft).unwrap();
        assert!(matches!(resolve(log.live(), "shared").unwrap_err(), QueryError::Ambiguous { .. }));
    }

    #[test]
    fn nested_groups_flatten_depth_first() {
        let mut log = fixtures::train_eval_log();
        let ds = |id: &str| EntityKey::new(EntityKind::Dataset, id);
        let inner = Group {
            header: EntityHeader::new("G_inner"),
            items: vec![ds("DS_1"), ds("DS_in")],
            ..Default::default()
        };
        let outer = Group {
            header: EntityHeader::new("G_outer"),
            items: vec![ds("DS_out"), EntityKey::new(EntityKind::Group, "G_inner"), ds("DS_1")],
            ..Default::default()
        };
        log.commit(TransactionDraft::new(fixtures::IDENTITY).add(inner).add(outer)).unwrap();
        let flat = group_members(log.live(), &"G_outer".into(), true).unwrap();
        assert_eq!(flat, vec![ds("DS_out"), ds("DS_1"), ds("DS_in")]);
        let direct = group_members(log.live(), &"G_outer".into(), false).unwrap();
        assert_eq!(direct.len(), 3);
        assert_eq!(group_members(log.live(), &"G_none".into(), true).unwrap_err(), QueryError::UnknownGroup("G_none".into()));
    }

    #[test]
    fn deprecation_reports() {
        let log = fixtures::train_eval_log();
        let s = log.live();
        let r = deprecation_report(s, &EntityKey::new(EntityKind::DatasetRevision, "R_x")).unwrap();
        assert_eq!(r.dependent_revisions().cloned().collect::<Vec<_>>(), vec![EntityId::from("R_1"), "R_y".into()]);
        assert_eq!(r.leaves, vec![EntityId::from("R_y")]);
        assert_eq!(r.dependents[&LineageNode::Revision("R_y".into())], 2);

        let t = deprecation_report(s, &EntityKey::new(EntityKind::Transform, "TF_1")).unwrap();
        assert_eq!(t.dependents[&LineageNode::Execution("E_1".into())], 1);
        assert_eq!(t.dependents[&LineageNode::Revision("R_1".into())], 1);
        assert_eq!(t.dependents[&LineageNode::Execution("E_2".into())], 2);
        assert_eq!(t.leaves, vec![EntityId::from("R_y")]);

        let leaf = deprecation_report(s, &EntityKey::new(EntityKind::DatasetRevision, "R_y")).unwrap();
        assert!(leaf.dependents.is_empty());
        assert!(leaf.leaves.is_empty());

        assert_eq!(
            deprecation_report(s, &EntityKey::new(EntityKind::Identity, fixtures::IDENTITY)).unwrap_err(),
            QueryError::UnsupportedKind(EntityKind::Identity)
        );
    }
}
