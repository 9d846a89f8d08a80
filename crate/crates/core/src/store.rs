//! Materialized state of the model at one point of the changelog.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{
    check_entity, DatasetRevision, EntityId, EntityKey, EntityKind, EntityRecord, Resolve, SlotDirection, TransformExecution,
    TransformExecutionSlot, TransformRevision, TransformSlot, Rule, Severity, ValidationReport, Violation,
};

/// Lookup structures derived from the entity set. Always equal to
/// [`Store::rebuild_indexes`] of the owning store.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Indexes {
    /// dataset -> sequence -> revision
    pub revisions_by_dataset: BTreeMap<EntityId, BTreeMap<u64, EntityId>>,
    /// transform -> sequence -> transform revision
    pub revisions_by_transform: BTreeMap<EntityId, BTreeMap<u64, EntityId>>,
    /// dataset revision -> input execution slots consuming it
    pub consumers: BTreeMap<EntityId, BTreeSet<EntityId>>,
    /// execution -> all of its execution slots
    pub slots_by_execution: BTreeMap<EntityId, BTreeSet<EntityId>>,
    /// transform revision -> executions
    pub executions_by_transform_revision: BTreeMap<EntityId, BTreeSet<EntityId>>,
    /// transform revision -> declared slots
    pub slots_by_transform_revision: BTreeMap<EntityId, BTreeSet<EntityId>>,
    /// target -> entities holding a reference to it
    pub referrers: BTreeMap<EntityKey, BTreeSet<EntityKey>>,
}

/// Immutable-by-convention snapshot of all live entities.
///
/// Stores compare equal only when their entities, bookkeeping and indexes all
/// agree, which makes `==` a usable check for replay determinism.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Store {
    entities: BTreeMap<EntityKey, EntityRecord>,
    added_at: BTreeMap<EntityKey, u64>,
    /// Ordinal of each dataset / transform revision within its container.
    sequences: BTreeMap<EntityKey, u64>,
    /// Last ordinal handed out per container; survives removals.
    counters: BTreeMap<EntityKey, u64>,
    tombstones: BTreeSet<EntityKey>,
    last_seq: u64,
    index: Indexes,
}

macro_rules! typed_getter {
    ($name:ident, $kind:ident, $ty:ty) => {
        pub fn $name(&self, id: &EntityId) -> Option<&$ty> {
            match self.entities.get(&EntityKey::new(EntityKind::$kind, id.clone())) {
                Some(EntityRecord::$kind(e)) => Some(e),
                _ => None,
            }
        }
    };
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn get(&self, key: &EntityKey) -> Option<&EntityRecord> {
        self.entities.get(key)
    }

    pub fn get_by(&self, kind: EntityKind, id: &EntityId) -> Option<&EntityRecord> {
        self.entities.get(&EntityKey::new(kind, id.clone()))
    }

    pub fn contains(&self, key: &EntityKey) -> bool {
        self.entities.contains_key(key)
    }

    /// Live entities in key order.
    pub fn entities(&self) -> impl Iterator<Item = &EntityRecord> {
        self.entities.values()
    }

    pub fn keys(&self) -> impl Iterator<Item = &EntityKey> {
        self.entities.keys()
    }

    /// Kinds under which `id` is live.
    pub fn kinds_of(&self, id: &EntityId) -> Vec<EntityKind> {
        EntityKind::ALL
            .into_iter()
            .filter(|k| self.entities.contains_key(&EntityKey::new(*k, id.clone())))
            .collect()
    }

    pub fn added_at(&self, key: &EntityKey) -> Option<u64> {
        self.added_at.get(key).copied()
    }

    pub fn is_tombstoned(&self, key: &EntityKey) -> bool {
        self.tombstones.contains(key)
    }

    pub fn indexes(&self) -> &Indexes {
        &self.index
    }

    typed_getter!(dataset, Dataset, crate::model::Dataset);
    typed_getter!(dataset_revision, DatasetRevision, DatasetRevision);
    typed_getter!(transform, Transform, crate::model::Transform);
    typed_getter!(transform_revision, TransformRevision, TransformRevision);
    typed_getter!(transform_slot, TransformSlot, TransformSlot);
    typed_getter!(transform_execution, TransformExecution, TransformExecution);
    typed_getter!(execution_slot, TransformExecutionSlot, TransformExecutionSlot);
    typed_getter!(group, Group, crate::model::Group);
    typed_getter!(identity, Identity, crate::model::Identity);
    typed_getter!(type_revision, TypeRevision, crate::model::TypeRevision);

    /// Ordinal of a dataset revision within its dataset (1-based).
    pub fn revision_sequence(&self, revision: &EntityId) -> Option<u64> {
        self.sequences
            .get(&EntityKey::new(EntityKind::DatasetRevision, revision.clone()))
            .copied()
    }

    /// Ordinal of a transform revision within its transform (1-based).
    pub fn transform_revision_sequence(&self, revision: &EntityId) -> Option<u64> {
        self.sequences
            .get(&EntityKey::new(EntityKind::TransformRevision, revision.clone()))
            .copied()
    }

    /// Live revisions of a dataset, oldest first.
    pub fn revisions_of(&self, dataset: &EntityId) -> Vec<&EntityId> {
        self.index.revisions_by_dataset.get(dataset).into_iter().flat_map(|m| m.values()).collect()
    }

    /// Live revisions of a transform, oldest first.
    pub fn transform_revisions_of(&self, transform: &EntityId) -> Vec<&EntityId> {
        self.index.revisions_by_transform.get(transform).into_iter().flat_map(|m| m.values()).collect()
    }

    pub fn executions_of(&self, transform_revision: &EntityId) -> impl Iterator<Item = &EntityId> {
        self.index.executions_by_transform_revision.get(transform_revision).into_iter().flatten()
    }

    /// Input execution slots that bind the revision.
    pub fn consuming_slots(&self, revision: &EntityId) -> impl Iterator<Item = &EntityId> {
        self.index.consumers.get(revision).into_iter().flatten()
    }

    /// Executions consuming the revision, in id order, without duplicates.
    pub fn consumers_of(&self, revision: &EntityId) -> BTreeSet<&EntityId> {
        self.consuming_slots(revision)
            .filter_map(|s| self.execution_slot(s))
            .map(|s| &s.transform_execution_id)
            .collect()
    }

    pub fn is_consumed(&self, revision: &EntityId) -> bool {
        self.index.consumers.get(revision).is_some_and(|s| !s.is_empty())
    }

    pub fn slots_of_execution(&self, execution: &EntityId) -> impl Iterator<Item = &TransformExecutionSlot> {
        self.index
            .slots_by_execution
            .get(execution)
            .into_iter()
            .flatten()
            .filter_map(|id| self.execution_slot(id))
    }

    /// `(execution slot, revision)` pairs bound in the given direction.
    pub fn bindings(&self, execution: &EntityId, direction: SlotDirection) -> Vec<(&EntityId, &EntityId)> {
        self.slots_of_execution(execution)
            .filter(|xs| self.transform_slot(&xs.transform_slot_id).is_some_and(|s| s.direction == direction))
            .map(|xs| (&xs.header.id, &xs.dataset_revision_id))
            .collect()
    }

    /// `(execution, execution slot)` that produced the revision, if any.
    pub fn producer_of(&self, revision: &EntityId) -> Option<(&EntityId, &EntityId)> {
        let slot_id = self.dataset_revision(revision)?.producer_slot_id.as_ref()?;
        let xs = self.execution_slot(slot_id)?;
        Some((&xs.transform_execution_id, &xs.header.id))
    }

    pub fn referrers_of(&self, key: &EntityKey) -> impl Iterator<Item = &EntityKey> {
        self.index.referrers.get(key).into_iter().flatten()
    }

    /// Recomputes every index from the entity set and recorded sequences.
    pub fn rebuild_indexes(&self) -> Indexes {
        let mut index = Indexes::default();
        for record in self.entities.values() {
            index_insert(&mut index, &self.entities, &self.sequences, record);
        }
        index
    }

    /// Re-checks every live entity against the store: the full invariant scan.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for record in self.entities.values() {
            check_entity(record, self, &mut report);
        }
        if self.rebuild_indexes() != self.index {
            report.push(Violation {
                entity: None,
                field: "index".into(),
                rule: Rule::IndexMismatch,
                severity: Severity::Error,
                target: None,
                message: "secondary indexes disagree with the entity set".into(),
            });
        }
        report
    }

    // -- mutation, driven by the changelog -------------------------------------------------

    pub(crate) fn set_last_seq(&mut self, seq: u64) {
        self.last_seq = seq;
    }

    pub(crate) fn insert(&mut self, record: EntityRecord, seq: u64) {
        let key = record.key();
        let container = match &record {
            EntityRecord::DatasetRevision(r) => Some(EntityKey::new(EntityKind::Dataset, r.dataset_id.clone())),
            EntityRecord::TransformRevision(r) => Some(EntityKey::new(EntityKind::Transform, r.transform_id.clone())),
            _ => None,
        };
        if let Some(container) = container {
            let counter = self.counters.entry(container).or_default();
            *counter += 1;
            self.sequences.insert(key.clone(), *counter);
        }
        self.added_at.insert(key.clone(), seq);
        index_insert(&mut self.index, &self.entities, &self.sequences, &record);
        self.entities.insert(key, record);
    }

    pub(crate) fn replace(&mut self, record: EntityRecord) {
        let key = record.key();
        if let Some(old) = self.entities.remove(&key) {
            index_remove(&mut self.index, &self.sequences, &old);
        }
        index_insert(&mut self.index, &self.entities, &self.sequences, &record);
        self.entities.insert(key, record);
    }

    pub(crate) fn remove(&mut self, key: &EntityKey) {
        if let Some(old) = self.entities.remove(key) {
            index_remove(&mut self.index, &self.sequences, &old);
        }
        self.added_at.remove(key);
        self.sequences.remove(key);
        self.tombstones.insert(key.clone());
    }
}

fn direction_of(entities: &BTreeMap<EntityKey, EntityRecord>, slot: &EntityId) -> Option<SlotDirection> {
    match entities.get(&EntityKey::new(EntityKind::TransformSlot, slot.clone())) {
        Some(EntityRecord::TransformSlot(s)) => Some(s.direction),
        _ => None,
    }
}

fn index_insert(
    index: &mut Indexes,
    entities: &BTreeMap<EntityKey, EntityRecord>,
    sequences: &BTreeMap<EntityKey, u64>,
    record: &EntityRecord,
) {
    let key = record.key();
    let id = key.id.clone();
    match record {
        EntityRecord::DatasetRevision(r) => {
            let seq = sequences[&key];
            index.revisions_by_dataset.entry(r.dataset_id.clone()).or_default().insert(seq, id);
        }
        EntityRecord::TransformRevision(r) => {
            let seq = sequences[&key];
            index.revisions_by_transform.entry(r.transform_id.clone()).or_default().insert(seq, id);
        }
        EntityRecord::TransformSlot(s) => {
            index.slots_by_transform_revision.entry(s.transform_revision_id.clone()).or_default().insert(id);
        }
        EntityRecord::TransformExecution(e) => {
            index
                .executions_by_transform_revision
                .entry(e.transform_revision_id.clone())
                .or_default()
                .insert(id);
        }
        EntityRecord::TransformExecutionSlot(xs) => {
            index.slots_by_execution.entry(xs.transform_execution_id.clone()).or_default().insert(id.clone());
            if direction_of(entities, &xs.transform_slot_id) == Some(SlotDirection::Input) {
                index.consumers.entry(xs.dataset_revision_id.clone()).or_default().insert(id);
            }
        }
        _ => {}
    }
    for (_, target) in record.references() {
        index.referrers.entry(target).or_default().insert(key.clone());
    }
}

fn remove_nested<K: Ord, V: Ord>(map: &mut BTreeMap<K, BTreeSet<V>>, outer: &K, inner: &V) {
    if let Some(set) = map.get_mut(outer) {
        set.remove(inner);
        if set.is_empty() {
            map.remove(outer);
        }
    }
}

fn index_remove(
    index: &mut Indexes,
    sequences: &BTreeMap<EntityKey, u64>,
    record: &EntityRecord,
) {
    let key = record.key();
    let id = key.id.clone();
    match record {
        EntityRecord::DatasetRevision(r) => {
            if let (Some(m), Some(seq)) = (index.revisions_by_dataset.get_mut(&r.dataset_id), sequences.get(&key)) {
                m.remove(seq);
                if m.is_empty() {
                    index.revisions_by_dataset.remove(&r.dataset_id);
                }
            }
        }
        EntityRecord::TransformRevision(r) => {
            if let (Some(m), Some(seq)) = (index.revisions_by_transform.get_mut(&r.transform_id), sequences.get(&key)) {
                m.remove(seq);
                if m.is_empty() {
                    index.revisions_by_transform.remove(&r.transform_id);
                }
            }
        }
        EntityRecord::TransformSlot(s) => remove_nested(&mut index.slots_by_transform_revision, &s.transform_revision_id, &id),
        EntityRecord::TransformExecution(e) => {
            remove_nested(&mut index.executions_by_transform_revision, &e.transform_revision_id, &id)
        }
        EntityRecord::TransformExecutionSlot(xs) => {
            remove_nested(&mut index.slots_by_execution, &xs.transform_execution_id, &id);
            remove_nested(&mut index.consumers, &xs.dataset_revision_id, &id);
        }
        _ => {}
    }
    for (_, target) in record.references() {
        remove_nested(&mut index.referrers, &target, &key);
    }
}

impl Resolve for Store {
    fn get(&self, key: &EntityKey) -> Option<&EntityRecord> {
        self.entities.get(key)
    }

    fn committed_at(&self, key: &EntityKey) -> Option<u64> {
        self.added_at(key)
    }

    fn slots_of_transform_revision(&self, transform_revision: &EntityId) -> Vec<&TransformSlot> {
        self.index
            .slots_by_transform_revision
            .get(transform_revision)
            .into_iter()
            .flatten()
            .filter_map(|id| self.transform_slot(id))
            .collect()
    }
}
