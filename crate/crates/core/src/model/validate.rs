//! Per-entity and cross-entity validation rules.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::entity::{EntityRecord, SlotDirection, TransformSlot, TRACING_PROPERTY_NAMES};
use super::id::{EntityId, EntityKey, EntityKind};

/// Read access needed by the validation rules. Implemented by the store and
/// by the transaction overlay used during commit.
pub trait Resolve {
    fn get(&self, key: &EntityKey) -> Option<&EntityRecord>;

    /// Sequence number of the transaction that added the entity, or `None`
    /// when it is unknown or still pending in the transaction being checked.
    fn committed_at(&self, key: &EntityKey) -> Option<u64>;

    /// Every slot declared on the given transform revision.
    fn slots_of_transform_revision(&self, transform_revision: &EntityId) -> Vec<&TransformSlot>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    InvalidId,
    DuplicateId,
    UnknownReference,
    UnknownEntity,
    DanglingReference,
    OverlappingChange,
    ImmutableField,
    SlaWithoutDeprecation,
    EmptyName,
    EmptyActor,
    ExclusiveOrigin,
    TypeParentMismatch,
    ProducerSlotMismatch,
    OutputBindingMismatch,
    ReservedExtensionKey,
    DuplicateSlot,
    SlotRevisionMismatch,
    RevisionDatasetMismatch,
    TypeMismatch,
    ForwardReference,
    FlowExecutionBackref,
    CyclicGroup,
    SequenceGap,
    IndexMismatch,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::InvalidId => "invalid-id",
            Rule::DuplicateId => "duplicate-id",
            Rule::UnknownReference => "unknown-reference",
            Rule::UnknownEntity => "unknown-entity",
            Rule::DanglingReference => "dangling-reference",
            Rule::OverlappingChange => "overlapping-change",
            Rule::ImmutableField => "immutable-field",
            Rule::SlaWithoutDeprecation => "sla-without-deprecation",
            Rule::EmptyName => "empty-name",
            Rule::EmptyActor => "empty-actor",
            Rule::ExclusiveOrigin => "exclusive-origin",
            Rule::TypeParentMismatch => "type-parent-mismatch",
            Rule::ProducerSlotMismatch => "producer-slot-mismatch",
            Rule::OutputBindingMismatch => "output-binding-mismatch",
            Rule::ReservedExtensionKey => "reserved-extension-key",
            Rule::DuplicateSlot => "duplicate-slot",
            Rule::SlotRevisionMismatch => "slot-revision-mismatch",
            Rule::RevisionDatasetMismatch => "revision-dataset-mismatch",
            Rule::TypeMismatch => "type-mismatch",
            Rule::ForwardReference => "forward-reference",
            Rule::FlowExecutionBackref => "flow-execution-backref",
            Rule::CyclicGroup => "cyclic-group",
            Rule::SequenceGap => "sequence-gap",
            Rule::IndexMismatch => "index-mismatch",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Entity the violation is reported against, if any.
    pub entity: Option<EntityKey>,
    pub field: String,
    pub rule: Rule,
    pub severity: Severity,
    /// The referenced entity involved, for referential rules.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<EntityKey>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        match &self.entity {
            Some(e) => write!(f, "{sev} [{}] {e}.{}: {}", self.rule, self.field, self.message),
            None => write!(f, "{sev} [{}] {}: {}", self.rule, self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.severity == Severity::Warning)
    }

    pub fn error_count(&self) -> usize {
        self.errors().count()
    }

    pub fn has_rule(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    pub(crate) fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }

    pub(crate) fn error(&mut self, entity: &EntityKey, field: &str, rule: Rule, message: impl Into<String>) {
        self.push(Violation {
            entity: Some(entity.clone()),
            field: field.to_owned(),
            rule,
            severity: Severity::Error,
            target: None,
            message: message.into(),
        });
    }

    pub(crate) fn unresolved(&mut self, entity: &EntityKey, field: &str, target: &EntityKey) {
        self.push(Violation {
            entity: Some(entity.clone()),
            field: field.to_owned(),
            rule: Rule::UnknownReference,
            severity: Severity::Error,
            target: Some(target.clone()),
            message: format!("{target} does not resolve"),
        });
    }

    pub(crate) fn warning(&mut self, entity: &EntityKey, field: &str, rule: Rule, message: impl Into<String>) {
        self.push(Violation {
            entity: Some(entity.clone()),
            field: field.to_owned(),
            rule,
            severity: Severity::Warning,
            target: None,
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks one entity against the given view of the store.
pub fn validate_entity(entity: &EntityRecord, store: &impl Resolve) -> ValidationReport {
    let mut report = ValidationReport::default();
    check_entity(entity, store, &mut report);
    report
}

macro_rules! lookup {
    ($r:expr, $kind:ident, $id:expr) => {
        match $r.get(&EntityKey::new(EntityKind::$kind, $id.clone())) {
            Some(EntityRecord::$kind(inner)) => Some(inner),
            _ => None,
        }
    };
}

pub(crate) fn check_entity(entity: &EntityRecord, r: &(impl Resolve + ?Sized), report: &mut ValidationReport) {
    let key = entity.key();
    let header = entity.header();

    if let Some(why) = header.id.syntax_error() {
        report.error(&key, "id", Rule::InvalidId, why);
    }
    if header.termination_sla.is_some() && !header.deprecated {
        report.error(&key, "termination_sla", Rule::SlaWithoutDeprecation, "termination SLA set on an entity that is not deprecated");
    }

    let mut all_resolve = true;
    for (field, target) in entity.references() {
        if r.get(&target).is_none() {
            report.unresolved(&key, field, &target);
            all_resolve = false;
        }
    }

    match entity {
        EntityRecord::Type(e) => require_name(&key, &e.name, report),
        EntityRecord::Dataset(e) => require_name(&key, &e.name, report),
        EntityRecord::Transform(e) => require_name(&key, &e.name, report),
        EntityRecord::Identity(e) => {
            if e.external_actor_id.is_empty() {
                report.error(&key, "external_actor_id", Rule::EmptyActor, "external_actor_id is empty");
            }
        }
        EntityRecord::TransformRevision(e) => {
            for name in TRACING_PROPERTY_NAMES {
                if e.tracing_properties.extensions.contains_key(name) {
                    report.error(
                        &key,
                        "tracing_properties.extensions",
                        Rule::ReservedExtensionKey,
                        format!("extension key `{name}` shadows a built-in property"),
                    );
                }
            }
        }
        EntityRecord::DatasetRevision(e) => {
            if e.producer_slot_id.is_some() == e.external_source_id.is_some() {
                report.error(
                    &key,
                    "transform_execution_slot_id",
                    Rule::ExclusiveOrigin,
                    "exactly one of transform_execution_slot_id and external_source_id must be set",
                );
            }
            let dataset = lookup!(r, Dataset, e.dataset_id);
            let type_rev = lookup!(r, TypeRevision, e.type_revision_id);
            if let (Some(ds), Some(tr)) = (dataset, type_rev) {
                if ds.type_id != tr.type_id {
                    report.error(
                        &key,
                        "type_revision_id",
                        Rule::TypeParentMismatch,
                        format!("type revision belongs to type {} but dataset has type {}", tr.type_id, ds.type_id),
                    );
                }
            }
            if let Some(slot_id) = &e.producer_slot_id {
                if let Some(xs) = lookup!(r, TransformExecutionSlot, slot_id) {
                    if xs.dataset_revision_id != e.header.id {
                        report.error(
                            &key,
                            "transform_execution_slot_id",
                            Rule::ProducerSlotMismatch,
                            format!("producer slot {slot_id} binds revision {}", xs.dataset_revision_id),
                        );
                    }
                    if let Some(slot) = lookup!(r, TransformSlot, xs.transform_slot_id) {
                        if slot.direction != SlotDirection::Output {
                            report.error(
                                &key,
                                "transform_execution_slot_id",
                                Rule::ProducerSlotMismatch,
                                format!("producer slot {slot_id} is not an output slot"),
                            );
                        }
                    }
                }
            }
        }
        EntityRecord::TransformSlot(e) => {
            let clash = r
                .slots_of_transform_revision(&e.transform_revision_id)
                .into_iter()
                .any(|other| other.header.id != e.header.id && other.name == e.name && other.direction == e.direction);
            if clash {
                report.error(
                    &key,
                    "name",
                    Rule::DuplicateSlot,
                    format!("transform revision {} already has a {:?} slot named {:?}", e.transform_revision_id, e.direction, e.name),
                );
            }
        }
        EntityRecord::TransformExecutionSlot(e) => check_execution_slot(&key, e, r, report),
        EntityRecord::FlowExecution(e) => {
            for te_id in &e.transform_execution_ids {
                if let Some(te) = lookup!(r, TransformExecution, te_id) {
                    if te.flow_execution_id.as_ref() != Some(&e.header.id) {
                        report.error(
                            &key,
                            "transform_execution_ids",
                            Rule::FlowExecutionBackref,
                            format!("transform execution {te_id} does not point back to this flow execution"),
                        );
                    }
                }
            }
        }
        EntityRecord::Group(e) => {
            if all_resolve && group_reaches(r, &e.items, &e.header.id) {
                report.error(&key, "items", Rule::CyclicGroup, format!("group {} contains itself", e.header.id));
            }
        }
        EntityRecord::TypeRevision(_)
        | EntityRecord::TransformExecution(_)
        | EntityRecord::Flow(_)
        | EntityRecord::FlowRevision(_) => {}
    }
}

fn require_name(key: &EntityKey, name: &str, report: &mut ValidationReport) {
    if name.is_empty() {
        report.error(key, "name", Rule::EmptyName, "name is empty");
    }
}

fn check_execution_slot(
    key: &EntityKey,
    e: &super::entity::TransformExecutionSlot,
    r: &(impl Resolve + ?Sized),
    report: &mut ValidationReport,
) {
    let exec = lookup!(r, TransformExecution, e.transform_execution_id);
    let slot = lookup!(r, TransformSlot, e.transform_slot_id);
    let rev = lookup!(r, DatasetRevision, e.dataset_revision_id);

    if let (Some(exec), Some(slot)) = (exec, slot) {
        if exec.transform_revision_id != slot.transform_revision_id {
            report.error(
                key,
                "transform_slot_id",
                Rule::SlotRevisionMismatch,
                format!(
                    "slot belongs to transform revision {} but execution runs {}",
                    slot.transform_revision_id, exec.transform_revision_id
                ),
            );
        }
    }
    if let Some(rev) = rev {
        if rev.dataset_id != e.dataset_id {
            report.error(
                key,
                "dataset_id",
                Rule::RevisionDatasetMismatch,
                format!("revision {} belongs to dataset {}, not {}", rev.header.id, rev.dataset_id, e.dataset_id),
            );
        }
    }
    let (Some(slot), Some(rev)) = (slot, rev) else { return };

    if slot.type_revision_id != rev.type_revision_id {
        report.warning(
            key,
            "dataset_revision_id",
            Rule::TypeMismatch,
            format!(
                "slot expects type revision {} but revision has {}",
                slot.type_revision_id, rev.type_revision_id
            ),
        );
    }

    match slot.direction {
        SlotDirection::Output => {
            if rev.producer_slot_id.as_ref() != Some(&key.id) {
                report.error(
                    key,
                    "dataset_revision_id",
                    Rule::OutputBindingMismatch,
                    format!("output binding to revision {} which does not name this slot as its producer", rev.header.id),
                );
            }
        }
        SlotDirection::Input => {
            if rev.producer_slot_id.as_ref() == Some(&key.id) {
                report.error(
                    key,
                    "dataset_revision_id",
                    Rule::ProducerSlotMismatch,
                    "revision names an input binding as its producer",
                );
            }
            let rev_key = EntityKey::new(EntityKind::DatasetRevision, rev.header.id.clone());
            let exec_key = EntityKey::new(EntityKind::TransformExecution, e.transform_execution_id.clone());
            let ok = match (r.committed_at(&rev_key), r.committed_at(&exec_key)) {
                (None, _) => false,
                (Some(_), None) => true,
                (Some(rev_at), Some(exec_at)) => rev_at < exec_at,
            };
            if !ok {
                report.error(
                    key,
                    "dataset_revision_id",
                    Rule::ForwardReference,
                    format!(
                        "input revision {} was not committed before execution {}",
                        rev.header.id, e.transform_execution_id
                    ),
                );
            }
        }
    }
}

/// True if `target` is reachable from `items` through nested groups.
fn group_reaches(r: &(impl Resolve + ?Sized), items: &[EntityKey], target: &EntityId) -> bool {
    let mut stack: Vec<&EntityKey> = items.iter().filter(|k| k.kind == EntityKind::Group).collect();
    let mut seen = BTreeSet::new();
    while let Some(k) = stack.pop() {
        if &k.id == target {
            return true;
        }
        if !seen.insert(k.id.clone()) {
            continue;
        }
        if let Some(EntityRecord::Group(g)) = r.get(k) {
            stack.extend(g.items.iter().filter(|i| i.kind == EntityKind::Group));
        }
    }
    false
}
