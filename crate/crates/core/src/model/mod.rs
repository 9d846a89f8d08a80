//! The entity model: identifiers, records, textual references and the
//! validation rules every committed entity satisfies.

mod entity;
mod id;
mod reference;
mod validate;

pub(crate) use entity::timestamp;
pub use entity::{
    Dataset, DatasetRevision, EntityDecodeError, EntityHeader, EntityRecord, Extra, Flow, FlowExecution,
    FlowRevision, Group, Identity, SlotDirection, TracingProperties, Transform, TransformExecution,
    TransformExecutionSlot, TransformRevision, TransformSlot, Tri, TypeDef, TypeRevision,
    TRACING_PROPERTY_NAMES,
};
pub use id::{EntityId, EntityKey, EntityKind, UnknownKind, RESERVED_CHARS};
pub use reference::{format_entity_ref, parse_entity_ref, EntityRef, Member, RefSyntaxError, RelativePos};
pub(crate) use validate::check_entity;
pub use validate::{validate_entity, Resolve, Rule, Severity, ValidationReport, Violation};
