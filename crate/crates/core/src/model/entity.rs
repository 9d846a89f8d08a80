//! Entity records: the unit stored, versioned, and referenced by the model.
//!
//! Every record flattens an [`EntityHeader`] plus its kind-specific fields
//! into one JSON object. Fields a reader does not recognise are kept in
//! `extra` and written back untouched.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use super::id::{EntityId, EntityKey, EntityKind};

/// Unrecognised fields carried through serialization verbatim.
pub type Extra = BTreeMap<String, Value>;

pub(crate) mod timestamp {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn format(ts: &DateTime<Utc>) -> String {
        ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
    }

    pub fn parse(s: &str) -> Result<DateTime<Utc>, chrono::ParseError> {
        DateTime::parse_from_rfc3339(s).map(|t| t.with_timezone(&Utc))
    }

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        parse(&raw).map_err(serde::de::Error::custom)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(ts: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
            match ts {
                Some(ts) => super::serialize(ts, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DateTime<Utc>>, D::Error> {
            match Option::<String>::deserialize(d)? {
                Some(raw) => parse(&raw).map(Some).map_err(serde::de::Error::custom),
                None => Ok(None),
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityHeader {
    /// Empty in drafts means "assign one at commit".
    #[serde(default)]
    pub id: EntityId,
    #[serde(default)]
    pub deprecated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "timestamp::option")]
    pub termination_sla: Option<DateTime<Utc>>,
}

impl EntityHeader {
    pub fn new(id: impl Into<EntityId>) -> Self {
        EntityHeader { id: id.into(), ..Default::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeDef {
    #[serde(flatten)]
    pub header: EntityHeader,
    #[serde(default)]
    pub external_registry_id: String,
    #[serde(default)]
    pub name: String,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeRevision {
    #[serde(flatten)]
    pub header: EntityHeader,
    pub type_id: EntityId,
    #[serde(default)]
    pub external_type_id: String,
    #[serde(default)]
    pub backwards_compatible: bool,
    #[serde(default)]
    pub version: String,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    #[serde(flatten)]
    pub header: EntityHeader,
    pub type_id: EntityId,
    #[serde(default)]
    pub external_provider_id: String,
    #[serde(default)]
    pub external_repo_id: String,
    #[serde(default)]
    pub name: String,
    #[serde(flatten)]
    pub extra: Extra,
}

/// Immutable snapshot of a dataset. Either produced by an execution (through
/// an output execution slot) or imported from an external source.
///
/// Its ordinal within the dataset is assigned by the store at commit time and
/// is available through [`crate::Store::revision_sequence`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRevision {
    #[serde(flatten)]
    pub header: EntityHeader,
    pub dataset_id: EntityId,
    pub type_revision_id: EntityId,
    #[serde(
        rename = "transform_execution_slot_id",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub producer_slot_id: Option<EntityId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_source_id: Option<String>,
    #[serde(default)]
    pub external_blob_id: String,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transform {
    #[serde(flatten)]
    pub header: EntityHeader,
    #[serde(default)]
    pub external_provider_id: String,
    #[serde(default)]
    pub external_repo_id: String,
    #[serde(default)]
    pub name: String,
    #[serde(flatten)]
    pub extra: Extra,
}

/// Declared property value. `Unknown` is distinct from `False`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tri {
    True,
    False,
    #[default]
    Unknown,
}

impl Tri {
    pub fn is_unknown(&self) -> bool {
        matches!(self, Tri::Unknown)
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Tri::True => Some(true),
            Tri::False => Some(false),
            Tri::Unknown => None,
        }
    }
}

impl From<Option<bool>> for Tri {
    fn from(v: Option<bool>) -> Self {
        match v {
            Some(true) => Tri::True,
            Some(false) => Tri::False,
            None => Tri::Unknown,
        }
    }
}

impl From<bool> for Tri {
    fn from(v: bool) -> Self {
        Tri::from(Some(v))
    }
}

impl Serialize for Tri {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.as_bool().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Tri {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Option::<bool>::deserialize(d).map(Tri::from)
    }
}

/// Names of the four built-in tracing properties.
pub const TRACING_PROPERTY_NAMES: [&str; 4] =
    ["deterministic", "reversible", "privacy_preserving", "generative"];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TracingProperties {
    #[serde(default, skip_serializing_if = "Tri::is_unknown")]
    pub deterministic: Tri,
    #[serde(default, skip_serializing_if = "Tri::is_unknown")]
    pub reversible: Tri,
    #[serde(default, skip_serializing_if = "Tri::is_unknown")]
    pub privacy_preserving: Tri,
    #[serde(default, skip_serializing_if = "Tri::is_unknown")]
    pub generative: Tri,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extensions: BTreeMap<String, String>,
}

impl TracingProperties {
    /// Looks up a built-in property by name. Extension values `"true"` and
    /// `"false"` are read as tri-state too; anything else is unknown.
    pub fn get(&self, name: &str) -> Tri {
        match name {
            "deterministic" => self.deterministic,
            "reversible" => self.reversible,
            "privacy_preserving" => self.privacy_preserving,
            "generative" => self.generative,
            other => match self.extensions.get(other).map(String::as_str) {
                Some("true") => Tri::True,
                Some("false") => Tri::False,
                _ => Tri::Unknown,
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformRevision {
    #[serde(flatten)]
    pub header: EntityHeader,
    pub transform_id: EntityId,
    #[serde(default)]
    pub external_commit_id: String,
    #[serde(default)]
    pub tracing_properties: TracingProperties,
    #[serde(default)]
    pub comment: String,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotDirection {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformSlot {
    #[serde(flatten)]
    pub header: EntityHeader,
    pub transform_revision_id: EntityId,
    pub type_revision_id: EntityId,
    #[serde(default)]
    pub name: String,
    pub direction: SlotDirection,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformExecution {
    #[serde(flatten)]
    pub header: EntityHeader,
    pub transform_revision_id: EntityId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow_execution_id: Option<EntityId>,
    #[serde(flatten)]
    pub extra: Extra,
}

/// Binds one dataset revision to one slot of an execution.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformExecutionSlot {
    #[serde(flatten)]
    pub header: EntityHeader,
    pub transform_execution_id: EntityId,
    pub transform_slot_id: EntityId,
    pub dataset_id: EntityId,
    pub dataset_revision_id: EntityId,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flow {
    #[serde(flatten)]
    pub header: EntityHeader,
    #[serde(default)]
    pub external_provider_id: String,
    #[serde(default)]
    pub external_flow_id: String,
    #[serde(default)]
    pub name: String,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowRevision {
    #[serde(flatten)]
    pub header: EntityHeader,
    pub flow_id: EntityId,
    #[serde(default)]
    pub external_revision_id: String,
    /// Stored, never interpreted.
    #[serde(default)]
    pub definition: String,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowExecution {
    #[serde(flatten)]
    pub header: EntityHeader,
    pub flow_revision_id: EntityId,
    /// Stored, never interpreted.
    #[serde(default)]
    pub execution_log: String,
    #[serde(default)]
    pub transform_execution_ids: Vec<EntityId>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    #[serde(flatten)]
    pub header: EntityHeader,
    #[serde(default)]
    pub items: Vec<EntityKey>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identity {
    #[serde(flatten)]
    pub header: EntityHeader,
    #[serde(default)]
    pub external_provider_id: String,
    #[serde(default)]
    pub external_actor_id: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, String>,
    #[serde(flatten)]
    pub extra: Extra,
}

/// Tagged union over every entity kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EntityRecord {
    Type(TypeDef),
    TypeRevision(TypeRevision),
    Dataset(Dataset),
    DatasetRevision(DatasetRevision),
    Transform(Transform),
    TransformRevision(TransformRevision),
    TransformSlot(TransformSlot),
    TransformExecution(TransformExecution),
    TransformExecutionSlot(TransformExecutionSlot),
    Flow(Flow),
    FlowRevision(FlowRevision),
    FlowExecution(FlowExecution),
    Group(Group),
    Identity(Identity),
}

macro_rules! each_variant {
    ($value:expr, $inner:ident => $body:expr) => {
        match $value {
            EntityRecord::Type($inner) => $body,
            EntityRecord::TypeRevision($inner) => $body,
            EntityRecord::Dataset($inner) => $body,
            EntityRecord::DatasetRevision($inner) => $body,
            EntityRecord::Transform($inner) => $body,
            EntityRecord::TransformRevision($inner) => $body,
            EntityRecord::TransformSlot($inner) => $body,
            EntityRecord::TransformExecution($inner) => $body,
            EntityRecord::TransformExecutionSlot($inner) => $body,
            EntityRecord::Flow($inner) => $body,
            EntityRecord::FlowRevision($inner) => $body,
            EntityRecord::FlowExecution($inner) => $body,
            EntityRecord::Group($inner) => $body,
            EntityRecord::Identity($inner) => $body,
        }
    };
}

impl EntityRecord {
    pub fn kind(&self) -> EntityKind {
        match self {
            EntityRecord::Type(_) => EntityKind::Type,
            EntityRecord::TypeRevision(_) => EntityKind::TypeRevision,
            EntityRecord::Dataset(_) => EntityKind::Dataset,
            EntityRecord::DatasetRevision(_) => EntityKind::DatasetRevision,
            EntityRecord::Transform(_) => EntityKind::Transform,
            EntityRecord::TransformRevision(_) => EntityKind::TransformRevision,
            EntityRecord::TransformSlot(_) => EntityKind::TransformSlot,
            EntityRecord::TransformExecution(_) => EntityKind::TransformExecution,
            EntityRecord::TransformExecutionSlot(_) => EntityKind::TransformExecutionSlot,
            EntityRecord::Flow(_) => EntityKind::Flow,
            EntityRecord::FlowRevision(_) => EntityKind::FlowRevision,
            EntityRecord::FlowExecution(_) => EntityKind::FlowExecution,
            EntityRecord::Group(_) => EntityKind::Group,
            EntityRecord::Identity(_) => EntityKind::Identity,
        }
    }

    pub fn header(&self) -> &EntityHeader {
        each_variant!(self, e => &e.header)
    }

    pub fn header_mut(&mut self) -> &mut EntityHeader {
        each_variant!(self, e => &mut e.header)
    }

    pub fn id(&self) -> &EntityId {
        &self.header().id
    }

    pub fn key(&self) -> EntityKey {
        EntityKey::new(self.kind(), self.id().clone())
    }

    /// Every outgoing reference, tagged with the field it comes from.
    pub fn references(&self) -> Vec<(&'static str, EntityKey)> {
        use EntityKind as K;
        let r = |field: &'static str, kind: K, id: &EntityId| (field, EntityKey::new(kind, id.clone()));
        match self {
            EntityRecord::Type(_) | EntityRecord::Transform(_) | EntityRecord::Flow(_) => vec![],
            EntityRecord::Identity(_) => vec![],
            EntityRecord::TypeRevision(e) => vec![r("type_id", K::Type, &e.type_id)],
            EntityRecord::Dataset(e) => vec![r("type_id", K::Type, &e.type_id)],
            EntityRecord::DatasetRevision(e) => {
                let mut out = vec![
                    r("dataset_id", K::Dataset, &e.dataset_id),
                    r("type_revision_id", K::TypeRevision, &e.type_revision_id),
                ];
                if let Some(slot) = &e.producer_slot_id {
                    out.push(r("transform_execution_slot_id", K::TransformExecutionSlot, slot));
                }
                out
            }
            EntityRecord::TransformRevision(e) => vec![r("transform_id", K::Transform, &e.transform_id)],
            EntityRecord::TransformSlot(e) => vec![
                r("transform_revision_id", K::TransformRevision, &e.transform_revision_id),
                r("type_revision_id", K::TypeRevision, &e.type_revision_id),
            ],
            EntityRecord::TransformExecution(e) => {
                let mut out =
                    vec![r("transform_revision_id", K::TransformRevision, &e.transform_revision_id)];
                if let Some(fe) = &e.flow_execution_id {
                    out.push(r("flow_execution_id", K::FlowExecution, fe));
                }
                out
            }
            EntityRecord::TransformExecutionSlot(e) => vec![
                r("transform_execution_id", K::TransformExecution, &e.transform_execution_id),
                r("transform_slot_id", K::TransformSlot, &e.transform_slot_id),
                r("dataset_id", K::Dataset, &e.dataset_id),
                r("dataset_revision_id", K::DatasetRevision, &e.dataset_revision_id),
            ],
            EntityRecord::FlowRevision(e) => vec![r("flow_id", K::Flow, &e.flow_id)],
            EntityRecord::FlowExecution(e) => {
                let mut out = vec![r("flow_revision_id", K::FlowRevision, &e.flow_revision_id)];
                out.extend(
                    e.transform_execution_ids
                        .iter()
                        .map(|id| r("transform_execution_ids", K::TransformExecution, id)),
                );
                out
            }
            EntityRecord::Group(e) => e.items.iter().map(|k| ("items", k.clone())).collect(),
        }
    }

    /// Serializes to a JSON object with a `kind` discriminator.
    pub fn to_json(&self) -> Value {
        let mut value = each_variant!(self, e => serde_json::to_value(e))
            .expect("entity records always serialize");
        if let Value::Object(map) = &mut value {
            map.insert("kind".into(), Value::String(self.kind().as_str().into()));
        }
        value
    }

    /// Parses a JSON object carrying a `kind` discriminator.
    pub fn from_json(value: Value) -> Result<Self, EntityDecodeError> {
        let Value::Object(mut map) = value else {
            return Err(EntityDecodeError::NotAnObject);
        };
        let kind = match map.remove("kind") {
            Some(Value::String(s)) => s,
            Some(_) => return Err(EntityDecodeError::MissingKind),
            None => return Err(EntityDecodeError::MissingKind),
        };
        let kind: EntityKind = kind.parse().map_err(|e: super::id::UnknownKind| EntityDecodeError::UnknownKind(e.0))?;
        Self::from_fields(kind, map).map_err(EntityDecodeError::Fields)
    }

    fn from_fields(kind: EntityKind, map: Map<String, Value>) -> Result<Self, serde_json::Error> {
        let v = Value::Object(map);
        Ok(match kind {
            EntityKind::Type => EntityRecord::Type(serde_json::from_value(v)?),
            EntityKind::TypeRevision => EntityRecord::TypeRevision(serde_json::from_value(v)?),
            EntityKind::Dataset => EntityRecord::Dataset(serde_json::from_value(v)?),
            EntityKind::DatasetRevision => EntityRecord::DatasetRevision(serde_json::from_value(v)?),
            EntityKind::Transform => EntityRecord::Transform(serde_json::from_value(v)?),
            EntityKind::TransformRevision => EntityRecord::TransformRevision(serde_json::from_value(v)?),
            EntityKind::TransformSlot => EntityRecord::TransformSlot(serde_json::from_value(v)?),
            EntityKind::TransformExecution => EntityRecord::TransformExecution(serde_json::from_value(v)?),
            EntityKind::TransformExecutionSlot => {
                EntityRecord::TransformExecutionSlot(serde_json::from_value(v)?)
            }
            EntityKind::Flow => EntityRecord::Flow(serde_json::from_value(v)?),
            EntityKind::FlowRevision => EntityRecord::FlowRevision(serde_json::from_value(v)?),
            EntityKind::FlowExecution => EntityRecord::FlowExecution(serde_json::from_value(v)?),
            EntityKind::Group => EntityRecord::Group(serde_json::from_value(v)?),
            EntityKind::Identity => EntityRecord::Identity(serde_json::from_value(v)?),
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EntityDecodeError {
    #[error("entity is not a JSON object")]
    NotAnObject,
    #[error("entity has no string `kind` field")]
    MissingKind,
    #[error("unknown entity kind `{0}`")]
    UnknownKind(String),
    #[error("invalid entity fields: {0}")]
    Fields(serde_json::Error),
}

impl Serialize for EntityRecord {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for EntityRecord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(d)?;
        EntityRecord::from_json(value).map_err(serde::de::Error::custom)
    }
}

macro_rules! impl_from_entity {
    ($($variant:ident => $ty:ty),* $(,)?) => {
        $(impl From<$ty> for EntityRecord {
            fn from(e: $ty) -> Self {
                EntityRecord::$variant(e)
            }
        })*
    };
}

impl_from_entity!(
    Type => TypeDef,
    TypeRevision => TypeRevision,
    Dataset => Dataset,
    DatasetRevision => DatasetRevision,
    Transform => Transform,
    TransformRevision => TransformRevision,
    TransformSlot => TransformSlot,
    TransformExecution => TransformExecution,
    TransformExecutionSlot => TransformExecutionSlot,
    Flow => Flow,
    FlowRevision => FlowRevision,
    FlowExecution => FlowExecution,
    Group => Group,
    Identity => Identity,
);
