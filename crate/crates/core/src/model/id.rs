//! Entity identifiers and kinds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Characters that may never appear inside an identifier. They carry meaning
/// in the textual reference notation (`DS:R`, `[a, b]`).
pub const RESERVED_CHARS: [char; 4] = [':', '[', ']', ','];

/// The closed set of entity kinds tracked by the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityKind {
    Type,
    TypeRevision,
    Dataset,
    DatasetRevision,
    Transform,
    TransformRevision,
    TransformSlot,
    TransformExecution,
    TransformExecutionSlot,
    Flow,
    FlowRevision,
    FlowExecution,
    Group,
    Identity,
}

impl EntityKind {
    pub const ALL: [EntityKind; 14] = [
        EntityKind::Type,
        EntityKind::TypeRevision,
        EntityKind::Dataset,
        EntityKind::DatasetRevision,
        EntityKind::Transform,
        EntityKind::TransformRevision,
        EntityKind::TransformSlot,
        EntityKind::TransformExecution,
        EntityKind::TransformExecutionSlot,
        EntityKind::Flow,
        EntityKind::FlowRevision,
        EntityKind::FlowExecution,
        EntityKind::Group,
        EntityKind::Identity,
    ];

    /// Wire name used as the `kind` discriminator.
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Type => "type",
            EntityKind::TypeRevision => "type_revision",
            EntityKind::Dataset => "dataset",
            EntityKind::DatasetRevision => "dataset_revision",
            EntityKind::Transform => "transform",
            EntityKind::TransformRevision => "transform_revision",
            EntityKind::TransformSlot => "transform_slot",
            EntityKind::TransformExecution => "transform_execution",
            EntityKind::TransformExecutionSlot => "transform_execution_slot",
            EntityKind::Flow => "flow",
            EntityKind::FlowRevision => "flow_revision",
            EntityKind::FlowExecution => "flow_execution",
            EntityKind::Group => "group",
            EntityKind::Identity => "identity",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown entity kind `{0}`")]
pub struct UnknownKind(pub String);

impl FromStr for EntityKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownKind(s.to_owned()))
    }
}

impl Serialize for EntityKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EntityKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Opaque identifier value. Unique within its [`EntityKind`].
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(String);

impl EntityId {
    pub fn new(value: impl Into<String>) -> Self {
        EntityId(value.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Returns the reason the value is not a legal identifier, if any.
    pub fn syntax_error(&self) -> Option<&'static str> {
        if self.0.is_empty() {
            Some("identifier is empty")
        } else if self.0.chars().any(char::is_whitespace) {
            Some("identifier contains whitespace")
        } else if self.0.contains(RESERVED_CHARS) {
            Some("identifier contains a reserved character")
        } else {
            None
        }
    }

    pub fn is_valid(&self) -> bool {
        self.syntax_error().is_none()
    }

    /// Fresh 128-bit random identifier rendered as 26 base32 characters.
    pub fn generate() -> Self {
        EntityId(encode_base32(uuid::Uuid::new_v4().as_u128()))
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_owned())
    }
}

impl From<String> for EntityId {
    fn from(s: String) -> Self {
        EntityId(s)
    }
}

impl AsRef<str> for EntityId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for EntityId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

const CROCKFORD: &[u8; 32] = b"0123456789ABCDEFGHJKMNPQRSTVWXYZ";

fn encode_base32(mut value: u128) -> String {
    // 26 * 5 = 130 bits; the two leading bits are always zero.
    let mut out = [0u8; 26];
    for slot in out.iter_mut().rev() {
        *slot = CROCKFORD[(value & 0x1f) as usize];
        value >>= 5;
    }
    String::from_utf8(out.to_vec()).expect("alphabet is ascii")
}

/// Kind-qualified identifier: the key under which an entity is stored.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityKey {
    pub kind: EntityKind,
    pub id: EntityId,
}

impl EntityKey {
    pub fn new(kind: EntityKind, id: impl Into<EntityId>) -> Self {
        EntityKey { kind, id: id.into() }
    }
}

impl fmt::Display for EntityKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.kind, self.id)
    }
}
