//! Event-sourced change mechanism.
//!
//! Every change to the model is a [`Transaction`]: an identity-stamped batch
//! of additions, modifications (full replacement images) and removals. The
//! [`ChangeLog`] validates drafts atomically against the live store, appends
//! accepted transactions, and rebuilds any earlier state by replay.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{
    check_entity, timestamp, EntityId, EntityKey, EntityKind, EntityRecord, Extra, Resolve, Rule, Severity,
    TransformSlot, ValidationReport, Violation,
};
use crate::store::Store;

/// A committed transaction as recorded in the changelog.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub seq: u64,
    pub identity_id: EntityId,
    #[serde(with = "timestamp")]
    pub timestamp: DateTime<Utc>,
    #[serde(default)]
    pub additions: Vec<EntityRecord>,
    #[serde(default)]
    pub modifications: Vec<EntityRecord>,
    #[serde(default)]
    pub removals: Vec<EntityKey>,
    #[serde(default)]
    pub comment: Option<String>,
    #[serde(flatten)]
    pub extra: Extra,
}

/// A transaction before the store has assigned its sequence number.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionDraft {
    /// May be left out when the committer supplies the identity separately.
    #[serde(default)]
    pub identity_id: EntityId,
    /// Committer clock; the store falls back to its own when absent.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "timestamp::option")]
    pub timestamp: Option<DateTime<Utc>>,
    #[serde(default)]
    pub additions: Vec<EntityRecord>,
    #[serde(default)]
    pub modifications: Vec<EntityRecord>,
    #[serde(default)]
    pub removals: Vec<EntityKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl TransactionDraft {
    pub fn new(identity_id: impl Into<EntityId>) -> Self {
        TransactionDraft { identity_id: identity_id.into(), ..Default::default() }
    }

    #[allow(clippy::should_implement_trait)] // builder step, not arithmetic
    pub fn add(mut self, entity: impl Into<EntityRecord>) -> Self {
        self.additions.push(entity.into());
        self
    }

    pub fn modify(mut self, entity: impl Into<EntityRecord>) -> Self {
        self.modifications.push(entity.into());
        self
    }

    pub fn remove(mut self, kind: EntityKind, id: impl Into<EntityId>) -> Self {
        self.removals.push(EntityKey::new(kind, id));
        self
    }

    pub fn at(mut self, timestamp: DateTime<Utc>) -> Self {
        self.timestamp = Some(timestamp);
        self
    }

    pub fn comment(mut self, comment: impl Into<String>) -> Self {
        self.comment = Some(comment.into());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.additions.is_empty() && self.modifications.is_empty() && self.removals.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitOutcome {
    pub seq: u64,
    /// Non-fatal findings, e.g. slot/revision type mismatches.
    pub warnings: ValidationReport,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum CommitError {
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: EntityKind, id: EntityId, report: ValidationReport },
    #[error("unknown reference in `{field}`: {target}")]
    UnknownReference { field: String, target: EntityKey, report: ValidationReport },
    #[error("immutable field `{field}` of {kind} `{id}` was modified")]
    ImmutableFieldModified { kind: EntityKind, id: EntityId, field: String, report: ValidationReport },
    #[error("group `{id}` would contain itself")]
    CyclicGroup { id: EntityId, report: ValidationReport },
    #[error("transaction failed validation with {} error(s)", .0.error_count())]
    ValidationFailed(ValidationReport),
}

impl CommitError {
    /// The complete report, of which the variant names the first error.
    pub fn report(&self) -> &ValidationReport {
        match self {
            CommitError::DuplicateId { report, .. }
            | CommitError::UnknownReference { report, .. }
            | CommitError::ImmutableFieldModified { report, .. }
            | CommitError::CyclicGroup { report, .. }
            | CommitError::ValidationFailed(report) => report,
        }
    }

    fn from_report(report: ValidationReport) -> Self {
        let Some(first) = report.errors().next().cloned() else {
            return CommitError::ValidationFailed(report);
        };
        let entity = first.entity.clone();
        match (first.rule, entity) {
            (Rule::DuplicateId, Some(e)) => CommitError::DuplicateId { kind: e.kind, id: e.id, report },
            (Rule::UnknownReference, _) if first.target.is_some() => CommitError::UnknownReference {
                field: first.field,
                target: first.target.expect("checked"),
                report,
            },
            (Rule::ImmutableField, Some(e)) => {
                CommitError::ImmutableFieldModified { kind: e.kind, id: e.id, field: first.field, report }
            }
            (Rule::CyclicGroup, Some(e)) => CommitError::CyclicGroup { id: e.id, report },
            _ => CommitError::ValidationFailed(report),
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ReplayError {
    #[error("replay diverged at transaction {seq}:\n{report}")]
    Diverged { seq: u64, report: ValidationReport },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("sequence {seq} is out of range 0..={last_seq}")]
pub struct OutOfRange {
    pub seq: u64,
    pub last_seq: u64,
}

/// Entities whose live state differs between two points of the log.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ChangeSet {
    pub added: Vec<EntityKey>,
    pub modified: Vec<EntityKey>,
    pub removed: Vec<EntityKey>,
}

impl ChangeSet {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.modified.is_empty() && self.removed.is_empty()
    }
}

/// Ordered transactions plus the live store they produce.
///
/// Commits take `&mut self`, so a single writer is enforced by the borrow
/// checker. [`ChangeLog::snapshot`] hands out shared immutable stores that
/// stay valid while later commits proceed.
#[derive(Debug, Clone, Default)]
pub struct ChangeLog {
    transactions: Vec<Transaction>,
    live: Arc<Store>,
}

impl ChangeLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a log from recorded transactions, validating each one.
    pub fn from_transactions(transactions: Vec<Transaction>) -> Result<Self, ReplayError> {
        let live = replay(&transactions)?;
        Ok(ChangeLog { transactions, live: Arc::new(live) })
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.transactions
    }

    pub fn into_transactions(self) -> Vec<Transaction> {
        self.transactions
    }

    pub fn live(&self) -> &Store {
        &self.live
    }

    /// Shared handle to the current live store.
    pub fn snapshot(&self) -> Arc<Store> {
        Arc::clone(&self.live)
    }

    pub fn last_seq(&self) -> u64 {
        self.live.last_seq()
    }

    /// Validates and appends a transaction. On error nothing changes.
    pub fn commit(&mut self, draft: TransactionDraft) -> Result<CommitOutcome, CommitError> {
        let TransactionDraft { identity_id, timestamp, mut additions, modifications, removals, comment, extra } = draft;
        for record in &mut additions {
            if record.id().is_empty() {
                record.header_mut().id = EntityId::generate();
            }
        }
        let report = check_changes(&self.live, &identity_id, &additions, &modifications, &removals);
        if report.has_errors() {
            return Err(CommitError::from_report(report));
        }
        let seq = self.live.last_seq() + 1;
        let txn = Transaction {
            seq,
            identity_id,
            timestamp: timestamp.unwrap_or_else(Utc::now),
            additions,
            modifications,
            removals,
            comment,
            extra,
        };
        apply(Arc::make_mut(&mut self.live), &txn);
        self.transactions.push(txn);
        Ok(CommitOutcome { seq, warnings: report })
    }

    /// State immediately after transaction `seq`; `0` is the empty store.
    pub fn snapshot_at(&self, seq: u64) -> Result<Store, OutOfRange> {
        let last_seq = self.last_seq();
        if seq > last_seq {
            return Err(OutOfRange { seq, last_seq });
        }
        if seq == last_seq {
            return Ok((*self.live).clone());
        }
        let mut store = Store::new();
        for txn in self.transactions.iter().take_while(|t| t.seq <= seq) {
            apply(&mut store, txn);
        }
        Ok(store)
    }

    /// Entities whose live state differs between `seq_a` and `seq_b`.
    pub fn diff(&self, seq_a: u64, seq_b: u64) -> Result<ChangeSet, OutOfRange> {
        let before = self.snapshot_at(seq_a)?;
        let after = self.snapshot_at(seq_b)?;
        Ok(diff_stores(&before, &after))
    }
}

/// Set difference of two stores' live entities.
pub fn diff_stores(before: &Store, after: &Store) -> ChangeSet {
    let mut out = ChangeSet::default();
    for record in after.entities() {
        match before.get(&record.key()) {
            None => out.added.push(record.key()),
            Some(old) if old != record => out.modified.push(record.key()),
            Some(_) => {}
        }
    }
    out.removed = before.keys().filter(|k| !after.contains(k)).cloned().collect();
    out
}

/// Rebuilds the store from an ordered list of transactions.
pub fn replay(transactions: &[Transaction]) -> Result<Store, ReplayError> {
    let mut store = Store::new();
    for txn in transactions {
        let expected = store.last_seq() + 1;
        if txn.seq != expected {
            let mut report = ValidationReport::default();
            report.push(Violation {
                entity: None,
                field: "seq".into(),
                rule: Rule::SequenceGap,
                severity: Severity::Error,
                target: None,
                message: format!("expected seq {expected}, found {}", txn.seq),
            });
            return Err(ReplayError::Diverged { seq: txn.seq, report });
        }
        let report = check_changes(&store, &txn.identity_id, &txn.additions, &txn.modifications, &txn.removals);
        if report.has_errors() {
            return Err(ReplayError::Diverged { seq: txn.seq, report });
        }
        apply(&mut store, txn);
    }
    Ok(store)
}

fn apply(store: &mut Store, txn: &Transaction) {
    for key in &txn.removals {
        store.remove(key);
    }
    for record in &txn.modifications {
        store.replace(record.clone());
    }
    // Slots must be present before the execution slots that bind them.
    let mut additions: Vec<&EntityRecord> = txn.additions.iter().collect();
    additions.sort_by_key(|r| r.kind());
    for record in additions {
        store.insert(record.clone(), txn.seq);
    }
    store.set_last_seq(txn.seq);
}

/// Live store with a pending transaction layered on top.
struct Overlay<'a> {
    base: &'a Store,
    upserts: HashMap<EntityKey, &'a EntityRecord>,
    pending: HashSet<EntityKey>,
    removed: HashSet<EntityKey>,
    slots: HashMap<&'a EntityId, Vec<&'a TransformSlot>>,
}

impl Resolve for Overlay<'_> {
    fn get(&self, key: &EntityKey) -> Option<&EntityRecord> {
        if self.removed.contains(key) {
            return None;
        }
        match self.upserts.get(key) {
            Some(r) => Some(r),
            None => self.base.get(key),
        }
    }

    fn committed_at(&self, key: &EntityKey) -> Option<u64> {
        if self.pending.contains(key) || self.removed.contains(key) {
            None
        } else {
            self.base.added_at(key)
        }
    }

    fn slots_of_transform_revision(&self, transform_revision: &EntityId) -> Vec<&TransformSlot> {
        let mut out: Vec<&TransformSlot> = self
            .base
            .slots_of_transform_revision(transform_revision)
            .into_iter()
            .filter(|s| {
                let key = EntityKey::new(EntityKind::TransformSlot, s.header.id.clone());
                !self.removed.contains(&key) && !self.upserts.contains_key(&key)
            })
            .collect();
        if let Some(extra) = self.slots.get(transform_revision) {
            out.extend(extra.iter().copied());
        }
        out
    }
}

/// Fields of these kinds are frozen after commit except for the header.
fn header_only(kind: EntityKind) -> bool {
    matches!(
        kind,
        EntityKind::DatasetRevision
            | EntityKind::TransformExecution
            | EntityKind::TransformExecutionSlot
            | EntityKind::FlowExecution
    )
}

/// First non-header field whose value differs between two images.
fn changed_field(old: &EntityRecord, new: &EntityRecord, only: Option<&[&str]>) -> Option<String> {
    let strip = |r: &EntityRecord| -> BTreeMap<String, Value> {
        match r.to_json() {
            Value::Object(m) => m
                .into_iter()
                .filter(|(k, _)| !matches!(k.as_str(), "deprecated" | "termination_sla" | "id"))
                .collect(),
            _ => BTreeMap::new(),
        }
    };
    let (a, b) = (strip(old), strip(new));
    let fields: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    let changed = fields
        .into_iter()
        .filter(|f| only.is_none_or(|only| only.contains(&f.as_str())))
        .find(|f| a.get(*f) != b.get(*f))
        .cloned();
    changed
}

fn check_changes(
    base: &Store,
    identity_id: &EntityId,
    additions: &[EntityRecord],
    modifications: &[EntityRecord],
    removals: &[EntityKey],
) -> ValidationReport {
    let mut report = ValidationReport::default();

    // Structural: each key appears at most once across the three lists.
    let mut seen: HashSet<EntityKey> = HashSet::new();
    let all_keys = additions
        .iter()
        .map(EntityRecord::key)
        .chain(modifications.iter().map(EntityRecord::key))
        .chain(removals.iter().cloned());
    for key in all_keys {
        if !seen.insert(key.clone()) {
            report.error(&key, "id", Rule::OverlappingChange, "entity appears more than once in the transaction");
        }
    }

    for record in additions {
        let key = record.key();
        if base.contains(&key) || base.is_tombstoned(&key) {
            report.error(&key, "id", Rule::DuplicateId, format!("{key} is already in use"));
        }
    }
    for record in modifications {
        let key = record.key();
        match base.get(&key) {
            None => report.error(&key, "id", Rule::UnknownEntity, format!("cannot modify {key}: not live")),
            Some(old) => {
                let frozen = if header_only(key.kind) {
                    changed_field(old, record, None)
                } else if key.kind == EntityKind::TransformRevision {
                    changed_field(old, record, Some(&["transform_id"]))
                } else {
                    None
                };
                if let Some(field) = frozen {
                    report.error(&key, &field, Rule::ImmutableField, format!("`{field}` cannot change after commit"));
                }
            }
        }
    }
    for key in removals {
        if !base.contains(key) {
            report.error(key, "id", Rule::UnknownEntity, format!("cannot remove {key}: not live"));
        }
    }

    let mut overlay = Overlay {
        base,
        upserts: HashMap::new(),
        pending: HashSet::new(),
        removed: removals.iter().cloned().collect(),
        slots: HashMap::new(),
    };
    for record in additions {
        overlay.pending.insert(record.key());
    }
    for record in additions.iter().chain(modifications) {
        overlay.upserts.insert(record.key(), record);
        if let EntityRecord::TransformSlot(s) = record {
            overlay.slots.entry(&s.transform_revision_id).or_default().push(s);
        }
    }

    let identity = EntityKey::new(EntityKind::Identity, identity_id.clone());
    if overlay.get(&identity).is_none() {
        report.push(Violation {
            entity: None,
            field: "identity_id".into(),
            rule: Rule::UnknownReference,
            severity: Severity::Error,
            target: Some(identity),
            message: format!("identity `{identity_id}` does not resolve"),
        });
    }

    for record in additions.iter().chain(modifications) {
        check_entity(record, &overlay, &mut report);
    }

    // Untouched entities that reference something modified or removed must
    // still hold against the new state.
    let mut dependents: BTreeSet<&EntityKey> = BTreeSet::new();
    for key in modifications.iter().map(EntityRecord::key).chain(removals.iter().cloned()) {
        for referrer in base.referrers_of(&key) {
            if !overlay.removed.contains(referrer) && !overlay.upserts.contains_key(referrer) {
                dependents.insert(referrer);
            }
        }
    }
    for key in dependents {
        if let Some(record) = base.get(key) {
            let mut sub = ValidationReport::default();
            check_entity(record, &overlay, &mut sub);
            for mut v in sub.violations {
                if v.rule == Rule::UnknownReference
                    && v.target.as_ref().is_some_and(|t| overlay.removed.contains(t))
                {
                    v.rule = Rule::DanglingReference;
                    v.message = format!("{} is removed but still referenced", v.target.as_ref().expect("checked"));
                }
                report.push(v);
            }
        }
    }
    report
}
