//! Data-lineage tracking.
//!
//! Datasets, transforms and their executions are recorded as versioned
//! entities in an append-only transaction log. The live [`Store`] answers
//! lineage questions — what a revision was derived from, what depends on it,
//! every route between two revisions, what it takes to reproduce it — and any
//! earlier state can be rebuilt by replaying the log.
//!
//! * [`model`]: entity records, identifiers, references and validation rules.
//! * [`txn`]: transactions, the change log, replay, snapshots and diffs.
//! * [`trace`]: forward/backward traces, routes, closures and impacted leaves.
//! * [`query`]: reference resolution, group membership, deprecation reports.
//! * [`interchange`]: the JSONL log format and DOT export.
//! * [`record`]: helpers to record executions and their outputs.
//! * [`cli`]: the `lineage` command-line front end.

pub mod cli;
pub mod fixtures;
pub mod interchange;
pub mod model;
pub mod query;
pub mod record;
pub mod store;
pub mod trace;
pub mod txn;

pub use model::{EntityId, EntityKey, EntityKind, EntityRecord};
pub use store::Store;
pub use trace::{Direction, LineageNode, TraceOptions, TraceResult};
pub use txn::{ChangeLog, CommitError, Transaction, TransactionDraft};
