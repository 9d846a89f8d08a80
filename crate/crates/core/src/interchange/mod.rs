//! On-disk and export formats.
//!
//! * [`log`]: the changelog as JSON lines, one canonical transaction per line.
//! * [`dot`]: Graphviz rendering of traced lineage.

pub mod dot;
pub mod log;

pub use dot::{export_dot, DotOptions};
pub use log::{
    append_transaction, load_log, read_draft, read_log, to_canonical_line, write_log, LoadError, LogError,
};
