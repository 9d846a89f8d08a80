//! JSON-lines changelog.
//!
//! Each line is one transaction serialized as canonical JSON: object keys
//! sorted, no insignificant whitespace, UTF-8, terminated by `\n`. The file
//! is append-only; sequence numbers must strictly increase from line to line.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use serde_json::Value;

use crate::model::EntityKind;
use crate::txn::{ChangeLog, ReplayError, Transaction, TransactionDraft};

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: malformed transaction: {cause}")]
    MalformedLine { line: usize, cause: String },
    #[error("line {line}: sequence {seq} does not follow {previous}")]
    NonMonotoneSeq { line: usize, seq: u64, previous: u64 },
    #[error("line {line}: unknown entity kind `{kind}`")]
    UnknownKind { line: usize, kind: String },
}

impl LogError {
    /// 1-based line the error refers to, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            LogError::Io(_) => None,
            LogError::MalformedLine { line, .. } | LogError::NonMonotoneSeq { line, .. } | LogError::UnknownKind { line, .. } => {
                Some(*line)
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Read(#[from] LogError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

/// The canonical single-line JSON image of a transaction, without newline.
pub fn to_canonical_line(txn: &Transaction) -> String {
    // serde_json's map type keeps keys sorted, so going through a Value
    // canonicalizes nested `extra` fields as well.
    let value = serde_json::to_value(txn).expect("transactions always serialize");
    serde_json::to_string(&value).expect("values always serialize")
}

pub fn write_log<W: Write>(mut out: W, transactions: &[Transaction]) -> io::Result<()> {
    for txn in transactions {
        out.write_all(to_canonical_line(txn).as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn check_kinds(value: &Value, line: usize) -> Result<(), LogError> {
    for list in ["additions", "modifications", "removals"] {
        let Some(items) = value.get(list).and_then(Value::as_array) else { continue };
        for item in items {
            if let Some(kind) = item.get("kind").and_then(Value::as_str) {
                if kind.parse::<EntityKind>().is_err() {
                    return Err(LogError::UnknownKind { line, kind: kind.to_owned() });
                }
            }
        }
    }
    Ok(())
}

/// Parses a changelog. Blank lines are ignored.
pub fn read_log<R: Read>(input: R) -> Result<Vec<Transaction>, LogError> {
    let mut out: Vec<Transaction> = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(&line).map_err(|e| LogError::MalformedLine { line: line_no, cause: e.to_string() })?;
        check_kinds(&value, line_no)?;
        let txn: Transaction =
            serde_json::from_value(value).map_err(|e| LogError::MalformedLine { line: line_no, cause: e.to_string() })?;
        if let Some(prev) = out.last() {
            if txn.seq <= prev.seq {
                return Err(LogError::NonMonotoneSeq { line: line_no, seq: txn.seq, previous: prev.seq });
            }
        }
        out.push(txn);
    }
    Ok(out)
}

/// Reads and replays a changelog file. A missing file is an empty log.
pub fn load_log(path: &Path) -> Result<ChangeLog, LoadError> {
    let transactions = match File::open(path) {
        Ok(f) => read_log(f)?,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(LogError::Io(e).into()),
    };
    Ok(ChangeLog::from_transactions(transactions)?)
}

/// Appends one transaction as a single write.
pub fn append_transaction(path: &Path, txn: &Transaction) -> io::Result<()> {
    let mut line = to_canonical_line(txn);
    line.push('\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(line.as_bytes())?;
    f.sync_data()
}

/// Parses a transaction draft. Drafts never carry a sequence number; the
/// store assigns it on commit.
pub fn read_draft(text: &str) -> Result<TransactionDraft, LogError> {
    let value: Value = serde_json::from_str(text).map_err(|e| LogError::MalformedLine { line: 1, cause: e.to_string() })?;
    if value.get("seq").is_some() {
        return Err(LogError::MalformedLine {
            line: 1,
            cause: "drafts must not carry `seq`; it is assigned on commit".into(),
        });
    }
    check_kinds(&value, 1)?;
    serde_json::from_value(value).map_err(|e| LogError::MalformedLine { line: 1, cause: e.to_string() })
}
