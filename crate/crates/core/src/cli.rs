//! The `lineage` command-line front end.
//!
//! Every command reads the JSONL changelog named by `--log` (or
//! `LINEAGE_LOG`), replays it, and answers from the live store or, with
//! `--at`, from a historical snapshot. `commit` appends exactly one line
//! while holding an exclusive lock on the log file.
//!
//! Exit codes: `0` success, `1` domain or I/O error, `2` usage error.

use std::ffi::OsString;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::interchange::{self, DotOptions, LoadError, LogError};
use crate::model::{parse_entity_ref, EntityHeader, EntityId, EntityKey, EntityKind, Identity, RefSyntaxError, ValidationReport};
use crate::query::{self, QueryError, Resolved};
use crate::store::Store;
use crate::trace::{self, Direction, LineageNode, PrunePredicate, TraceError, TraceOptions};
use crate::txn::{ChangeLog, CommitError, OutOfRange, TransactionDraft};

#[derive(Debug, Parser)]
#[command(name = "lineage", version, about = "Record and query data lineage")]
struct Cli {
    /// Changelog file (JSON lines).
    #[arg(long, env = "LINEAGE_LOG", global = true)]
    log: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    /// Answer queries from the state right after this transaction.
    #[arg(long, global = true)]
    at: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Debug, clap::Args)]
struct TraceArgs {
    /// Skip expanding past executions whose transform revision has
    /// `<property>=<true|false>`; repeatable.
    #[arg(long = "prune", value_name = "PROPERTY=VALUE")]
    prune: Vec<PrunePredicate>,
    /// Maximum depth in executions.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    max_depth: Option<u32>,
    /// Only traverse members of this group.
    #[arg(long, value_name = "GROUP")]
    group: Option<EntityId>,
}

impl TraceArgs {
    fn options(&self) -> TraceOptions {
        TraceOptions {
            prune_on: self.prune.iter().cloned().collect(),
            max_depth: self.max_depth,
            restrict_to_group: self.group.clone(),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create an empty changelog.
    Init,
    /// Validate a transaction draft (JSON file or `-` for stdin) and append it.
    Commit {
        draft: PathBuf,
        /// Commit as this identity, overriding the draft's `identity_id`.
        #[arg(long, conflicts_with = "actor")]
        identity: Option<EntityId>,
        /// Commit as `<provider>/<actor>`, registering the identity if new.
        #[arg(long)]
        actor: Option<String>,
    },
    /// Trace lineage from a dataset revision.
    Trace {
        #[arg(value_parser = ["forward", "backward"])]
        direction: String,
        revision: String,
        #[command(flatten)]
        args: TraceArgs,
    },
    /// Revisions of a dataset that a revision was derived from.
    Ancestors {
        revision: String,
        #[arg(long)]
        dataset: EntityId,
    },
    /// Every route along which SOURCE contributed to TARGET.
    Route {
        target: String,
        source: String,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Revisions, transform revisions, types and external ids behind a revision.
    Closure { revision: String },
    /// Unconsumed revisions downstream of a revision.
    Leaves { revision: String },
    /// Resolve a textual reference.
    Resolve { reference: String },
    /// List the entities of the store.
    Snapshot,
    /// Entities added, modified and removed between two transactions.
    Diff { from: u64, to: u64 },
    /// Everything affected by deprecating an entity.
    DeprecationReport { reference: String },
    /// Render traced lineage as Graphviz DOT.
    ExportDot {
        revisions: Vec<String>,
        #[arg(long, default_value = "forward", value_parser = ["forward", "backward"])]
        direction: String,
        #[command(flatten)]
        args: TraceArgs,
        /// Lay the graph out left to right.
        #[arg(long)]
        lr: bool,
    },
    /// Replay the changelog and report its size.
    Validate,
    /// Check a draft against the current store without committing.
    ValidateFile { draft: PathBuf },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Load { path: PathBuf, source: LoadError },
    #[error("draft: {0}")]
    Draft(LogError),
    #[error("commit rejected: {0}")]
    Commit(CommitError),
    #[error("draft is invalid: {} error(s)", .0.error_count())]
    Invalid(ValidationReport),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("reference: {0}")]
    Reference(#[from] RefSyntaxError),
    #[error("`{0}` is not a dataset revision")]
    NotARevision(String),
    #[error("{0}")]
    OutOfRange(#[from] OutOfRange),
    #[error("{0}")]
    AlreadyInitialized(String),
    #[error("{}: log is locked by another writer", .0.display())]
    Locked(PathBuf),
    #[error("store invariant scan found {} error(s)", .0.error_count())]
    Inconsistent(ValidationReport),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Load { .. } => "log",
            CliError::Draft(_) => "draft",
            CliError::Commit(_) => "commit_rejected",
            CliError::Invalid(_) => "invalid_draft",
            CliError::Query(_) => "query",
            CliError::Trace(_) => "trace",
            CliError::Reference(_) => "reference_syntax",
            CliError::NotARevision(_) => "not_a_revision",
            CliError::OutOfRange(_) => "out_of_range",
            CliError::AlreadyInitialized(_) => "already_initialized",
            CliError::Locked(_) => "locked",
            CliError::Inconsistent(_) => "inconsistent_store",
        }
    }

    fn report(&self) -> Option<&ValidationReport> {
        match self {
            CliError::Commit(e) => Some(e.report()),
            CliError::Invalid(r) | CliError::Inconsistent(r) => Some(r),
            _ => None,
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Takes the exclusive writer lock without waiting.
fn lock_exclusive(file: &File, path: &Path) -> Result<(), CliError> {
    match file.try_lock() {
        Ok(()) => Ok(()),
        Err(std::fs::TryLockError::WouldBlock) => Err(CliError::Locked(path.to_owned())),
        Err(std::fs::TryLockError::Error(e)) => Err(io_err(path)(e)),
    }
}

fn open_for_write(path: &Path) -> Result<File, CliError> {
    let file = OpenOptions::new().create(true).append(true).read(true).open(path).map_err(io_err(path))?;
    lock_exclusive(&file, path)?;
    Ok(file)
}

/// Whether `--format json` was requested, looked up before parsing so that
/// usage errors can be reported as JSON too.
fn wants_json<T: AsRef<std::ffi::OsStr>>(argv: &[T]) -> bool {
    let args: Vec<&std::ffi::OsStr> = argv.iter().map(AsRef::as_ref).collect();
    args.windows(2).any(|w| w[0] == "--format" && w[1] == "json") || args.iter().any(|a| *a == "--format=json")
}

fn write_error(err: &mut dyn Write, json_output: bool, e: &CliError) {
    if json_output {
        let mut body = json!({ "kind": e.kind(), "message": e.to_string() });
        if let Some(report) = e.report() {
            body["violations"] = serde_json::to_value(&report.violations).unwrap_or_default();
        }
        let _ = writeln!(err, "{}", json!({ "error": body }));
    } else {
        let _ = writeln!(err, "error: {e}");
        if let Some(report) = e.report() {
            let _ = write!(err, "{report}");
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_owned(), source }
}

/// Runs the CLI with explicit arguments (including the program name) and
/// output streams; returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = out.write_all(e.render().to_string().as_bytes());
                return 0;
            }
            if wants_json(&argv) {
                write_error(err, true, &CliError::Usage(e.render().to_string().trim_end().to_owned()));
            } else {
                let _ = err.write_all(e.render().to_string().as_bytes());
            }
            return 2;
        }
    };
    let json_output = cli.format == Format::Json;
    match execute(cli, out) {
        Ok(()) => 0,
        // A reader that stopped early (`| head`) is not a failure.
        Err(CliError::Io { source, .. }) if source.kind() == io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            write_error(err, json_output, &e);
            e.exit_code()
        }
    }
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn read_locked(file: &mut File, path: &Path) -> Result<ChangeLog, CliError> {
    file.seek(SeekFrom::Start(0)).map_err(io_err(path))?;
    let transactions = interchange::read_log(&mut *file)
        .map_err(|e| CliError::Load { path: path.to_owned(), source: LoadError::Read(e) })?;
    ChangeLog::from_transactions(transactions)
        .map_err(|e| CliError::Load { path: path.to_owned(), source: LoadError::Replay(e) })
}

fn load(path: &Path) -> Result<ChangeLog, CliError> {
    let mut file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(ChangeLog::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    match file.try_lock_shared() {
        Ok(()) => {}
        Err(std::fs::TryLockError::WouldBlock) => return Err(CliError::Locked(path.to_owned())),
        Err(std::fs::TryLockError::Error(e)) => return Err(io_err(path)(e)),
    }
    read_locked(&mut file, path)
}

fn read_draft_file(path: &Path) -> Result<TransactionDraft, CliError> {
    let mut text = String::new();
    if path.as_os_str() == "-" {
        io::stdin().read_to_string(&mut text).map_err(io_err(path))?;
    } else {
        File::open(path).and_then(|mut f| f.read_to_string(&mut text)).map_err(io_err(path))?;
    }
    interchange::read_draft(&text).map_err(CliError::Draft)
}

fn parse_ref(text: &str) -> Result<crate::model::EntityRef, CliError> {
    Ok(parse_entity_ref(text)?)
}

fn resolve_key(store: &Store, text: &str) -> Result<EntityKey, CliError> {
    match query::resolve_ref(store, &parse_ref(text)?)? {
        Resolved::Entity(k) => Ok(k),
        Resolved::Route(_) => Err(CliError::Usage(format!("`{text}` is a route; a single entity is expected"))),
    }
}

fn resolve_revision(store: &Store, text: &str) -> Result<EntityId, CliError> {
    let key = resolve_key(store, text)?;
    if key.kind == EntityKind::DatasetRevision {
        Ok(key.id)
    } else {
        Err(CliError::NotARevision(text.to_owned()))
    }
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string(value).expect("output values always serialize");
    writeln!(out, "{text}").map_err(io_err(Path::new("<stdout>")))
}

fn emit_lines(out: &mut dyn Write, lines: impl IntoIterator<Item = String>) -> Result<(), CliError> {
    for line in lines {
        writeln!(out, "{line}").map_err(io_err(Path::new("<stdout>")))?;
    }
    Ok(())
}

/// Identity matching `provider/actor`, added to the draft if the store has none.
fn identity_for_actor(store: &Store, draft: &mut TransactionDraft, actor: &str) -> Result<EntityId, CliError> {
    let (provider, actor_id) = actor
        .split_once('/')
        .filter(|(p, a)| !p.is_empty() && !a.is_empty())
        .ok_or_else(|| CliError::Usage(format!("--actor expects <provider>/<actor>, got `{actor}`")))?;
    let existing = store.entities().find_map(|e| match e {
        crate::model::EntityRecord::Identity(i)
            if i.external_provider_id == provider && i.external_actor_id == actor_id && !i.header.deprecated =>
        {
            Some(i.header.id.clone())
        }
        _ => None,
    });
    if let Some(id) = existing {
        return Ok(id);
    }
    let id = EntityId::generate();
    draft.additions.push(
        Identity {
            header: EntityHeader::new(id.clone()),
            external_provider_id: provider.to_owned(),
            external_actor_id: actor_id.to_owned(),
            ..Default::default()
        }
        .into(),
    );
    Ok(id)
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let json = cli.format == Format::Json;
    if let Command::ValidateFile { draft } = &cli.command {
        let draft = read_draft_file(draft)?;
        let mut probe = match &cli.log {
            Some(path) => load(path)?,
            None => ChangeLog::new(),
        };
        return match probe.commit(draft) {
            Ok(outcome) if json => emit_json(out, &json!({ "valid": true, "warnings": outcome.warnings.violations })),
            Ok(outcome) => {
                let mut lines = vec!["valid".to_owned()];
                lines.extend(outcome.warnings.violations.iter().map(|w| format!("warning: {w}")));
                emit_lines(out, lines)
            }
            Err(e) => Err(CliError::Invalid(e.report().clone())),
        };
    }
    let Some(path) = cli.log.as_deref() else {
        return Err(CliError::Usage("no changelog given: pass --log <path> or set LINEAGE_LOG".into()));
    };
    let is_dot_command = matches!(cli.command, Command::ExportDot { .. });
    if cli.format == Format::Dot && !is_dot_command {
        return Err(CliError::Usage("--format dot only applies to export-dot".into()));
    }

    match cli.command {
        Command::Init => {
            let file = open_for_write(path)?;
            if file.metadata().map_err(io_err(path))?.len() > 0 {
                return Err(CliError::AlreadyInitialized(format!("{} already holds a changelog", path.display())));
            }
            if json {
                emit_json(out, &json!({ "log": path, "last_seq": 0 }))
            } else {
                emit_lines(out, [format!("initialized {}", path.display())])
            }
        }
        Command::Commit { draft, identity, actor } => {
            let mut draft = read_draft_file(&draft)?;
            let mut file = open_for_write(path)?;
            let mut log = read_locked(&mut file, path)?;
            if let Some(id) = identity {
                draft.identity_id = id;
            }
            if let Some(actor) = actor {
                draft.identity_id = identity_for_actor(log.live(), &mut draft, &actor)?;
            }
            let outcome = log.commit(draft).map_err(CliError::Commit)?;
            let txn = log.transactions().last().expect("commit appended a transaction");
            let mut line = interchange::to_canonical_line(txn);
            line.push('\n');
            file.write_all(line.as_bytes()).map_err(io_err(path))?;
            file.sync_data().map_err(io_err(path))?;
            if json {
                emit_json(out, &json!({ "seq": outcome.seq, "warnings": outcome.warnings.violations }))
            } else {
                let mut lines = vec![format!("committed transaction {}", outcome.seq)];
                lines.extend(outcome.warnings.violations.iter().map(|w| format!("warning: {w}")));
                emit_lines(out, lines)
            }
        }
        Command::Validate => {
            let log = load(path)?;
            let report = log.live().validate();
            if report.has_errors() {
                return Err(CliError::Inconsistent(report));
            }
            if json {
                emit_json(out, &json!({ "transactions": log.transactions().len(), "last_seq": log.last_seq(), "entities": log.live().len() }))
            } else {
                emit_lines(
                    out,
                    [format!(
                        "ok: {} transaction(s), {} live entit{}",
                        log.transactions().len(),
                        log.live().len(),
                        if log.live().len() == 1 { "y" } else { "ies" }
                    )],
                )
            }
        }
        Command::Diff { from, to } => {
            let log = load(path)?;
            let changes = log.diff(from, to)?;
            if json {
                emit_json(out, &changes)
            } else {
                let lines = changes
                    .added
                    .iter()
                    .map(|k| format!("+ {k}"))
                    .chain(changes.modified.iter().map(|k| format!("~ {k}")))
                    .chain(changes.removed.iter().map(|k| format!("- {k}")));
                emit_lines(out, lines)
            }
        }
        command => {
            let log = load(path)?;
            let store = match cli.at {
                Some(seq) => log.snapshot_at(seq)?,
                None => log.live().clone(),
            };
            query_command(&store, command, cli.format, out)
        }
    }
}

fn node_line(store: &Store, node: &LineageNode, depth: u32) -> String {
    let kind = if node.is_revision() { "revision" } else { "execution" };
    format!("{depth}\t{kind}\t{}", trace::node_label(store, node))
}

fn revision_label(store: &Store, id: &EntityId) -> String {
    trace::node_label(store, &LineageNode::Revision(id.clone()))
}

fn query_command(store: &Store, command: Command, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    let json = format == Format::Json;
    match command {
        Command::Trace { direction, revision, args } => {
            let origin = resolve_revision(store, &revision)?;
            let direction: Direction = direction.parse().map_err(CliError::Usage)?;
            let result = trace::trace_in(store, &origin, direction, &args.options())?;
            if json {
                return emit_json(out, &result);
            }
            let mut nodes: Vec<(&LineageNode, u32)> = result.reached.iter().map(|(n, d)| (n, *d)).collect();
            nodes.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(b.0)));
            let mut lines: Vec<String> = nodes.into_iter().map(|(n, d)| node_line(store, n, d)).collect();
            lines.extend(result.pruned_at.iter().map(|(e, p)| format!("pruned\t{e}\t{p}")));
            if result.truncated_by_depth {
                lines.push("truncated\tmax-depth".into());
            }
            emit_lines(out, lines)
        }
        Command::Ancestors { revision, dataset } => {
            let rev = resolve_revision(store, &revision)?;
            let found = trace::ancestors(store, &rev, &dataset)?;
            if json {
                emit_json(out, &found)
            } else {
                emit_lines(out, found.iter().map(|r| revision_label(store, r)))
            }
        }
        Command::Route { target, source, limit } => {
            let target = resolve_revision(store, &target)?;
            let source = resolve_revision(store, &source)?;
            let routes = trace::lineage_route(store, &target, &source, limit)?;
            if json {
                let rendered: Vec<String> = routes.routes.iter().map(|r| r.notation(store)).collect();
                return emit_json(out, &json!({ "routes": routes.routes, "notation": rendered, "truncated": routes.truncated }));
            }
            let mut lines: Vec<String> = routes.routes.iter().map(|r| r.notation(store)).collect();
            if routes.truncated {
                lines.push(format!("truncated after {} route(s)", routes.routes.len()));
            }
            emit_lines(out, lines)
        }
        Command::Closure { revision } => {
            let rev = resolve_revision(store, &revision)?;
            let closure = trace::environment_closure(store, &rev)?;
            if json {
                return emit_json(out, &closure);
            }
            let mut lines = Vec::new();
            lines.extend(closure.dataset_revisions.iter().map(|r| format!("dataset_revision\t{}", revision_label(store, r))));
            lines.extend(closure.transform_revisions.iter().map(|r| format!("transform_revision\t{r}")));
            lines.extend(closure.type_revisions.iter().map(|r| format!("type_revision\t{r}")));
            lines.extend(closure.external_refs.iter().map(|x| format!("external\t{}\t{}\t{}", x.entity, x.field, x.value)));
            emit_lines(out, lines)
        }
        Command::Leaves { revision } => {
            let rev = resolve_revision(store, &revision)?;
            let leaves = trace::impacted_leaves(store, &rev)?;
            if json {
                emit_json(out, &leaves)
            } else {
                emit_lines(out, leaves.iter().map(|r| revision_label(store, r)))
            }
        }
        Command::Resolve { reference } => {
            let resolved = query::resolve_ref(store, &parse_ref(&reference)?)?;
            if json {
                return emit_json(out, &resolved);
            }
            match resolved {
                Resolved::Entity(k) => emit_lines(out, [k.to_string()]),
                Resolved::Route(keys) => emit_lines(out, keys.iter().map(ToString::to_string)),
            }
        }
        Command::Snapshot => {
            if json {
                let entities: Vec<_> = store.entities().collect();
                emit_json(out, &json!({ "seq": store.last_seq(), "entities": entities }))
            } else {
                emit_lines(out, store.keys().map(ToString::to_string))
            }
        }
        Command::DeprecationReport { reference } => {
            let key = resolve_key(store, &reference)?;
            let report = query::deprecation_report(store, &key)?;
            if json {
                return emit_json(out, &report);
            }
            let mut nodes: Vec<(&LineageNode, u32)> = report.dependents.iter().map(|(n, d)| (n, *d)).collect();
            nodes.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(b.0)));
            let mut lines: Vec<String> = nodes.into_iter().map(|(n, d)| node_line(store, n, d)).collect();
            lines.extend(report.leaves.iter().map(|r| format!("leaf\t{}", revision_label(store, r))));
            emit_lines(out, lines)
        }
        Command::ExportDot { revisions, direction, args, lr } => {
            let roots = revisions.iter().map(|r| resolve_revision(store, r)).collect::<Result<Vec<_>, _>>()?;
            let direction: Direction = direction.parse().map_err(CliError::Usage)?;
            let dot = interchange::export_dot(store, &roots, direction, &DotOptions { trace: args.options(), left_to_right: lr })?;
            if json {
                return emit_json(out, &json!({ "dot": dot }));
            }
            out.write_all(dot.as_bytes()).map_err(io_err(Path::new("<stdout>")))
        }
        Command::Init | Command::Commit { .. } | Command::Validate | Command::ValidateFile { .. } | Command::Diff { .. } => {
            unreachable!("handled before loading a snapshot")
        }
    }
}
