mod common;

use std::fs::File;
use std::path::{Path, PathBuf};

use common::*;
use lineage::fixtures::{self, dataset, imported_revision};
use lineage::model::{EntityKey, EntityKind};
use lineage::query::group_members;
use lineage::TransactionDraft;
use serde_json::Value;
use tempfile::TempDir;

fn log_with(log: &lineage::ChangeLog) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lineage.jsonl");
    write_changelog(log, &path);
    (dir, path)
}

fn train_eval() -> (TempDir, PathBuf) {
    log_with(&fixtures::train_eval_log())
}

fn write_draft(dir: &Path, name: &str, draft: &TransactionDraft) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(draft).unwrap()).unwrap();
    path
}

fn json_error(stderr: &str) -> Value {
    let value: Value = serde_json::from_str(stderr).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {stderr}"));
    assert!(value["error"]["kind"].is_string(), "{value}");
    assert!(value["error"]["message"].is_string(), "{value}");
    value
}

#[test]
fn train_eval_backward_trace_reaches_five_nodes() {
    let (_dir, log) = train_eval();
    let log = log.to_str().unwrap();
    let (code, out, err) = cli(&["--log", log, "trace", "backward", "DS_out:R_y"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(
        out,
        "0\trevision\tDS_out:R_y\n\
         1\trevision\tDS_1:R_1\n\
         1\texecution\tTF_2:TF_2_v1:E_2\n\
         2\trevision\tDS_in:R_x\n\
         2\texecution\tTF_1:TF_1_v1:E_1\n"
    );
    let (code, out, _) = cli(&["--log", log, "--format", "json", "trace", "backward", "DS_out:R_y"]);
    assert_eq!(code, 0);
    let value: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(value["reached"].as_array().unwrap().len(), 5);
    assert_eq!(value["edges"].as_array().unwrap().len(), 4);
}

#[test]
fn train_eval_ancestors_and_route() {
    let (_dir, log) = train_eval();
    let log = log.to_str().unwrap();
    let (code, out, _) = cli(&["--log", log, "ancestors", "DS_out:R_y", "--dataset", "DS_1"]);
    assert_eq!((code, out.as_str()), (0, "DS_1:R_1\n"));
    let (code, out, _) = cli(&["--log", log, "route", "DS_out:R_y", "DS_in:R_x"]);
    assert_eq!((code, out.as_str()), (0, "[TF_1:E_1, DS_1:R_1, TF_2:E_2]\n"));
}

#[test]
fn latest_of_an_empty_dataset_is_an_error() {
    let (_dir, log) = log_with(&fixtures::bootstrap_log());
    let log = log.to_str().unwrap();
    let (code, out, err) = cli(&["--log", log, "resolve", "DS_in:latest"]);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    assert!(err.contains("has no revisions"), "{err}");
    let (code, _, err) = cli(&["--log", log, "--format", "json", "resolve", "DS_in:latest"]);
    assert_eq!(code, 1);
    assert_eq!(json_error(&err)["error"]["kind"], "query");
}

#[test]
fn rejected_commit_leaves_the_log_untouched() {
    let (dir, log) = train_eval();
    let before = file_digest(&log);
    let draft = TransactionDraft::new(fixtures::IDENTITY).add(imported_revision("R_orphan", "DS_missing", "blob"));
    let draft = write_draft(dir.path(), "bad.json", &draft);
    let (code, out, err) = cli(&["--log", log.to_str().unwrap(), "--format", "json", "commit", draft.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    let error = json_error(&err);
    assert_eq!(error["error"]["kind"], "commit_rejected");
    let violations = error["error"]["violations"].as_array().unwrap();
    assert!(violations.iter().any(|v| v.to_string().contains("DS_missing")), "{error}");
    assert_eq!(file_digest(&log), before);
}

#[test]
fn accepted_commit_appends_one_line() {
    let (dir, log) = train_eval();
    let lines_before = std::fs::read_to_string(&log).unwrap().lines().count();
    let draft = TransactionDraft::new(fixtures::IDENTITY).add(imported_revision("R_x2", "DS_in", "hpo/params-x2.json"));
    let draft = write_draft(dir.path(), "good.json", &draft);
    let (code, out, err) = cli(&["--log", log.to_str().unwrap(), "commit", draft.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, format!("committed transaction {}\n", lines_before + 1));
    let text = std::fs::read_to_string(&log).unwrap();
    assert_eq!(text.lines().count(), lines_before + 1);
    let (code, out, _) = cli(&["--log", log.to_str().unwrap(), "resolve", "DS_in:latest"]);
    assert_eq!((code, out.as_str()), (0, "dataset_revision/R_x2\n"));
}

#[test]
fn queries_are_read_only_and_json_output_always_parses() {
    let (dir, log) = train_eval();
    let good = write_draft(dir.path(), "good.json", &TransactionDraft::new(fixtures::IDENTITY).add(dataset("DS_fresh")));
    let bad = write_draft(
        dir.path(),
        "bad.json",
        &TransactionDraft::new(fixtures::IDENTITY).add(imported_revision("R_orphan", "DS_missing", "blob")),
    );
    let (good, bad) = (good.to_str().unwrap().to_owned(), bad.to_str().unwrap().to_owned());
    let before = file_digest(&log);
    let cases: Vec<Vec<&str>> = vec![
        vec!["trace", "forward", "DS_in:R_x"],
        vec!["trace", "backward", "DS_out:R_y", "--max-depth", "1"],
        vec!["trace", "forward", "DS_in:R_x", "--prune", "deterministic=true"],
        vec!["trace", "forward", "R_missing"],
        vec!["ancestors", "DS_out:R_y", "--dataset", "DS_in"],
        vec!["ancestors", "DS_out:R_y", "--dataset", "DS_nope"],
        vec!["route", "DS_out:R_y", "DS_in:R_x"],
        vec!["route", "DS_in:R_x", "DS_in:R_x"],
        vec!["closure", "DS_out:R_y"],
        vec!["closure", "DS_out:head-3"],
        vec!["leaves", "DS_in:R_x"],
        vec!["resolve", "TF_2:E_2"],
        vec!["resolve", "DS_in:head-0"],
        vec!["resolve", "R_x"],
        vec!["resolve", "a:b:c:d"],
        vec!["snapshot"],
        vec!["--at", "1", "snapshot"],
        vec!["--at", "999", "snapshot"],
        vec!["diff", "1", "2"],
        vec!["diff", "2", "1"],
        vec!["deprecation-report", "TF_1"],
        vec!["deprecation-report", "TY_nothing"],
        vec!["export-dot", "DS_out:R_y", "--direction", "backward"],
        vec!["validate"],
        vec!["validate-file", &good],
        vec!["validate-file", &bad],
        vec!["trace", "sideways", "R_x"],
    ];
    for case in cases {
        let mut args = vec!["--log", log.to_str().unwrap(), "--format", "json"];
        args.extend(case.iter().copied());
        let (code, out, err) = cli(&args);
        match code {
            0 => {
                serde_json::from_str::<Value>(&out).unwrap_or_else(|e| panic!("{case:?}: stdout is not JSON ({e}): {out}"));
            }
            1 | 2 => {
                assert!(out.is_empty(), "{case:?} wrote to stdout on failure");
                json_error(&err);
            }
            other => panic!("{case:?}: unexpected exit code {other}"),
        }
        assert_eq!(file_digest(&log), before, "{case:?} modified the log");
    }
}

#[test]
fn a_held_write_lock_blocks_commits_and_reads() {
    let (dir, log) = train_eval();
    let draft = write_draft(dir.path(), "d.json", &TransactionDraft::new(fixtures::IDENTITY).add(dataset("DS_fresh")));
    let before = file_digest(&log);
    let holder = File::options().read(true).write(true).open(&log).unwrap();
    holder.try_lock().unwrap();
    let log_arg = log.to_str().unwrap();
    let (code, _, err) = cli(&["--log", log_arg, "--format", "json", "commit", draft.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(json_error(&err)["error"]["kind"], "locked");
    let (code, _, err) = cli(&["--log", log_arg, "snapshot"]);
    assert_eq!(code, 1);
    assert!(err.contains("locked"), "{err}");
    holder.unlock().unwrap();

    holder.try_lock_shared().unwrap();
    assert_eq!(cli(&["--log", log_arg, "snapshot"]).0, 0, "readers share the lock");
    assert_eq!(cli(&["--log", log_arg, "commit", draft.to_str().unwrap()]).0, 1);
    assert_eq!(file_digest(&log), before);
    holder.unlock().unwrap();
    assert_eq!(cli(&["--log", log_arg, "commit", draft.to_str().unwrap()]).0, 0);
}

#[test]
fn actor_flag_creates_and_then_reuses_an_identity() {
    let (dir, log) = train_eval();
    let log_arg = log.to_str().unwrap();
    let identities = || {
        let (_, out, _) = cli(&["--log", log_arg, "--format", "json", "snapshot"]);
        let value: Value = serde_json::from_str(&out).unwrap();
        value["entities"].as_array().unwrap().iter().filter(|e| e["kind"] == "identity").count()
    };
    let before = identities();
    let draft = dir.path().join("anon.json");
    std::fs::write(&draft, r#"{"additions":[{"kind":"dataset","id":"DS_a1","type_id":"TY_blob","name":"a1"}]}"#).unwrap();
    let (code, _, err) = cli(&["--log", log_arg, "commit", draft.to_str().unwrap(), "--actor", "github/octo"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(identities(), before + 1);
    std::fs::write(&draft, r#"{"additions":[{"kind":"dataset","id":"DS_a2","type_id":"TY_blob","name":"a2"}]}"#).unwrap();
    let (code, _, err) = cli(&["--log", log_arg, "commit", draft.to_str().unwrap(), "--actor", "github/octo"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(identities(), before + 1);
    assert_eq!(cli(&["--log", log_arg, "commit", draft.to_str().unwrap(), "--actor", "octo"]).0, 2);
}

#[test]
fn historical_queries_and_diffs() {
    let (_dir, log) = train_eval();
    let log_arg = log.to_str().unwrap();
    let (_, live, _) = cli(&["--log", log_arg, "snapshot"]);
    let (code, first, _) = cli(&["--log", log_arg, "--at", "1", "snapshot"]);
    assert_eq!(code, 0);
    assert!(!first.contains("dataset_revision/R_x"));
    assert!(live.contains("dataset_revision/R_x"));
    let (code, out, _) = cli(&["--log", log_arg, "--at", "1", "trace", "backward", "DS_out:R_y"]);
    assert_eq!(code, 1, "{out}");
    let (code, diff, _) = cli(&["--log", log_arg, "diff", "1", "2"]);
    assert_eq!(code, 0);
    assert!(diff.contains("+ dataset_revision/R_x"), "{diff}");
    assert!(diff.lines().all(|l| l.starts_with("+ ")), "{diff}");
    let (code, _, err) = cli(&["--log", log_arg, "--format", "json", "--at", "999", "snapshot"]);
    assert_eq!(code, 1);
    assert_eq!(json_error(&err)["error"]["kind"], "out_of_range");
}

#[test]
fn dot_export_and_format_checks() {
    let (_dir, log) = train_eval();
    let log_arg = log.to_str().unwrap();
    let (code, out, _) = cli(&["--log", log_arg, "export-dot", "DS_out:R_y", "--direction", "backward"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("digraph lineage {"), "{out}");
    assert_eq!(out.matches("->").count(), 4);
    let (code, dot, _) = cli(&["--log", log_arg, "--format", "dot", "export-dot", "DS_out:R_y", "--direction", "backward"]);
    assert_eq!((code, dot.as_str()), (0, out.as_str()));
    assert_eq!(cli(&["--log", log_arg, "--format", "dot", "snapshot"]).0, 2);
}

#[test]
fn validation_commands() {
    let (dir, log) = train_eval();
    let log_arg = log.to_str().unwrap();
    let (code, out, _) = cli(&["--log", log_arg, "validate"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("ok: "), "{out}");

    let good = write_draft(dir.path(), "good.json", &TransactionDraft::new(fixtures::IDENTITY).add(dataset("DS_fresh")));
    let before = file_digest(&log);
    let (code, out, _) = cli(&["--log", log_arg, "validate-file", good.to_str().unwrap()]);
    assert_eq!((code, out.as_str()), (0, "valid\n"));
    assert_eq!(file_digest(&log), before);
    // Without a log the draft is checked against an empty store.
    let (code, _, err) = cli(&["--format", "json", "validate-file", good.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(json_error(&err)["error"]["kind"], "invalid_draft");

    std::fs::write(&log, "{not json}\n").unwrap();
    let (code, _, err) = cli(&["--log", log_arg, "--format", "json", "validate"]);
    assert_eq!(code, 1);
    assert!(json_error(&err)["error"]["message"].as_str().unwrap().contains("line 1"), "{err}");
}

#[test]
fn init_refuses_an_existing_log_and_log_is_required() {
    let (_dir, log) = train_eval();
    let (code, _, err) = cli(&["--log", log.to_str().unwrap(), "--format", "json", "init"]);
    assert_eq!(code, 1);
    assert_eq!(json_error(&err)["error"]["kind"], "already_initialized");
    assert_eq!(cli(&["snapshot"]).0, 2);
}

#[test]
fn scenario_closures_match_hand_enumerated_sets() {
    for name in ["ml_lifecycle", "stream_dumps"] {
        let mismatches = fixture_closure_mismatches(name);
        assert!(mismatches.is_empty(), "{mismatches:#?}");
    }
}

#[test]
fn stream_scenario_groups_single_revision_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("lineage.jsonl");
    build_fixture_log("stream_dumps", &log);
    let store = lineage::interchange::load_log(&log).unwrap().live().clone();
    let members = group_members(&store, &"GR_multi".into(), true).unwrap();
    let expected: Vec<EntityKey> =
        (1..=4).map(|k| EntityKey::new(EntityKind::Dataset, format!("DS_dump_m{k}"))).collect();
    assert_eq!(members, expected);
    // Both layouts feed the detector; the dump log is a side product only.
    let (code, out, _) = cli(&["--log", log.to_str().unwrap(), "leaves", "DS_stream:R_w1"]);
    assert_eq!(code, 0);
    assert_eq!(out, "DS_log:R_log_m1\nDS_log:R_log_s1\nDS_dump_m1:R_m1\nDS_report:R_report_1\n");
}

#[test]
fn ml_scenario_discarded_dump_is_latest_but_not_a_contributor() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("lineage.jsonl");
    build_fixture_log("ml_lifecycle", &log);
    let log_arg = log.to_str().unwrap();
    let (_, out, _) = cli(&["--log", log_arg, "resolve", "DS_new:latest"]);
    assert_eq!(out, "dataset_revision/R_new_3\n");
    let (_, out, _) = cli(&["--log", log_arg, "route", "DS_candidate:R_deployed", "DS_new:R_new_3"]);
    assert_eq!(out, "");
    let (code, out, _) = cli(&["--log", log_arg, "route", "DS_candidate:R_deployed", "DS_new:R_new_2"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 3, "{out}");
}
