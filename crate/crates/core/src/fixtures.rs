//! Small ready-made scenarios used by the examples, tests and docs.
//!
//! * [`train_eval_log`]: two-stage train/evaluate flow,
//!   `DS_in:R_x -> TF_1:E_1 -> DS_1:R_1 -> TF_2:E_2 -> DS_out:R_y`.
//! * [`fanout_log`]: one imported revision fanned out through two levels of
//!   transforms, with repeated executions widening each level.
//! * [`chain_fanout_log`]: a synthetic store of any size for load testing.
//!
//! All entities share a single opaque type (`TY_blob`) and every transaction
//! is committed by the `ID_ops` identity with deterministic timestamps.

use chrono::{DateTime, TimeZone, Utc};

use crate::model::{
    Dataset, DatasetRevision, EntityHeader, EntityId, EntityRecord, Identity, SlotDirection, TracingProperties,
    Transform, TransformRevision, TransformSlot, TypeDef, TypeRevision,
};
use crate::record::ExecutionRecorder;
use crate::txn::{ChangeLog, TransactionDraft};

pub const IDENTITY: &str = "ID_ops";
pub const TYPE: &str = "TY_blob";
pub const TYPE_REVISION: &str = "TYR_blob_1";

/// `2024-01-01T00:00:00Z` plus `n` minutes.
pub fn fixture_time(n: u64) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap() + chrono::Duration::minutes(n as i64)
}

pub fn dataset(id: &str) -> Dataset {
    Dataset {
        header: EntityHeader::new(id),
        type_id: TYPE.into(),
        external_provider_id: "s3".into(),
        external_repo_id: "lineage-fixtures".into(),
        name: id.to_lowercase(),
        ..Default::default()
    }
}

/// Revision registered from outside any execution.
pub fn imported_revision(id: &str, dataset_id: &str, blob: &str) -> DatasetRevision {
    DatasetRevision {
        header: EntityHeader::new(id),
        dataset_id: dataset_id.into(),
        type_revision_id: TYPE_REVISION.into(),
        external_source_id: Some(format!("import:{blob}")),
        external_blob_id: blob.into(),
        ..Default::default()
    }
}

/// Template for a revision that an execution will produce.
pub fn product(dataset_id: &str, blob: &str) -> DatasetRevision {
    DatasetRevision {
        dataset_id: dataset_id.into(),
        type_revision_id: TYPE_REVISION.into(),
        external_blob_id: blob.into(),
        ..Default::default()
    }
}

/// Id of the slot named `name` on `revision` in the given direction.
pub fn slot_id(revision: &str, direction: SlotDirection, name: &str) -> EntityId {
    let dir = match direction {
        SlotDirection::Input => "in",
        SlotDirection::Output => "out",
    };
    format!("{revision}.{dir}.{name}").into()
}

/// A transform with one revision and the named input/output slots.
pub fn transform(
    id: &str,
    revision: &str,
    inputs: &[&str],
    outputs: &[&str],
    tracing_properties: TracingProperties,
) -> Vec<EntityRecord> {
    let mut out: Vec<EntityRecord> = vec![
        Transform {
            header: EntityHeader::new(id),
            external_provider_id: "git".into(),
            external_repo_id: "pipelines".into(),
            name: id.to_lowercase(),
            ..Default::default()
        }
        .into(),
        TransformRevision {
            header: EntityHeader::new(revision),
            transform_id: id.into(),
            external_commit_id: format!("commit-{revision}"),
            tracing_properties,
            comment: String::new(),
            ..Default::default()
        }
        .into(),
    ];
    let dirs = inputs
        .iter()
        .map(|n| (SlotDirection::Input, n))
        .chain(outputs.iter().map(|n| (SlotDirection::Output, n)));
    for (direction, name) in dirs {
        out.push(
            TransformSlot {
                header: EntityHeader { id: slot_id(revision, direction, name), ..Default::default() },
                transform_revision_id: revision.into(),
                type_revision_id: TYPE_REVISION.into(),
                name: (*name).to_owned(),
                direction,
                extra: Default::default(),
            }
            .into(),
        );
    }
    out
}

/// Identity, type and type revision every fixture starts from.
pub fn bootstrap_entities() -> Vec<EntityRecord> {
    vec![
        Identity {
            header: EntityHeader::new(IDENTITY),
            external_provider_id: "ldap".into(),
            external_actor_id: "ops-bot".into(),
            ..Default::default()
        }
        .into(),
        TypeDef {
            header: EntityHeader::new(TYPE),
            external_registry_id: "registry:blob".into(),
            name: "blob".into(),
            ..Default::default()
        }
        .into(),
        TypeRevision {
            header: EntityHeader::new(TYPE_REVISION),
            type_id: TYPE.into(),
            external_type_id: "blob@1".into(),
            backwards_compatible: true,
            version: "1.0".into(),
            ..Default::default()
        }
        .into(),
    ]
}

fn draft(n: u64) -> TransactionDraft {
    TransactionDraft::new(IDENTITY).at(fixture_time(n))
}

fn commit(log: &mut ChangeLog, d: TransactionDraft) {
    if let Err(e) = log.commit(d) {
        panic!("fixture commit failed: {e}\n{}", e.report());
    }
}

/// One transaction holding the bootstrap entities and dataset `DS_in`.
pub fn bootstrap_log() -> ChangeLog {
    let mut log = ChangeLog::new();
    let mut d = draft(0);
    d.additions.extend(bootstrap_entities());
    d.additions.push(dataset("DS_in").into());
    commit(&mut log, d);
    log
}

/// Two-stage train/evaluate flow with four transactions.
pub fn train_eval_log() -> ChangeLog {
    let mut log = bootstrap_log();

    let mut setup = draft(1);
    setup.additions.extend([dataset("DS_1").into(), dataset("DS_out").into()]);
    setup.additions.extend(transform("TF_1", "TF_1_v1", &["params"], &["model"], TracingProperties::default()));
    setup.additions.extend(transform("TF_2", "TF_2_v1", &["model"], &["metrics"], TracingProperties::default()));
    setup.additions.push(imported_revision("R_x", "DS_in", "hpo/params-x.json").into());
    commit(&mut log, setup);

    let train = ExecutionRecorder::new("E_1", "TF_1_v1")
        .input(slot_id("TF_1_v1", SlotDirection::Input, "params"), "DS_in", "R_x")
        .output(slot_id("TF_1_v1", SlotDirection::Output, "model"), "R_1", product("DS_1", "models/m1.bin"));
    commit(&mut log, train.add_to(draft(2)).comment("train"));

    let eval = ExecutionRecorder::new("E_2", "TF_2_v1")
        .input(slot_id("TF_2_v1", SlotDirection::Input, "model"), "DS_1", "R_1")
        .output(slot_id("TF_2_v1", SlotDirection::Output, "metrics"), "R_y", product("DS_out", "metrics/y.json"));
    commit(&mut log, eval.add_to(draft(3)).comment("evaluate"));
    log
}

/// Level-1 transform `TF_b` declared privacy preserving, everything else unknown.
pub const FANOUT_PRIVATE_TRANSFORM: &str = "TF_b";

/// `DS_in:R_x` traced through two transform levels:
///
/// ```text
/// R_x -> E_a1 -> R_a1 -> E_c1 -> R_c1
/// R_x -> E_a2 -> R_a2 -> E_c2 -> R_c2
///                R_a2 -> E_d1 -> R_d1   (E_d1 also reads R_b1 and R_o)
/// R_x -> E_b1 -> R_b1 -> E_e1 -> R_e1
/// ```
///
/// `R_o` is an unrelated import that only shows up in backward traces.
pub fn fanout_log() -> ChangeLog {
    use SlotDirection::{Input as In, Output as Out};
    let mut log = bootstrap_log();

    let private = TracingProperties { privacy_preserving: true.into(), ..Default::default() };
    let mut setup = draft(1);
    for ds in ["DS_a", "DS_b", "DS_c", "DS_d", "DS_e", "DS_other"] {
        setup.additions.push(dataset(ds).into());
    }
    setup.additions.extend(transform("TF_a", "TF_a_v1", &["src"], &["out"], TracingProperties::default()));
    setup.additions.extend(transform("TF_b", "TF_b_v1", &["src"], &["out"], private));
    setup.additions.extend(transform("TF_c", "TF_c_v1", &["src"], &["out"], TracingProperties::default()));
    setup.additions.extend(transform("TF_d", "TF_d_v1", &["left", "right", "side"], &["out"], TracingProperties::default()));
    setup.additions.extend(transform("TF_e", "TF_e_v1", &["src"], &["out"], TracingProperties::default()));
    setup.additions.push(imported_revision("R_x", "DS_in", "raw/x").into());
    setup.additions.push(imported_revision("R_o", "DS_other", "raw/o").into());
    commit(&mut log, setup);

    let mut level1 = draft(2);
    for (exec, tr, rev, out, ds) in [
        ("E_a1", "TF_a_v1", "TF_a_v1", "R_a1", "DS_a"),
        ("E_a2", "TF_a_v1", "TF_a_v1", "R_a2", "DS_a"),
        ("E_b1", "TF_b_v1", "TF_b_v1", "R_b1", "DS_b"),
    ] {
        level1 = ExecutionRecorder::new(exec, tr)
            .input(slot_id(rev, In, "src"), "DS_in", "R_x")
            .output(slot_id(rev, Out, "out"), out, product(ds, &format!("{ds}/{out}")))
            .add_to(level1);
    }
    commit(&mut log, level1);

    let mut level2 = draft(3);
    for (exec, input_ds, input, out, ds) in [
        ("E_c1", "DS_a", "R_a1", "R_c1", "DS_c"),
        ("E_c2", "DS_a", "R_a2", "R_c2", "DS_c"),
    ] {
        level2 = ExecutionRecorder::new(exec, "TF_c_v1")
            .input(slot_id("TF_c_v1", In, "src"), input_ds, input)
            .output(slot_id("TF_c_v1", Out, "out"), out, product(ds, &format!("{ds}/{out}")))
            .add_to(level2);
    }
    level2 = ExecutionRecorder::new("E_d1", "TF_d_v1")
        .input(slot_id("TF_d_v1", In, "left"), "DS_a", "R_a2")
        .input(slot_id("TF_d_v1", In, "right"), "DS_b", "R_b1")
        .input(slot_id("TF_d_v1", In, "side"), "DS_other", "R_o")
        .output(slot_id("TF_d_v1", Out, "out"), "R_d1", product("DS_d", "DS_d/R_d1"))
        .add_to(level2);
    level2 = ExecutionRecorder::new("E_e1", "TF_e_v1")
        .input(slot_id("TF_e_v1", In, "src"), "DS_b", "R_b1")
        .output(slot_id("TF_e_v1", Out, "out"), "R_e1", product("DS_e", "DS_e/R_e1"))
        .add_to(level2);
    commit(&mut log, level2);
    log
}

/// Root revision of [`chain_fanout_log`].
pub const CHAIN_ROOT: &str = "R_root";

/// A synthetic store with at least `min_entities` live entities, all
/// downstream of [`CHAIN_ROOT`].
///
/// Every revision is consumed exactly once, by `TF_step` (one output) or,
/// for every eighth revision, by `TF_split` (two outputs), so the graph is a
/// tree of long chains that keeps widening. Each generation of executions is
/// committed as one transaction; at most `4096` executions go into one.
pub fn chain_fanout_log(min_entities: usize) -> ChangeLog {
    use SlotDirection::{Input as In, Output as Out};
    const GENERATION_CAP: usize = 4096;
    let mut log = bootstrap_log();
    let mut setup = draft(1);
    setup.additions.push(dataset("DS_bulk").into());
    setup.additions.extend(transform("TF_step", "TF_step_v1", &["src"], &["out"], TracingProperties::default()));
    setup.additions.extend(transform("TF_split", "TF_split_v1", &["src"], &["left", "right"], TracingProperties::default()));
    setup.additions.push(imported_revision(CHAIN_ROOT, "DS_bulk", "bulk/root").into());
    commit(&mut log, setup);

    let mut frontier: std::collections::VecDeque<EntityId> = [EntityId::from(CHAIN_ROOT)].into();
    let mut executions = 0usize;
    let mut generation = 2;
    while log.live().len() < min_entities {
        let mut d = draft(generation);
        let mut produced = Vec::new();
        for _ in 0..frontier.len().min(GENERATION_CAP) {
            let input = frontier.pop_front().expect("frontier is never empty");
            executions += 1;
            let exec = format!("E_{executions}");
            let (revision, outputs): (&str, &[&str]) =
                if executions.is_multiple_of(8) { ("TF_split_v1", &["left", "right"]) } else { ("TF_step_v1", &["out"]) };
            let mut recorder = ExecutionRecorder::new(exec.as_str(), revision).input(slot_id(revision, In, "src"), "DS_bulk", input);
            for name in outputs {
                let out = format!("R_{executions}_{name}");
                recorder = recorder.output(slot_id(revision, Out, name), out.as_str(), product("DS_bulk", &format!("bulk/{out}")));
                produced.push(EntityId::from(out));
            }
            d = recorder.add_to(d);
        }
        commit(&mut log, d);
        frontier.extend(produced);
        generation += 1;
    }
    log
}
