// Records a two-stage train/evaluate flow from scratch: catalog entities
// first, then each execution together with the revisions it produced.

use lineage::fixtures::{bootstrap_entities, dataset, imported_revision, product, slot_id, transform, IDENTITY};
use lineage::model::{SlotDirection, TracingProperties, Tri};
use lineage::record::ExecutionRecorder;
use lineage::{ChangeLog, EntityKind, TransactionDraft};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut log = ChangeLog::new();

    let mut catalog = TransactionDraft::new(IDENTITY).comment("catalog");
    catalog.additions.extend(bootstrap_entities());
    for id in ["DS_params", "DS_models", "DS_metrics"] {
        catalog.additions.push(dataset(id).into());
    }
    let deterministic = TracingProperties { deterministic: Tri::True, ..Default::default() };
    catalog.additions.extend(transform("TF_train", "TF_train_v1", &["params"], &["model"], TracingProperties::default()));
    catalog.additions.extend(transform("TF_eval", "TF_eval_v1", &["model"], &["metrics"], deterministic));
    catalog.additions.push(imported_revision("R_params", "DS_params", "hpo/params.json").into());
    let outcome = log.commit(catalog)?;
    println!("catalog committed as transaction {}", outcome.seq);

    // Inputs must already be committed, so every stage is its own transaction.
    let train = ExecutionRecorder::new("E_train", "TF_train_v1")
        .input(slot_id("TF_train_v1", SlotDirection::Input, "params"), "DS_params", "R_params")
        .output(slot_id("TF_train_v1", SlotDirection::Output, "model"), "R_model", product("DS_models", "models/m.bin"));
    log.commit(train.add_to(TransactionDraft::new(IDENTITY)).comment("train"))?;

    let eval = ExecutionRecorder::new("E_eval", "TF_eval_v1")
        .input(slot_id("TF_eval_v1", SlotDirection::Input, "model"), "DS_models", "R_model")
        .output(slot_id("TF_eval_v1", SlotDirection::Output, "metrics"), "R_metrics", product("DS_metrics", "metrics/m.json"));
    log.commit(eval.add_to(TransactionDraft::new(IDENTITY)).comment("evaluate"))?;

    let store = log.live();
    for kind in [EntityKind::DatasetRevision, EntityKind::TransformExecution, EntityKind::TransformExecutionSlot] {
        let count = store.keys().filter(|k| k.kind == kind).count();
        println!("{:<26} {count}", kind.as_str());
    }
    let (execution, slot) = store.producer_of(&"R_metrics".into()).ok_or("R_metrics has no producer")?;
    println!("R_metrics was produced by {execution} through {slot}");
    assert_eq!(execution.as_str(), "E_eval");
    assert!(store.validate().violations.is_empty());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
