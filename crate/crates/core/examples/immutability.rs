// Committed revision payloads are immutable and transactions are atomic;
// headers (deprecation, deadlines) may change.

use lineage::fixtures::{dataset, train_eval_log, imported_revision, IDENTITY};
use lineage::{CommitError, EntityKey, EntityKind, EntityRecord, TransactionDraft};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut log = train_eval_log();
    let key = EntityKey::new(EntityKind::DatasetRevision, "R_1");
    let Some(EntityRecord::DatasetRevision(original)) = log.live().get(&key).cloned() else {
        return Err("R_1 missing".into());
    };

    let mut rewritten = original.clone();
    rewritten.external_blob_id = "models/m1-retrained.bin".into();
    let before = log.transactions().len();
    let err = log.commit(TransactionDraft::new(IDENTITY).modify(rewritten)).unwrap_err();
    println!("rewriting R_1: {err}");
    assert!(matches!(err, CommitError::ImmutableFieldModified { .. }));
    assert_eq!(log.transactions().len(), before);

    // One bad entity rejects the whole transaction, with every violation listed.
    let draft = TransactionDraft::new(IDENTITY)
        .add(dataset("DS_fine"))
        .add(imported_revision("R_orphan", "DS_nowhere", "x"))
        .add(imported_revision("R_orphan2", "DS_elsewhere", "y"));
    let err = log.commit(draft).unwrap_err();
    println!("{err}");
    for violation in &err.report().violations {
        println!("  {violation}");
    }
    assert!(!log.live().contains(&EntityKey::new(EntityKind::Dataset, "DS_fine")));

    let mut deprecated = original;
    deprecated.header.deprecated = true;
    log.commit(TransactionDraft::new(IDENTITY).modify(deprecated))?;
    println!("deprecating R_1 is a header change and was accepted");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
