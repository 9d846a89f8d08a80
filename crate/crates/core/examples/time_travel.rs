// Historical snapshots, diffs between transactions and tombstones.

use lineage::fixtures::{train_eval_log, imported_revision, IDENTITY};
use lineage::{trace, EntityKey, EntityKind, TraceOptions, TransactionDraft};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut log = train_eval_log();
    log.commit(TransactionDraft::new(IDENTITY).add(imported_revision("R_x2", "DS_in", "hpo/params-x2.json")))?;
    let with_x2 = log.last_seq();
    log.commit(TransactionDraft::new(IDENTITY).remove(EntityKind::DatasetRevision, "R_x2").comment("bad import"))?;

    for seq in 0..=log.last_seq() {
        let snapshot = log.snapshot_at(seq)?;
        println!("after transaction {seq}: {} entities", snapshot.len());
    }

    let changes = log.diff(1, 3)?;
    let added: Vec<String> = changes.added.iter().map(ToString::to_string).collect();
    println!("transactions 2..=3 added {}", added.join(", "));

    let key = EntityKey::new(EntityKind::DatasetRevision, "R_x2");
    assert!(log.snapshot_at(with_x2)?.contains(&key));
    assert!(!log.live().contains(&key) && log.live().is_tombstoned(&key));

    // Removed ids are never reused.
    let reuse = log.commit(TransactionDraft::new(IDENTITY).add(imported_revision("R_x2", "DS_in", "again")));
    println!("re-adding R_x2: {}", reuse.unwrap_err());

    // Queries against a snapshot see the world as it was.
    let past = log.snapshot_at(2)?;
    let before_eval = trace::forward_trace(&past, &"R_x".into(), &TraceOptions::default())?;
    println!("downstream of R_x after transaction 2: {} nodes", before_eval.reached.len());
    assert_eq!(before_eval.reached.len(), 1);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
