// Impact analysis before retiring a transform, then recording the
// deprecation with a termination deadline.

use lineage::fixtures::{fanout_log, fixture_time, IDENTITY};
use lineage::query::deprecation_report;
use lineage::trace::{impacted_leaves, node_label};
use lineage::{EntityKey, EntityKind, EntityRecord, TransactionDraft};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut log = fanout_log();

    let leaves = impacted_leaves(log.live(), &"R_x".into())?;
    println!("unconsumed results downstream of R_x: {leaves:?}");

    let subject = EntityKey::new(EntityKind::Transform, "TF_a");
    let report = deprecation_report(log.live(), &subject)?;
    println!("retiring {subject} affects:");
    for (node, depth) in &report.dependents {
        println!("  {depth} {}", node_label(log.live(), node));
    }
    println!("leaves to notify: {:?}", report.leaves);
    assert!(report.dependent_revisions().any(|r| r.as_str() == "R_d1"));

    let Some(EntityRecord::Transform(mut retired)) = log.live().get(&subject).cloned() else {
        return Err("TF_a is not a transform".into());
    };
    retired.header.deprecated = true;
    retired.header.termination_sla = Some(fixture_time(60 * 24 * 30));
    log.commit(TransactionDraft::new(IDENTITY).modify(retired).comment("retire TF_a"))?;
    println!("TF_a deprecated in transaction {}", log.last_seq());

    // Deprecated entities are still traced.
    assert_eq!(deprecation_report(log.live(), &subject)?.dependents, report.dependents);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
