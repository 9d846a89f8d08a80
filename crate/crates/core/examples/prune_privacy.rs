// Stops traces at executions whose transform declares a tracing property,
// e.g. everything behind a privacy-preserving aggregation.

use lineage::fixtures::{fanout_log, FANOUT_PRIVATE_TRANSFORM};
use lineage::trace::{self, LineageNode, PrunePredicate};
use lineage::TraceOptions;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let log = fanout_log();
    let store = log.live();
    let origin = "R_x".into();

    let full = trace::forward_trace(store, &origin, &TraceOptions::default())?;
    let private = TraceOptions::pruning(["privacy_preserving=true".parse::<PrunePredicate>()?]);
    let pruned = trace::forward_trace(store, &origin, &private)?;

    println!("{FANOUT_PRIVATE_TRANSFORM} is privacy preserving");
    println!("unpruned: {} nodes, pruned: {} nodes", full.reached.len(), pruned.reached.len());
    for (execution, property) in &pruned.pruned_at {
        println!("  stopped at {execution} ({property})");
    }
    let hidden: Vec<_> = full.reached.keys().filter(|n| !pruned.contains(n)).collect();
    println!("hidden behind the pruned execution: {hidden:?}");

    assert!(pruned.reached.keys().all(|n| full.contains(n)));
    assert!(pruned.contains(&LineageNode::Execution("E_b1".into())), "the pruned execution itself is reported");
    assert!(!pruned.contains(&LineageNode::Revision("R_b1".into())));

    // Unknown property values never prune.
    let unknown = TraceOptions::pruning([PrunePredicate::new("generative", false)]);
    assert_eq!(trace::forward_trace(store, &origin, &unknown)?.reached, full.reached);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
