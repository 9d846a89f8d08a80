// Builds a 100,000-entity chain/fan-out store and times a full forward
// trace from its root.

use std::time::Instant;

use lineage::fixtures::{chain_fanout_log, CHAIN_ROOT};
use lineage::{trace, TraceOptions};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let started = Instant::now();
    let log = chain_fanout_log(100_000);
    let store = log.live();
    println!("built {} entities in {} transactions ({:.2?})", store.len(), log.transactions().len(), started.elapsed());

    let started = Instant::now();
    let result = trace::forward_trace(store, &CHAIN_ROOT.into(), &TraceOptions::default())?;
    let elapsed = started.elapsed();
    let deepest = result.reached.values().max().copied().unwrap_or(0);
    println!(
        "forward trace: {} revisions, {} executions, depth {deepest} ({elapsed:.2?})",
        result.revisions().count(),
        result.executions().count()
    );
    assert_eq!(result.revisions().count() + result.executions().count(), result.reached.len());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
