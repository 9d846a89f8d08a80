// Renders traced lineage as Graphviz DOT.

use lineage::fixtures::{fanout_log, train_eval_log};
use lineage::interchange::{export_dot, DotOptions};
use lineage::trace::PrunePredicate;
use lineage::{Direction, TraceOptions};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let log = train_eval_log();
    let dot = export_dot(log.live(), &["R_y".into()], Direction::Backward, &DotOptions::default())?;
    print!("{dot}");
    assert_eq!(dot.matches("->").count(), 4);

    let log = fanout_log();
    let opts = DotOptions {
        trace: TraceOptions::pruning([PrunePredicate::new("privacy_preserving", true)]),
        left_to_right: true,
    };
    let dot = export_dot(log.live(), &["R_x".into()], Direction::Forward, &opts)?;
    print!("{dot}");
    assert!(dot.contains("rankdir=LR"));
    assert_eq!(dot.matches("style=dashed").count(), 1, "the pruned execution is drawn dashed");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
