// Forward and backward traces, with depth limits and group scoping.

use lineage::fixtures::{fanout_log, IDENTITY};
use lineage::model::{EntityHeader, Group};
use lineage::trace::{self, node_label};
use lineage::{EntityKey, EntityKind, TraceOptions, TraceResult, TransactionDraft};

fn show(title: &str, store: &lineage::Store, result: &TraceResult) {
    println!("{title}");
    let mut nodes: Vec<_> = result.reached.iter().collect();
    nodes.sort_by_key(|(node, depth)| (**depth, (*node).clone()));
    for (node, depth) in nodes {
        println!("  {depth} {}", node_label(store, node));
    }
    if result.truncated_by_depth {
        println!("  (stopped at the depth limit)");
    }
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut log = fanout_log();

    let forward = trace::forward_trace(log.live(), &"R_x".into(), &TraceOptions::default())?;
    show("downstream of R_x", log.live(), &forward);
    assert_eq!(forward.revisions().count(), 8);

    let backward = trace::backward_trace(log.live(), &"R_d1".into(), &TraceOptions::default())?;
    show("upstream of R_d1", log.live(), &backward);
    assert!(backward.contains(&trace::LineageNode::Revision("R_o".into())));

    let shallow = TraceOptions { max_depth: Some(1), ..Default::default() };
    let first_hop = trace::forward_trace(log.live(), &"R_x".into(), &shallow)?;
    show("one execution away from R_x", log.live(), &first_hop);
    assert!(first_hop.truncated_by_depth);

    // Scoping to a group keeps the traversal inside the listed containers.
    let group = Group {
        header: EntityHeader::new("GR_branch_a"),
        items: ["DS_a", "DS_c"].into_iter().map(|d| EntityKey::new(EntityKind::Dataset, d)).chain([
            EntityKey::new(EntityKind::Transform, "TF_a"),
            EntityKey::new(EntityKind::Transform, "TF_c"),
        ]).collect(),
        ..Default::default()
    };
    log.commit(TransactionDraft::new(IDENTITY).add(group))?;
    let scoped = TraceOptions { restrict_to_group: Some("GR_branch_a".into()), ..Default::default() };
    let branch = trace::forward_trace(log.live(), &"R_x".into(), &scoped)?;
    show("downstream of R_x within GR_branch_a", log.live(), &branch);
    assert_eq!(branch.revisions().count(), 5);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
