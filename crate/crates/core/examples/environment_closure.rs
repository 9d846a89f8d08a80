// Everything needed to reproduce a revision: upstream revisions, transform
// revisions (code), type revisions (schemas) and external identifiers.

use lineage::fixtures::train_eval_log;
use lineage::trace;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let log = train_eval_log();
    let closure = trace::environment_closure(log.live(), &"R_y".into())?;

    println!("dataset revisions:   {:?}", closure.dataset_revisions);
    println!("transform revisions: {:?}", closure.transform_revisions);
    println!("type revisions:      {:?}", closure.type_revisions);
    for external in &closure.external_refs {
        println!("  {} {} = {}", external.entity, external.field, external.value);
    }
    assert_eq!(closure.dataset_revisions.len(), 3);
    assert_eq!(closure.transform_revisions.len(), 2);
    assert!(closure.external_refs.iter().any(|x| x.field == "external_commit_id"));
    println!("{}", serde_json::to_string_pretty(&closure)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
