// Textual references: `DS:R`, `DS:latest`, `DS:head-N`, `TF:E`,
// `TF:TR:E`, bare ids and bracketed routes.

use lineage::fixtures::{train_eval_log, imported_revision, IDENTITY};
use lineage::model::parse_entity_ref;
use lineage::query::{resolve_ref, Resolved};
use lineage::TransactionDraft;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut log = train_eval_log();
    log.commit(TransactionDraft::new(IDENTITY).add(imported_revision("R_x2", "DS_in", "hpo/x2.json")))?;
    let store = log.live();

    for text in ["DS_in:latest", "DS_in:head-1", "DS_out:R_y", "TF_2:E_2", "TF_1:TF_1_v1:E_1", "TY_blob", "[TF_1:E_1, DS_1:R_1]"] {
        let reference = parse_entity_ref(text)?;
        match resolve_ref(store, &reference)? {
            Resolved::Entity(key) => println!("{text:<24} -> {key}"),
            Resolved::Route(keys) => {
                let keys: Vec<String> = keys.iter().map(ToString::to_string).collect();
                println!("{text:<24} -> {}", keys.join(" > "));
            }
        }
    }

    for bad in ["DS_in:head-7", "TF_2:E_1", "DS_in:"] {
        let outcome = parse_entity_ref(bad).map_err(|e| e.to_string()).and_then(|r| resolve_ref(store, &r).map_err(|e| e.to_string()));
        println!("{bad:<24} -> error: {}", outcome.unwrap_err());
    }
    let latest = resolve_ref(store, &parse_entity_ref("DS_in:latest")?)?;
    assert!(matches!(latest, Resolved::Entity(k) if k.id.as_str() == "R_x2"));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
