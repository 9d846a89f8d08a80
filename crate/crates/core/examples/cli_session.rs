// Drives the `lineage` command line in-process: initialise a log, commit
// drafts, query it as text and JSON.

use lineage::cli;

fn lineage(args: &[&str]) -> Result<String, Box<dyn std::error::Error>> {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(std::iter::once("lineage").chain(args.iter().copied()), &mut out, &mut err);
    if code != 0 {
        return Err(format!("lineage {} exited with {code}: {}", args.join(" "), String::from_utf8_lossy(&err)).into());
    }
    Ok(String::from_utf8(out)?)
}

const CATALOG: &str = r#"{
  "identity_id": "ID_me",
  "additions": [
    {"kind": "identity", "id": "ID_me", "external_provider_id": "ldap", "external_actor_id": "me"},
    {"kind": "type", "id": "TY_csv", "name": "csv"},
    {"kind": "type_revision", "id": "TYR_csv_1", "type_id": "TY_csv", "version": "1"},
    {"kind": "dataset", "id": "DS_raw", "type_id": "TY_csv", "name": "raw"},
    {"kind": "dataset", "id": "DS_clean", "type_id": "TY_csv", "name": "clean"},
    {"kind": "transform", "id": "TF_clean", "name": "clean"},
    {"kind": "transform_revision", "id": "TR_clean_1", "transform_id": "TF_clean", "external_commit_id": "abc123",
     "tracing_properties": {"deterministic": true}},
    {"kind": "transform_slot", "id": "TR_clean_1.in", "transform_revision_id": "TR_clean_1", "type_revision_id": "TYR_csv_1",
     "name": "in", "direction": "input"},
    {"kind": "transform_slot", "id": "TR_clean_1.out", "transform_revision_id": "TR_clean_1", "type_revision_id": "TYR_csv_1",
     "name": "out", "direction": "output"},
    {"kind": "dataset_revision", "id": "R_raw_1", "dataset_id": "DS_raw", "type_revision_id": "TYR_csv_1",
     "external_source_id": "sftp://vendor/drop-1", "external_blob_id": "s3://raw/1.csv"}
  ]
}"#;

const RUN: &str = r#"{
  "identity_id": "ID_me",
  "additions": [
    {"kind": "transform_execution", "id": "E_clean_1", "transform_revision_id": "TR_clean_1"},
    {"kind": "transform_execution_slot", "id": "E_clean_1.in", "transform_execution_id": "E_clean_1",
     "transform_slot_id": "TR_clean_1.in", "dataset_id": "DS_raw", "dataset_revision_id": "R_raw_1"},
    {"kind": "transform_execution_slot", "id": "E_clean_1.out", "transform_execution_id": "E_clean_1",
     "transform_slot_id": "TR_clean_1.out", "dataset_id": "DS_clean", "dataset_revision_id": "R_clean_1"},
    {"kind": "dataset_revision", "id": "R_clean_1", "dataset_id": "DS_clean", "type_revision_id": "TYR_csv_1",
     "transform_execution_slot_id": "E_clean_1.out", "external_blob_id": "s3://clean/1.csv"}
  ]
}"#;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let log = dir.path().join("lineage.jsonl");
    let log = log.to_str().ok_or("non-UTF-8 temp path")?;
    let catalog = dir.path().join("catalog.json");
    let run = dir.path().join("run.json");
    std::fs::write(&catalog, CATALOG)?;
    std::fs::write(&run, RUN)?;

    print!("{}", lineage(&["--log", log, "init"])?);
    print!("{}", lineage(&["--log", log, "validate-file", catalog.to_str().unwrap_or_default()])?);
    print!("{}", lineage(&["--log", log, "commit", catalog.to_str().unwrap_or_default()])?);
    print!("{}", lineage(&["--log", log, "commit", run.to_str().unwrap_or_default()])?);
    print!("{}", lineage(&["--log", log, "trace", "backward", "DS_clean:latest"])?);
    print!("{}", lineage(&["--log", log, "closure", "DS_clean:R_clean_1"])?);
    let json = lineage(&["--log", log, "--format", "json", "leaves", "DS_raw:R_raw_1"])?;
    let leaves: Vec<String> = serde_json::from_str(&json)?;
    println!("leaves as JSON: {leaves:?}");
    assert_eq!(leaves, ["R_clean_1"]);
    print!("{}", lineage(&["--log", log, "validate"])?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
