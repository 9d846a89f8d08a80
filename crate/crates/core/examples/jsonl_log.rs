// The changelog on disk: one canonical JSON transaction per line.

use lineage::fixtures::{train_eval_log, imported_revision, IDENTITY};
use lineage::interchange::{append_transaction, load_log, read_log, write_log};
use lineage::TransactionDraft;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("lineage.jsonl");

    let mut log = train_eval_log();
    write_log(std::fs::File::create(&path)?, log.transactions())?;
    let text = std::fs::read_to_string(&path)?;
    println!("{} transactions, first line:\n{}", text.lines().count(), text.lines().next().unwrap_or_default());

    log.commit(TransactionDraft::new(IDENTITY).add(imported_revision("R_x2", "DS_in", "hpo/x2.json")))?;
    append_transaction(&path, log.transactions().last().ok_or("empty log")?)?;

    let reloaded = load_log(&path)?;
    assert_eq!(reloaded.live(), log.live());
    println!("reloaded {} entities at transaction {}", reloaded.live().len(), reloaded.last_seq());

    let mut bytes = Vec::new();
    write_log(&mut bytes, reloaded.transactions())?;
    assert_eq!(bytes, std::fs::read(&path)?, "serialisation is byte-for-byte stable");

    let broken = format!("{}\n{{\"seq\": 2, oops}}\n", text.lines().next().unwrap_or_default());
    let err = read_log(broken.as_bytes()).unwrap_err();
    println!("corrupt log: {err}");
    assert_eq!(err.line(), Some(2));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
