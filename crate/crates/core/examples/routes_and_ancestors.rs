// Which revisions of a dataset fed a result, and along which routes.

use lineage::fixtures::train_eval_log;
use lineage::trace;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let log = train_eval_log();
    let store = log.live();

    let ancestors = trace::ancestors(store, &"R_y".into(), &"DS_in".into())?;
    println!("ancestors(DS_out:R_y, DS_in) = {ancestors:?}");
    assert_eq!(ancestors, ["R_x".into()]);

    let routes = trace::lineage_route(store, &"R_y".into(), &"R_x".into(), None)?;
    for route in &routes.routes {
        println!("route: {}", route.notation(store));
    }
    assert_eq!(routes.routes.len(), 1);
    assert_eq!(routes.routes[0].notation(store), "[TF_1:E_1, DS_1:R_1, TF_2:E_2]");

    // A revision that did not contribute has no route.
    let none = trace::lineage_route(store, &"R_x".into(), &"R_y".into(), None)?;
    assert!(none.routes.is_empty());

    let capped = trace::lineage_route(store, &"R_y".into(), &"R_x".into(), Some(0))?;
    println!("with a limit of 0 routes: truncated = {}", capped.truncated);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
