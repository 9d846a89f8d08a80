// Every example doubles as a test.

mod record_flow {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/record_flow.rs"));
}

#[test]
fn record_flow_runs() {
    record_flow::run_example().expect("record_flow example failed");
}

mod trace_lineage {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/trace_lineage.rs"));
}

#[test]
fn trace_lineage_runs() {
    trace_lineage::run_example().expect("trace_lineage example failed");
}

mod prune_privacy {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/prune_privacy.rs"));
}

#[test]
fn prune_privacy_runs() {
    prune_privacy::run_example().expect("prune_privacy example failed");
}

mod routes_and_ancestors {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/routes_and_ancestors.rs"));
}

#[test]
fn routes_and_ancestors_runs() {
    routes_and_ancestors::run_example().expect("routes_and_ancestors example failed");
}

mod environment_closure {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/environment_closure.rs"));
}

#[test]
fn environment_closure_runs() {
    environment_closure::run_example().expect("environment_closure example failed");
}

mod deprecation_report {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/deprecation_report.rs"));
}

#[test]
fn deprecation_report_runs() {
    deprecation_report::run_example().expect("deprecation_report example failed");
}

mod time_travel {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/time_travel.rs"));
}

#[test]
fn time_travel_runs() {
    time_travel::run_example().expect("time_travel example failed");
}

mod immutability {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/immutability.rs"));
}

#[test]
fn immutability_runs() {
    immutability::run_example().expect("immutability example failed");
}

mod jsonl_log {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/jsonl_log.rs"));
}

#[test]
fn jsonl_log_runs() {
    jsonl_log::run_example().expect("jsonl_log example failed");
}

mod dot_export {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/dot_export.rs"));
}

#[test]
fn dot_export_runs() {
    dot_export::run_example().expect("dot_export example failed");
}

mod resolve_refs {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/resolve_refs.rs"));
}

#[test]
fn resolve_refs_runs() {
    resolve_refs::run_example().expect("resolve_refs example failed");
}

mod cli_session {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/cli_session.rs"));
}

#[test]
fn cli_session_runs() {
    cli_session::run_example().expect("cli_session example failed");
}

mod scale_trace {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/scale_trace.rs"));
}

#[test]
fn scale_trace_runs() {
    scale_trace::run_example().expect("scale_trace example failed");
}
