fn main() {
    std::process::exit(lineage::cli::main());
}
