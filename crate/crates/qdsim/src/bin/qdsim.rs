fn main() {
    std::process::exit(qdsim::cli::run_cli());
}
