fn main() {
    std::process::exit(sparsecast::harness::cli::run_cli(std::env::args_os()));
}
