fn main() {
    std::process::exit(gce_service::cli::run_cli(std::env::args_os()));
}
