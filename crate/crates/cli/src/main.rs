fn main() {
    std::process::exit(lsgd_cli::run_cli(std::env::args_os()));
}
