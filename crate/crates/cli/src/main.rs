fn main() {
    std::process::exit(linot_cli::run_cli(std::env::args_os()));
}
