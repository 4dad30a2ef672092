fn main() {
    std::process::exit(qbridge_cli::run(std::env::args_os()));
}
