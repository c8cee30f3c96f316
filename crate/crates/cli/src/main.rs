fn main() {
    std::process::exit(mcot_cli::run(std::env::args_os()));
}
