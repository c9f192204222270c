fn main() {
    std::process::exit(gode_cli::run(std::env::args_os()));
}
