fn main() {
    std::process::exit(styleprint_cli::run(std::env::args_os()));
}
