fn main() {
    std::process::exit(kahler_cli::run(std::env::args_os()));
}
