fn main() {
    std::process::exit(lungrad_cli::run(std::env::args_os()));
}
