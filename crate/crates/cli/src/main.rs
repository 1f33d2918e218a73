fn main() {
    std::process::exit(trajair_cli::run(std::env::args_os()));
}
