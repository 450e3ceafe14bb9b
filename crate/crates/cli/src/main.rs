fn main() {
    std::process::exit(stoloc_cli::run(std::env::args_os()));
}
