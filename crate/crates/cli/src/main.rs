fn main() {
    std::process::exit(rootbarrier_cli::run(std::env::args_os()));
}
