fn main() {
    std::process::exit(graphvx::cli::run(std::env::args_os()));
}
