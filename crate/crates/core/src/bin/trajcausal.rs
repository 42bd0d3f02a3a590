fn main() {
    std::process::exit(trajcausal::cli::run(std::env::args_os()));
}
