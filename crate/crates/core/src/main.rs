fn main() {
    std::process::exit(landing_core::cli::run(std::env::args_os()));
}
