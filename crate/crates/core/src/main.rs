fn main() {
    std::process::exit(agrm::cli::run_from(std::env::args_os()));
}
