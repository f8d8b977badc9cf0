fn main() {
    std::process::exit(hemtkit::cli::run_from(std::env::args_os()));
}
