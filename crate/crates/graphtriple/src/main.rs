fn main() {
    std::process::exit(graphtriple::cli::run());
}
