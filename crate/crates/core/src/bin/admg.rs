fn main() {
    std::process::exit(admg_core::cli::run(std::env::args()));
}
