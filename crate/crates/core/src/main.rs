fn main() {
    std::process::exit(clinasr::cli::run_command(std::env::args()));
}
