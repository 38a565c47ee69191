fn main() {
    std::process::exit(veerkit::cli::main());
}
