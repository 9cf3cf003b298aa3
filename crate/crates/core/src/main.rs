fn main() {
    std::process::exit(subseg::cli::main());
}
