fn main() {
    std::process::exit(fimax::cli::main());
}
