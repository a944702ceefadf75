fn main() {
    std::process::exit(symlab::cli::main());
}
