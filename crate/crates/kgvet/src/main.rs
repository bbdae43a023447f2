fn main() {
    std::process::exit(kgvet::cli::main());
}
