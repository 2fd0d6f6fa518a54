fn main() {
    std::process::exit(nodal_lab::cli::main());
}
