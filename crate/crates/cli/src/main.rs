fn main() {
    std::process::exit(jacette_cli::main_entry());
}
