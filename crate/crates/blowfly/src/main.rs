fn main() {
    std::process::exit(blowfly::cli::main_entry());
}
