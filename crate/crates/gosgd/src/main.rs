fn main() {
    std::process::exit(gosgd::cli::main_entry());
}
