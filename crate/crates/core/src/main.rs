fn main() {
    std::process::exit(shortrate::cli::main_exit_code());
}
