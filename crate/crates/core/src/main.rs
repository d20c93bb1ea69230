fn main() {
    std::process::exit(bombtest::cli::main_with_args(std::env::args_os()));
}
