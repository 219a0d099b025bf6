fn main() {
    std::process::exit(cartanforge::cli::main_with_args(std::env::args_os()));
}
