fn main() {
    std::process::exit(disclosure_core::cli::main_with_args(std::env::args_os()));
}
