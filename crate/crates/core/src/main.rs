fn main() {
    std::process::exit(fasm::cli::main_with_args(std::env::args_os()));
}
