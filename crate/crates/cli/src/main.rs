fn main() {
    std::process::exit(scalesi_cli::main_with_args(std::env::args_os()));
}
