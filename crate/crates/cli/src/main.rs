fn main() {
    std::process::exit(kothe_shifts_cli::main_with_args(std::env::args_os()));
}
