fn main() {
    std::process::exit(turnpike::cli::main_with_args(std::env::args_os()));
}
