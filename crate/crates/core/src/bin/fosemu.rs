fn main() {
    std::process::exit(fosemu::cli::main_with_args(std::env::args_os()));
}
