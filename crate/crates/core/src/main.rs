fn main() {
    std::process::exit(vibqudit::cli::main_with_args(std::env::args_os()));
}
