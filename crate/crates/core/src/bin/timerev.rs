fn main() {
    std::process::exit(timerev::cli::main_with_args(std::env::args_os()));
}
