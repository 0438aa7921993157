fn main() {
    std::process::exit(gaussent::cli::main_with_args(std::env::args_os()));
}
