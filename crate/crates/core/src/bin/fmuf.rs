fn main() {
    std::process::exit(fmuf::cli::main_with_args(std::env::args_os()));
}
