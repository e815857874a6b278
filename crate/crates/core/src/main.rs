fn main() {
    std::process::exit(pointflow::cli::main_with_args(std::env::args_os()));
}
