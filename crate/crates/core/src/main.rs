fn main() {
    std::process::exit(evstereo::cli::main_with_args(std::env::args_os()));
}
