fn main() {
    std::process::exit(hallway::cli::main_with_args(std::env::args_os()));
}
