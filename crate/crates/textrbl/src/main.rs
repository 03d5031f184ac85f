fn main() {
    std::process::exit(textrbl::cli::main_with_args(std::env::args_os()));
}
