fn main() {
    std::process::exit(smle::cli::main_with_args(std::env::args_os()));
}
