fn main() {
    std::process::exit(arbor_rcm::cli::main_with_args(std::env::args_os()));
}
