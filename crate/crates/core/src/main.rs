fn main() {
    std::process::exit(dsmimo::harness::cli::main_with_args(std::env::args_os()));
}
