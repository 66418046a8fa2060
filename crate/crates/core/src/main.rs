fn main() {
    std::process::exit(snlw::cli::main_with_args(std::env::args_os()));
}
