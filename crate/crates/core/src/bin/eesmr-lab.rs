fn main() {
    std::process::exit(eesmr_lab::cli::main_with_args(std::env::args_os()));
}
