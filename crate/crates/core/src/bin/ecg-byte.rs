fn main() {
    std::process::exit(ecg_byte::cli::main_with_args(std::env::args_os()));
}
