fn main() {
    std::process::exit(robust_sysid::cli::main_with_args(std::env::args_os()));
}
