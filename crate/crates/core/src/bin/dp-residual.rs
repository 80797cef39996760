fn main() {
    std::process::exit(dp_residual::cli::main_with_args(std::env::args_os()));
}
