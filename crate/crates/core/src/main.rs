fn main() -> std::process::ExitCode {
    clover_lab::cli::main_with_args(std::env::args_os())
}
