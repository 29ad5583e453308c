fn main() -> std::process::ExitCode {
    qag_cli::main_with_args(std::env::args_os())
}
