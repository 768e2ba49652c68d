fn main() -> std::process::ExitCode {
    capsim_cli::main_with_args(std::env::args_os())
}
