use std::process::ExitCode;

fn main() -> ExitCode {
    qpsim::cli::main_with_args(std::env::args_os())
}
