use std::process::ExitCode;

fn main() -> ExitCode {
    let code = uegd::cli::run_args(std::env::args_os());
    ExitCode::from(code as u8)
}
