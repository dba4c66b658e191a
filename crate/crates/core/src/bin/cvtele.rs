use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(cvtele::cli::run(std::env::args_os()))
}
