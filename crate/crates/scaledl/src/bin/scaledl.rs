use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(scaledl::cli::run(std::env::args_os()) as u8)
}
