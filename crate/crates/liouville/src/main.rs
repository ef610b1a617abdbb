use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(liouville::cli::run())
}
