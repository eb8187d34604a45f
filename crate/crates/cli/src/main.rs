use std::process::ExitCode;

fn main() -> ExitCode {
    let code = dirac_phase_cli::run(std::env::args_os());
    ExitCode::from(code)
}
