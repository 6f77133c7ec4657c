use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(rcsynth::main_with_args(std::env::args_os()))
}
