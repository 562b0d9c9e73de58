use std::process::ExitCode;

fn main() -> ExitCode {
    let env_out = std::env::var(atomflux_cli::OUT_ENV).ok();
    ExitCode::from(atomflux_cli::main_with(std::env::args_os(), env_out))
}
