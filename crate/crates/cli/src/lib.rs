//! Command-line driver: scenario files in, CSV tables out.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use commands::Command;
pub use config::{parse_config, Scenario};
pub use error::CliError;
pub use output::Output;

/// Environment variable overriding the output directory.
pub const OUT_ENV: &str = "ATOMFLUX_OUT";

#[derive(Debug, Parser)]
#[command(name = "atomflux", version, about = "Two-level atom scattering, Bohmian trajectories and characteristic times")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Scenario file (`key = value unit` lines); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides ATOMFLUX_OUT and the scenario's `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write SVG line plots next to the tables.
    #[arg(long)]
    pub svg: bool,
}

pub fn load_scenario(path: Option<&PathBuf>) -> Result<Scenario, CliError> {
    match path {
        None => Ok(Scenario::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::Io { path: p.clone(), source })?;
            parse_config(&text)
        }
    }
}

/// Runs one invocation and returns the process exit code. Summary lines go
/// to stdout and errors to stderr.
pub fn main_with<I, T>(argv: I, env_out: Option<String>) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let scenario = match load_scenario(args.config.as_ref()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let dir = output::resolve_dir(args.out.as_deref(), env_out.as_deref(), &scenario.output_dir);
    let mut out = Output::new(dir, args.svg);
    let result = out.text("scenario.cfg", &scenario.canonical()).and_then(|()| commands::run(args.command, &scenario, &mut out));
    for line in out.notes() {
        println!("{line}");
    }
    match result {
        Ok(()) => {
            for path in out.written() {
                println!("wrote {}", path.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
