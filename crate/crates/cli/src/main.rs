mod args;
mod commands;
mod config;

use std::path::Path;
use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use args::{Cli, Command};

const USAGE_ERROR: u8 = 1;
const RUNTIME_ERROR: u8 = 2;

/// Caps the global rayon pool at `CORRIDORNAV_THREADS` when it is set.
fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("CORRIDORNAV_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| anyhow::anyhow!("CORRIDORNAV_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let mut argv: Vec<String> = std::env::args().collect();
    if argv.len() <= 1 {
        eprintln!("{}", Cli::command().render_help());
        return ExitCode::from(USAGE_ERROR);
    }
    if let Some(path) = config::find_config_path(&argv) {
        argv = match config::merge(argv, &Command::NAMES, Path::new(&path)) {
            Ok(merged) => merged,
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(USAGE_ERROR);
            }
        };
    }
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(USAGE_ERROR);
    }
    match commands::run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(RUNTIME_ERROR)
        }
    }
}
