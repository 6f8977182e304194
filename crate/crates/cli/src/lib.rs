//! Command-line front end: argument handling, config files, data files and
//! reports. The binary in `main.rs` only forwards to [`run`].

pub mod commands;
pub mod config;
pub mod fileformat;
pub mod report;

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

use commands::{execute, RunError};
use config::{expand_backends, parse_config, BackendChoice, Command, RunConfig};
use fileformat::DataKind;

/// Exit status when every check passed.
pub const EXIT_PASS: u8 = 0;
/// Exit status when at least one check failed.
pub const EXIT_CHECK_FAILED: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "flagqm", version, about = "Complex and real-number quantum mechanics, side by side")]
#[command(allow_negative_numbers = true)]
pub struct Cli {
    /// What to run. May instead come from the config file.
    #[arg(value_enum)]
    pub command: Option<Command>,

    /// Formalism used by `bellswap`; `both` adds a differential comparison.
    #[arg(long, value_enum)]
    pub backend: Option<BackendChoice>,

    /// Config file with `key = value` lines; flags override it.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Report file for `bellswap` and `verify`, data file for the map commands.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Data file read by the map commands.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,

    /// Representation written by the map commands.
    #[arg(long, value_enum)]
    pub to: Option<DataKind>,

    /// Seed for the random suites of `verify`.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Random instances per suite.
    #[arg(long)]
    pub trials: Option<usize>,

    /// Largest accepted residual.
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Defaults, then the config file, then flags.
pub fn resolve(cli: &Cli) -> Result<RunConfig, RunError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| RunError::Io { path: path.clone(), message: e.to_string() })?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(c) = cli.command {
        cfg.command = Some(c);
    }
    if let Some(b) = cli.backend {
        cfg.backends = expand_backends(&[b]);
    }
    if let Some(p) = &cli.out {
        cfg.out = Some(p.clone());
    }
    if let Some(p) = &cli.input {
        cfg.input = Some(p.clone());
    }
    if let Some(k) = cli.to {
        cfg.to = Some(k);
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(t) = cli.tol {
        cfg.tolerance = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &PathBuf, text: &str) -> Result<(), RunError> {
    fs::write(path, text).map_err(|e| RunError::Io { path: path.clone(), message: e.to_string() })
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: &Cli) -> u8 {
    match try_run(cli) {
        Ok(pass) => {
            if pass {
                EXIT_PASS
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("flagqm: {e}");
            e.exit_code()
        }
    }
}

fn try_run(cli: &Cli) -> Result<bool, RunError> {
    let cfg = resolve(cli)?;
    let outcome = execute(&cfg)?;
    let text = outcome.report.render();
    match outcome.output {
        Some((path, data)) => {
            write_file(&path, &data)?;
            print_stdout(&text);
        }
        None if matches!(cfg.command, Some(Command::MapState | Command::MapOperator)) => print_stdout(&text),
        None => match &cfg.out {
            Some(path) => write_file(path, &text)?,
            None => print_stdout(&text),
        },
    }
    let pass = outcome.report.pass();
    let failed = outcome.report.checks.iter().filter(|c| !c.pass).count();
    if pass {
        eprintln!("flagqm: {} checks passed", outcome.report.checks.len());
    } else {
        eprintln!("flagqm: {failed} of {} checks failed", outcome.report.checks.len());
    }
    Ok(pass)
}

fn print_stdout(text: &str) {
    let mut out = std::io::stdout().lock();
    // a closed pipe is not worth a panic
    let _ = out.write_all(text.as_bytes());
}

#[cfg(test)]
mod tests {
    use super::*;
    use flagqm::bellswap::Backend;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("flagqm").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_defaults() {
        let cfg = resolve(&parse(&["verify", "--seed", "7", "--trials", "5", "--tol", "1e-8"])).unwrap();
        assert_eq!(cfg.command, Some(Command::Verify));
        assert_eq!((cfg.seed, cfg.trials, cfg.tolerance), (7, 5, 1e-8));
    }

    #[test]
    fn backend_flag() {
        let cfg = resolve(&parse(&["bellswap", "--backend", "both"])).unwrap();
        assert_eq!(cfg.backends, vec![Backend::Complex, Backend::Real]);
    }

    #[test]
    fn invalid_flag_values_are_config_errors() {
        assert_eq!(resolve(&parse(&["verify", "--tol", "-1"])).unwrap_err().exit_code(), 2);
        assert_eq!(resolve(&parse(&["verify", "--trials", "0"])).unwrap_err().exit_code(), 2);
        assert!(Cli::try_parse_from(["flagqm", "verify", "--backend", "quaternion"]).is_err());
    }

    #[test]
    fn missing_config_file_is_io_error() {
        let err = resolve(&parse(&["verify", "--config", "/nonexistent/flagqm.toml"])).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
