//! `evt`: synthesize event streams, inspect their patch representation,
//! train and run the classifier, and measure its cost.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// `println!` that ends the process quietly once stdout is closed.
macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        if writeln!(std::io::stdout().lock(), $($arg)*).is_err() {
            std::process::exit(0);
        }
    }};
}

/// `print!` counterpart of [`outln!`].
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        if write!(std::io::stdout().lock(), $($arg)*).is_err() {
            std::process::exit(0);
        }
    }};
}

mod bench;
mod data;
mod infer;
mod repr;
mod stats;
mod synth;
mod train;

/// Command-line errors that stem from how the tool was invoked rather than
/// from the data it was given.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

#[derive(Parser)]
#[command(
    name = "evt",
    version,
    about = "Sparse event-camera transformer pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config file plus `section.key=value` overrides, shared by several
/// subcommands.
#[derive(clap::Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// JSON run config; absent keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one setting, e.g. `--set repr.bins=4` (repeatable).
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> anyhow::Result<evt_core::config::RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => evt_core::config::RunConfig::load(p)
                .map_err(|e| usage(format!("config {}: {e}", p.display())))?,
            None => evt_core::config::RunConfig::default(),
        };
        for o in &self.overrides {
            cfg.set(o).map_err(|e| usage(e.to_string()))?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic gesture streams.
    Synth(synth::Args),
    /// Show the windows and activated patches of a stream.
    Repr(repr::Args),
    /// Train a classifier on a directory of labeled streams.
    Train(train::Args),
    /// Classify streams with a trained checkpoint.
    Infer(infer::Args),
    /// Report FLOPs, parameters and per-window latency.
    Bench(bench::Args),
    /// Activated-patch statistics over a dataset.
    Stats(stats::Args),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth::run(a),
        Command::Repr(a) => repr::run(a),
        Command::Train(a) => train::run(a),
        Command::Infer(a) => infer::run(a),
        Command::Bench(a) => bench::run(a),
        Command::Stats(a) => stats::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply_after_the_file() {
        let d = tempfile::tempdir().unwrap();
        let path = d.path().join("run.json");
        std::fs::write(&path, r#"{"repr": {"bins": 4}, "train": {"epochs": 3}}"#).unwrap();
        let args = ConfigArgs {
            config: Some(path),
            overrides: vec!["train.epochs=5".into()],
        };
        let cfg = args.resolve().unwrap();
        assert_eq!((cfg.repr.bins, cfg.train.epochs), (4, 5));
    }

    #[test]
    fn bad_overrides_are_usage_errors() {
        let args = ConfigArgs {
            config: None,
            overrides: vec!["repr.nope=1".into()],
        };
        assert!(args
            .resolve()
            .unwrap_err()
            .downcast_ref::<Usage>()
            .is_some());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
