use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::commands::{cmd_batch, cmd_gen, cmd_oracle, cmd_solve, cmd_weights, Outcome};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "wadmm", version, about = "Uncertainty-weighted consensus ADMM experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Run configuration (flat key = value file).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Global seed; overrides `seed` in the config.
    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,

    /// Suppress the summary line.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate a problem and its split.
    Gen,
    /// Compute uncertainty (or identity) weights for a generated problem.
    Weights,
    /// Run a solver on a generated problem.
    Solve,
    /// Dense MAP solution and posterior diagonals (small problems only).
    Oracle,
    /// Weighted vs unweighted ADMM over a manifest of matrices.
    Batch,
}

impl Cli {
    /// Final config after command-line overrides, and the output directory.
    pub fn resolve(&self) -> CliResult<(RunConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        let out = match (&self.out, &cfg.out) {
            (Some(o), _) => o.clone(),
            (None, Some(o)) => cfg.resolve(o),
            (None, None) => return Err(CliError::Config("no output directory (use --out or `out =`)".into())),
        };
        Ok((cfg, out))
    }

    pub fn execute(&self) -> CliResult<Outcome> {
        let (cfg, out) = self.resolve()?;
        dispatch(self.command, &cfg, &out)
    }
}

pub fn dispatch(command: Command, cfg: &RunConfig, out: &Path) -> CliResult<Outcome> {
    match command {
        Command::Gen => cmd_gen(cfg, out),
        Command::Weights => cmd_weights(cfg, out),
        Command::Solve => cmd_solve(cfg, out),
        Command::Oracle => cmd_oracle(cfg, out),
        Command::Batch => cmd_batch(cfg, out),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match cli.execute() {
        Ok(outcome) => {
            if !cli.quiet {
                println!("{}", outcome.summary);
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
