use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use uos_core::ExecMode;
use uos_recover::{run_experiment, CliError, Command, ExperimentConfig};

const EXIT_CONFIG: u8 = 1;
const EXIT_VIOLATION: u8 = 2;

/// Seeded recovery experiments over union-of-subspaces models.
#[derive(Debug, Parser)]
#[command(name = "uos-recover", version)]
struct Cli {
    /// Experiment to run; overrides `command` in the config file.
    command: Command,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output table path; stdout when neither this nor `output` is set.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Exit with status 2 if bounds-check finds a violated bound.
    #[arg(long = "assert")]
    assert_bounds: bool,
    /// Run trials on the current thread only.
    #[arg(long)]
    sequential: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(violations) if cli.assert_bounds && violations > 0 => {
            eprintln!("uos-recover: {violations} bound violation(s)");
            ExitCode::from(EXIT_VIOLATION)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("uos-recover: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn run(cli: &Cli) -> Result<usize, CliError> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    cfg.command = cli.command;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(out.to_string_lossy().into_owned());
    }
    if cli.assert_bounds && cfg.command != Command::BoundsCheck {
        return Err(CliError::Config("--assert only applies to bounds-check".into()));
    }
    let mode = if cli.sequential { ExecMode::Sequential } else { ExecMode::Parallel };
    let report = run_experiment(&cfg, mode)?;
    match &cfg.output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            report.table.write_to(&mut w)?;
            w.flush()?;
        }
        None => report.table.write_to(io::stdout().lock())?,
    }
    Ok(report.violations)
}
