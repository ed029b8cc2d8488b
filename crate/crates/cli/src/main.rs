//! Command-line front end for the learning-curve toolkit.

mod config;
mod error;
mod plot;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ResolvedConfig;
use error::CliError;

#[derive(Parser)]
#[command(
    name = "learncurve",
    version,
    about = "Simulate learning curves over random correlation matrices and \
             run checkpointed collaborative-filtering experiments"
)]
struct Cli {
    /// Flat key=value config file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (created if absent).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Seed override (wins over the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override one config key, e.g. --set K=500. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// MovieLens-format ratings file (accumulate / ingest-summary /
    /// cf-train / cf-eval).
    #[arg(long, global = true)]
    ratings: Option<PathBuf>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run learning trajectories and write the long table plus summary.
    Simulate,
    /// Monte Carlo check of the mean-zero R-squared recursion.
    Verify,
    /// Closed-form mean curves and partial correlations.
    Theory,
    /// Train a factor model on a ratings file and save it.
    CfTrain,
    /// Evaluate a saved model on a ratings file.
    CfEval,
    /// Checkpointed data-accumulation experiment.
    Accumulate,
    /// Parse a ratings file and write its summary statistics.
    IngestSummary,
    /// Render SVG charts from previously written CSVs.
    Plot,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Verify => "verify",
            Command::Theory => "theory",
            Command::CfTrain => "cf-train",
            Command::CfEval => "cf-eval",
            Command::Accumulate => "accumulate",
            Command::IngestSummary => "ingest-summary",
            Command::Plot => "plot",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let cfg = match ResolvedConfig::from_sources(cli.config.as_deref(), &cli.sets, cli.seed) {
        Ok(cfg) => cfg,
        Err(e) => return fail(cli.command.name(), None, e),
    };

    let threads = cli.threads.unwrap_or_else(|| cfg.get_usize("threads"));
    if threads > 0 {
        // Ignore the error if a pool already exists (tests, repeat calls).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }

    let ratings = cli.ratings.as_deref();
    let result = match &cli.command {
        Command::Simulate => run::cmd_simulate(&cfg, &cli.out),
        Command::Verify => run::cmd_verify(&cfg, &cli.out),
        Command::Theory => run::cmd_theory(&cfg, &cli.out),
        Command::CfTrain => run::cmd_cf_train(&cfg, &cli.out, ratings),
        Command::CfEval => run::cmd_cf_eval(&cfg, &cli.out, ratings),
        Command::Accumulate => run::cmd_accumulate(&cfg, &cli.out, ratings),
        Command::IngestSummary => run::cmd_ingest_summary(&cfg, &cli.out, ratings),
        Command::Plot => run::cmd_plot(&cfg, &cli.out),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(cli.command.name(), Some(&cfg), e),
    }
}

/// Prints the single-line machine-parsable error and maps it to the exit
/// code contract: 2 config, 3 numerical, 4 I/O.
fn fail(command: &str, cfg: Option<&ResolvedConfig>, err: CliError) -> ExitCode {
    let echo = cfg
        .map(|c| c.echo_non_defaults())
        .unwrap_or_else(|| "unresolved".to_string());
    eprintln!(
        "error code={} kind={} command={} msg={:?} config={:?}",
        err.exit_code(),
        err.kind(),
        command,
        err.to_string(),
        echo
    );
    ExitCode::from(err.exit_code() as u8)
}
