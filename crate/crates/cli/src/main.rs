use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fcfl_cli::config::{CliError, Overrides};
use fcfl_cli::{cmd_budget_sweep, cmd_compare, cmd_run};

/// Fairness-constrained federated training simulator.
#[derive(Parser)]
#[command(name = "fcfl", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration (TOML).
    config: PathBuf,
    /// Override the config's optimizer seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides<'_> {
        Overrides {
            seed: self.seed,
            out: self.out.as_deref(),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute the experiment a config describes.
    Run(CommonArgs),
    /// Measure per-client disparities with an unconstrained baseline, then
    /// run once per w with budgets w x (baseline disparity).
    BudgetSweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Budget scale factors (repeatable or comma-separated).
        #[arg(long = "w", required = true, num_args = 1.., value_delimiter = ',')]
        w: Vec<f64>,
        /// Parallel run workers.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Run fcfl and fedave_fairreg on the same problem and seed.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Parallel run workers.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

/// Exit codes: 0 success, 1 runtime failure, 2 fairness budgets not met,
/// 3 configuration or usage error.
fn main() -> ExitCode {
    env_logger::init();
    // Usage mistakes are configuration errors; clap's default exit code (2)
    // would collide with "budgets not met".
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let outcome = match &cli.cmd {
        Cmd::Run(common) => cmd_run(&common.config, common.overrides()).map(|artifacts| {
            println!("summary: {}", artifacts.summary_path.display());
            println!("trajectory: {}", artifacts.trajectory_path.display());
            artifacts.outcome.flags.mcf_violated
        }),
        Cmd::BudgetSweep { common, w, workers } => {
            cmd_budget_sweep(&common.config, w, *workers, common.overrides()).map(|sweep| {
                println!("baseline: {}", sweep.baseline.summary_path.display());
                println!("sweep table: {}", sweep.table_path.display());
                sweep.any_mcf_violated
            })
        }
        Cmd::Compare { common, workers } => {
            cmd_compare(&common.config, *workers, common.overrides()).map(|cmp| {
                println!("comparison table: {}", cmp.table_path.display());
                cmp.mcf_violated
            })
        }
    };
    match outcome {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("fairness budgets not met on at least one client (mcf_violated)");
            ExitCode::from(2)
        }
        Err(e @ CliError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
