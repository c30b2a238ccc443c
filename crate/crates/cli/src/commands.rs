//! The three batch commands: a single run, a client-specific budget sweep,
//! and an fcfl-vs-baseline comparison. Each leaves per-run artifacts plus a
//! command-level table under the config's output directory.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde_json::{json, Value};

use crate::config::{BudgetMode, CliError, CliResult, ModeChoice, Overrides, RunConfig};
use crate::report;
use crate::runner::{execute, RunArtifacts};

pub struct SweepArtifacts {
    pub baseline: RunArtifacts,
    /// In the order the w values were given.
    pub members: Vec<(f64, RunArtifacts)>,
    pub table_path: PathBuf,
    pub any_mcf_violated: bool,
}

pub struct CompareArtifacts {
    pub fcfl: RunArtifacts,
    pub fedave: RunArtifacts,
    pub table_path: PathBuf,
    /// Constraint satisfaction is judged on the run that enforces them.
    pub mcf_violated: bool,
}

pub fn cmd_run(config_path: &Path, overrides: Overrides<'_>) -> CliResult<RunArtifacts> {
    let cfg = RunConfig::load(config_path, overrides)?;
    let out = cfg.output_dir.clone();
    execute(&cfg, "run", &out)
}

pub fn cmd_budget_sweep(
    config_path: &Path,
    w_list: &[f64],
    workers: usize,
    overrides: Overrides<'_>,
) -> CliResult<SweepArtifacts> {
    let cfg = RunConfig::load(config_path, overrides)?;
    if cfg.budgets.mode != BudgetMode::ClientSpecific {
        return Err(CliError::Config(
            "budgets.mode: budget-sweep requires \"client_specific\"".into(),
        ));
    }
    if w_list.is_empty() {
        return Err(CliError::Config("--w: at least one value required".into()));
    }
    for &w in w_list {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(CliError::Config(format!(
                "--w: must be nonnegative and finite, got {w}"
            )));
        }
    }
    for (i, &w) in w_list.iter().enumerate() {
        if w_list[..i].contains(&w) {
            return Err(CliError::Config(format!("--w: duplicate value {w}")));
        }
    }

    // Baseline: the same problem, trained unconstrained (vacuous budgets
    // cannot bind: disparities never exceed 1), measuring each client's
    // attainable disparity.
    let mut base_cfg = cfg.clone();
    base_cfg.budgets.mode = BudgetMode::Uniform;
    base_cfg.budgets.epsilon = Some(1.0);
    base_cfg.budgets.w = None;
    base_cfg.budgets.baseline_run_ref = None;
    base_cfg.optimizer.mode = ModeChoice::Fcfl;
    base_cfg.output_dir = cfg.output_dir.join("baseline");
    let baseline = execute(&base_cfg, "budget-sweep", &base_cfg.output_dir.clone())?;

    // Members re-derive their budgets from the baseline summary on disk, so
    // each member's config echo replays it exactly.
    let jobs: Vec<RunConfig> = w_list
        .iter()
        .map(|&w| {
            let mut member = cfg.clone();
            member.budgets.w = Some(w);
            member.budgets.baseline_run_ref = Some(baseline.summary_path.clone());
            member.output_dir = cfg.output_dir.join(format!("w{w}"));
            member
        })
        .collect();
    let results = run_parallel(jobs, "budget-sweep", workers)?;

    let mut lines = Vec::new();
    let mut any_mcf = false;
    let mut members = Vec::new();
    for (&w, artifacts) in w_list.iter().zip(results) {
        let outcome = &artifacts.outcome;
        any_mcf |= outcome.flags.mcf_violated;
        lines.push(report::to_json_line(&json!({
            "w": w,
            "max_hard_disparity": fold_max(&outcome.final_hard_disparities),
            "max_soft_disparity": fold_max(&outcome.final_disparities),
            "min_accuracy": min_accuracy(outcome),
            "mean_loss": outcome.final_mean_loss,
            "mcf_violated": outcome.flags.mcf_violated,
            "run_dir": artifacts.run_dir.to_string_lossy(),
        }))?);
        members.push((w, artifacts));
    }
    let table_path = cfg.output_dir.join("sweep.jsonl");
    write_lines(&table_path, &lines)?;
    Ok(SweepArtifacts {
        baseline,
        members,
        table_path,
        any_mcf_violated: any_mcf,
    })
}

pub fn cmd_compare(
    config_path: &Path,
    workers: usize,
    overrides: Overrides<'_>,
) -> CliResult<CompareArtifacts> {
    let cfg = RunConfig::load(config_path, overrides)?;
    let jobs: Vec<RunConfig> = [ModeChoice::Fcfl, ModeChoice::FedaveFairreg]
        .into_iter()
        .map(|mode| {
            let mut member = cfg.clone();
            member.optimizer.mode = mode;
            member.output_dir = cfg.output_dir.join(mode_dir(mode));
            member
        })
        .collect();
    let mut results = run_parallel(jobs, "compare", workers)?;
    let fedave = results.pop().expect("two jobs");
    let fcfl = results.pop().expect("two jobs");

    let lines = vec![
        report::to_json_line(&comparison_row("fcfl", &fcfl))?,
        report::to_json_line(&comparison_row("fedave_fairreg", &fedave))?,
    ];
    let table_path = cfg.output_dir.join("compare.jsonl");
    write_lines(&table_path, &lines)?;
    let mcf_violated = fcfl.outcome.flags.mcf_violated;
    Ok(CompareArtifacts {
        fcfl,
        fedave,
        table_path,
        mcf_violated,
    })
}

fn mode_dir(mode: ModeChoice) -> &'static str {
    match mode {
        ModeChoice::Fcfl => "fcfl",
        ModeChoice::FedaveFairreg => "fedave_fairreg",
    }
}

/// One comparison line: the per-client endpoint metrics of a finished run.
pub fn comparison_row(mode: &str, artifacts: &RunArtifacts) -> Value {
    let outcome = &artifacts.outcome;
    let accuracies: Vec<Value> = outcome
        .reports
        .iter()
        .map(|r| r.accuracy.map_or(Value::Null, |a| json!(a)))
        .collect();
    json!({
        "mode": mode,
        "client_ids": outcome.client_ids,
        "accuracies": accuracies,
        "losses": outcome.final_losses,
        "soft_disparities": outcome.final_disparities,
        "hard_disparities": outcome.final_hard_disparities,
        "mean_loss": outcome.final_mean_loss,
        "max_hard_disparity": fold_max(&outcome.final_hard_disparities),
        "min_accuracy": min_accuracy(outcome),
        "mcf_violated": outcome.flags.mcf_violated,
        "run_dir": artifacts.run_dir.to_string_lossy(),
    })
}

fn fold_max(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_accuracy(outcome: &fcfl_core::optimizer::RunOutcome<f64>) -> Value {
    outcome
        .reports
        .iter()
        .filter_map(|r| r.accuracy)
        .fold(None, |acc: Option<f64>, a| {
            Some(acc.map_or(a, |m| m.min(a)))
        })
        .map_or(Value::Null, |m| json!(m))
}

fn write_lines(path: &Path, lines: &[String]) -> CliResult<()> {
    let mut text = lines.join("\n");
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

/// Executes the jobs with up to `workers` threads, preserving input order in
/// the results. Each job owns its output directory, so parallel execution
/// cannot interleave artifacts.
fn run_parallel(
    jobs: Vec<RunConfig>,
    command: &str,
    workers: usize,
) -> CliResult<Vec<RunArtifacts>> {
    let workers = workers.max(1).min(jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<CliResult<RunArtifacts>>> = Vec::new();
    slots.resize_with(jobs.len(), || None);
    let slots = Mutex::new(slots);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let cfg = &jobs[i];
                let result = execute(cfg, command, &cfg.output_dir.clone());
                slots.lock().expect("worker panicked").as_mut_slice()[i] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|slot| slot.expect("job skipped"))
        .collect()
}
