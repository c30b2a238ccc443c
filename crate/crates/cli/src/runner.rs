//! Builds the training problem a config describes and executes one run,
//! leaving a trajectory and a summary in the output directory.

use std::path::{Path, PathBuf};

use fcfl_core::data::{encode, load_table};
use fcfl_core::fedsim::{split_by_key, split_by_predicate, FederatedProblem};
use fcfl_core::metrics::FairnessBudget;
use fcfl_core::optimizer::{run, RunOutcome};
use fcfl_core::problem::ObjectiveProvider;
use fcfl_core::synthetic::{SyntheticInit, SyntheticMode, SyntheticProblem};

use crate::config::{
    BudgetMode, CliError, CliResult, ExperimentKind, InitChoice, RunConfig, SplitKind,
    SyntheticModeChoice,
};
use crate::report;

pub enum BuiltProblem {
    Synthetic(SyntheticProblem<f64>),
    Tabular(FederatedProblem<f64>),
}

impl BuiltProblem {
    pub fn provider(&self) -> &dyn ObjectiveProvider<f64> {
        match self {
            BuiltProblem::Synthetic(p) => p,
            BuiltProblem::Tabular(p) => p,
        }
    }
}

/// Per-client budgets resolved outside the config file (the sweep computes
/// them from its own baseline run instead of a `baseline_run_ref`).
pub enum BudgetSource<'a> {
    FromConfig,
    Explicit(&'a [(String, f64)]),
}

/// Reads the baseline summary referenced by the config and scales its
/// per-client soft disparities by `w`.
fn budgets_from_reference(cfg: &RunConfig) -> CliResult<Vec<(String, f64)>> {
    let w = cfg.budgets.w.expect("validated");
    let path = cfg.budgets.baseline_run_ref.as_ref().ok_or_else(|| {
        CliError::Config(
            "budgets.baseline_run_ref: required when budgets.mode = \"client_specific\"".into(),
        )
    })?;
    let summary = report::read_summary(path)?;
    let base = report::summary_soft_disparities(&summary)?;
    Ok(base.into_iter().map(|(id, dp)| (id, w * dp)).collect())
}

/// Looks up each client's budget by id, so shard order and baseline order
/// need not agree.
fn assign_budgets(
    ids: &[String],
    derived: &[(String, f64)],
) -> CliResult<Vec<FairnessBudget<f64>>> {
    ids.iter()
        .map(|id| {
            let eps = derived
                .iter()
                .find(|(b, _)| b == id)
                .map(|(_, e)| *e)
                .ok_or_else(|| {
                    CliError::Config(format!(
                        "budgets.baseline_run_ref: baseline has no client {id:?}"
                    ))
                })?;
            FairnessBudget::new(eps).map_err(|e| CliError::Config(format!("budgets: {e}")))
        })
        .collect()
}

pub fn build_problem(cfg: &RunConfig, budgets: BudgetSource<'_>) -> CliResult<BuiltProblem> {
    match cfg.experiment {
        ExperimentKind::Synthetic => {
            let synth = cfg.synthetic.as_ref().expect("validated");
            let epsilon = match (synth.mode, cfg.budgets.mode) {
                // The pair's budgets are vacuous by construction.
                (SyntheticModeChoice::MinmaxPair, _) => 1.0,
                (SyntheticModeChoice::Constrained, BudgetMode::Uniform) => {
                    cfg.budgets.epsilon.expect("validated")
                }
                (SyntheticModeChoice::Constrained, BudgetMode::ClientSpecific) => {
                    let derived = match budgets {
                        BudgetSource::Explicit(d) => d.to_vec(),
                        BudgetSource::FromConfig => budgets_from_reference(cfg)?,
                    };
                    derived
                        .iter()
                        .find(|(id, _)| id == "objective")
                        .map(|(_, e)| *e)
                        .ok_or_else(|| {
                            CliError::Config(
                                "budgets.baseline_run_ref: baseline has no client \"objective\""
                                    .into(),
                            )
                        })?
                }
            };
            let mode = match synth.mode {
                SyntheticModeChoice::Constrained => SyntheticMode::Constrained { epsilon },
                SyntheticModeChoice::MinmaxPair => SyntheticMode::MinMaxPair,
            };
            let init = match synth.init {
                InitChoice::NearToward => SyntheticInit::NearTowardOptimum {
                    noise: synth.init_noise,
                },
                InitChoice::NearAway => SyntheticInit::NearAwayOptimum {
                    noise: synth.init_noise,
                },
                InitChoice::Origin => SyntheticInit::NearOrigin {
                    noise: synth.init_noise,
                },
            };
            Ok(BuiltProblem::Synthetic(SyntheticProblem::new(
                synth.n,
                mode,
                init,
                cfg.optimizer.seed,
            )))
        }
        ExperimentKind::Tabular => {
            let tab = cfg.tabular.as_ref().expect("validated");
            let schema = tab.schema.to_core();
            let (table, load_report) =
                load_table(&tab.path, tab.delimiter_byte()?, &schema).map_err(|e| {
                    CliError::Config(format!("tabular.path {}: {e}", tab.path.display()))
                })?;
            log::info!(
                "loaded {}: {} rows ({} dropped)",
                tab.path.display(),
                table.n_rows(),
                load_report.rows_dropped
            );
            let (encoded, _stats) = encode::<f64>(&table, &schema, None)
                .map_err(|e| CliError::Config(format!("tabular.schema: {e}")))?;
            let shards = match tab.split.kind {
                SplitKind::Predicate => split_by_predicate(
                    &table,
                    &encoded,
                    tab.split_column(),
                    tab.split.value.as_deref().expect("validated"),
                    tab.split.allow_empty,
                ),
                SplitKind::Key => split_by_key(&table, &encoded, tab.split_column()),
            }
            .map_err(|e| CliError::Config(format!("tabular.split: {e}")))?;
            let ids: Vec<String> = shards.iter().map(|s| s.client_id().to_string()).collect();
            let budget_vec = match (cfg.budgets.mode, budgets) {
                (BudgetMode::Uniform, _) => {
                    let eps = cfg.budgets.epsilon.expect("validated");
                    vec![
                        FairnessBudget::new(eps)
                            .map_err(|e| CliError::Config(format!("budgets.epsilon: {e}")))?;
                        shards.len()
                    ]
                }
                (BudgetMode::ClientSpecific, BudgetSource::Explicit(derived)) => {
                    assign_budgets(&ids, derived)?
                }
                (BudgetMode::ClientSpecific, BudgetSource::FromConfig) => {
                    assign_budgets(&ids, &budgets_from_reference(cfg)?)?
                }
            };
            let problem = FederatedProblem::new(
                shards,
                budget_vec,
                cfg.metric.to_core(),
                tab.degenerate_groups.to_core(),
            )?;
            Ok(BuiltProblem::Tabular(problem))
        }
    }
}

/// Artifacts one run leaves behind.
pub struct RunArtifacts {
    pub outcome: RunOutcome<f64>,
    pub run_dir: PathBuf,
    pub trajectory_path: PathBuf,
    pub summary_path: PathBuf,
    pub summary: serde_json::Value,
}

/// Executes the run a config describes and writes its artifacts under
/// `run_dir` (created if needed).
pub fn execute(cfg: &RunConfig, command: &str, run_dir: &Path) -> CliResult<RunArtifacts> {
    let problem = build_problem(cfg, BudgetSource::FromConfig)?;
    execute_built(cfg, &problem, command, run_dir)
}

/// As [`execute`] with an already-built problem (the sweep builds variants
/// of one dataset without re-reading it).
pub fn execute_built(
    cfg: &RunConfig,
    problem: &BuiltProblem,
    command: &str,
    run_dir: &Path,
) -> CliResult<RunArtifacts> {
    std::fs::create_dir_all(run_dir)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", run_dir.display())))?;
    let core_cfg = cfg.optimizer.to_core();
    core_cfg
        .validate()
        .map_err(crate::config::optimizer_field_error)?;
    let outcome = run(problem.provider(), &core_cfg)?;

    let trajectory_path = run_dir.join("trajectory.jsonl");
    report::write_trajectory(&trajectory_path, &outcome.history)?;
    let summary = report::summary_record(
        command,
        &outcome,
        &trajectory_path,
        &cfg.echo()?,
        cfg.optimizer.seed,
    );
    let summary_path = run_dir.join("summary.json");
    report::write_summary(&summary_path, &summary)?;
    Ok(RunArtifacts {
        outcome,
        run_dir: run_dir.to_path_buf(),
        trajectory_path,
        summary_path,
        summary,
    })
}
