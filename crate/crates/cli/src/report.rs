//! Artifact emission: a line-delimited trajectory (one JSON object per
//! recorded iteration) and a single-object JSON summary. All reals are
//! written with 17 significant digits so replays can be compared byte for
//! byte and parsed values round-trip to the exact bit pattern.

use std::io::{self, Write};
use std::path::Path;

use fcfl_core::direction::DirectionStatus;
use fcfl_core::optimizer::{Branch, IterationRecord, RunOutcome, Stage};
use serde_json::{json, Map, Value};

use crate::config::{CliError, CliResult};

/// JSON formatter that prints every float as `{:.16e}` (one leading digit +
/// 16 fractional digits = 17 significant), enough to reconstruct any f64
/// exactly. Non-finite values have no JSON representation and become null;
/// the optimizer rejects them long before emission.
struct SigDigits17;

impl serde_json::ser::Formatter for SigDigits17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes a JSON value on one line with 17-significant-digit reals.
pub fn to_json_line(value: &Value) -> CliResult<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits17);
    serde::Serialize::serialize(value, &mut ser)
        .map_err(|e| CliError::Runtime(format!("serializing record: {e}")))?;
    String::from_utf8(buf).map_err(|e| CliError::Runtime(format!("serializing record: {e}")))
}

pub fn stage_name(stage: Stage) -> &'static str {
    match stage {
        Stage::MinMax => "minmax",
        Stage::Pareto => "pareto",
        Stage::Baseline => "baseline",
        Stage::Done => "done",
    }
}

pub fn branch_name(branch: Branch) -> &'static str {
    match branch {
        Branch::Feasible => "feasible",
        Branch::Infeasible => "infeasible",
        Branch::Refine => "refine",
        Branch::Baseline => "baseline",
        Branch::Final => "final",
    }
}

fn status_value(status: &Option<DirectionStatus>) -> Value {
    match status {
        None => Value::Null,
        Some(DirectionStatus::Optimal) => json!("optimal"),
        Some(DirectionStatus::Relaxed { dropped }) => json!({ "relaxed": dropped }),
        Some(DirectionStatus::Degenerate) => json!("degenerate"),
    }
}

/// One trajectory line. Arrays are in the run's fixed client order (sorted
/// ids, echoed once in the summary).
pub fn trajectory_record(rec: &IterationRecord<f64>) -> Value {
    json!({
        "iter": rec.iter,
        "stage": stage_name(rec.stage),
        "branch": branch_name(rec.branch),
        "status": status_value(&rec.status),
        "losses": rec.losses,
        "soft_disparities": rec.disparities,
        "hard_disparities": rec.hard_disparities,
        "slacks": rec.slacks,
        "smoothed_loss": rec.smoothed_loss,
        "smoothed_slack": rec.smoothed_slack,
        "dir_sq_norm": rec.dir_sq_norm,
        "delta_l": rec.delta_l,
        "delta_g": rec.delta_g,
        "eta_used": rec.eta_used,
        "backtracks": rec.backtracks,
    })
}

/// Writes the whole trajectory to `path`, one record per line.
pub fn write_trajectory(path: &Path, history: &[IterationRecord<f64>]) -> CliResult<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", path.display())))?;
    let mut out = io::BufWriter::new(file);
    for rec in history {
        let line = to_json_line(&trajectory_record(rec))?;
        writeln!(out, "{line}")
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
    }
    out.flush()
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
    Ok(())
}

/// The single summary object for one run.
pub fn summary_record(
    command: &str,
    outcome: &RunOutcome<f64>,
    trajectory_path: &Path,
    config_echo: &str,
    seed: u64,
) -> Value {
    let clients: Vec<Value> = outcome
        .reports
        .iter()
        .map(|r| {
            json!({
                "client_id": r.client_id,
                "sample_count": r.sample_count,
                "accuracy": r.accuracy,
                "loss": r.loss,
                "soft_disparity": r.soft_disparity,
                "hard_disparity": r.hard_disparity,
                "slack": r.slack,
                "budget": r.budget,
            })
        })
        .collect();
    json!({
        "command": command,
        "code_version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "client_ids": outcome.client_ids,
        "clients": clients,
        "flags": {
            "mcf_violated": outcome.flags.mcf_violated,
            "budget_exhausted": outcome.flags.budget_exhausted,
            "pareto_stationary": outcome.flags.pareto_stationary,
        },
        "stage_transition_iter": outcome.stage_transition_iter,
        "stage1_iters": outcome.stage1_iters,
        "stage2_iters": outcome.stage2_iters,
        "final_mean_loss": outcome.final_mean_loss,
        "trajectory_path": trajectory_path.to_string_lossy(),
        "config_echo": config_echo,
    })
}

pub fn write_summary(path: &Path, summary: &Value) -> CliResult<()> {
    let line = to_json_line(summary)?;
    std::fs::write(path, format!("{line}\n"))
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

/// Reads a summary back; used to derive client-specific budgets from a
/// baseline run and by the replay/round-trip tests.
pub fn read_summary(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("baseline summary {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("baseline summary {}: {e}", path.display())))
}

/// Extracts `client_id → soft_disparity` from a summary, in its client order.
pub fn summary_soft_disparities(summary: &Value) -> CliResult<Vec<(String, f64)>> {
    let clients = summary
        .get("clients")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::Config("baseline summary: missing clients array".into()))?;
    clients
        .iter()
        .map(|c| {
            let id = c
                .get("client_id")
                .and_then(Value::as_str)
                .ok_or_else(|| CliError::Config("baseline summary: client_id missing".into()))?;
            let dp = c
                .get("soft_disparity")
                .and_then(Value::as_f64)
                .ok_or_else(|| {
                    CliError::Config(format!(
                        "baseline summary: soft_disparity missing for client {id}"
                    ))
                })?;
            Ok((id.to_string(), dp))
        })
        .collect()
}

/// Convenience for building one-line records with fields in a fixed order
/// irrelevant (serde_json maps are sorted by key, so emission is stable).
pub fn object(fields: Vec<(&str, Value)>) -> Value {
    let mut map = Map::new();
    for (k, v) in fields {
        map.insert(k.to_string(), v);
    }
    Value::Object(map)
}
