//! Contract tests for the command layer: config validation names fields,
//! artifacts parse and replay, exit codes hold through the binary.

mod util;

use std::path::Path;
use std::process::Command;

use fcfl_cli::config::{CliError, Overrides};
use fcfl_cli::{cmd_budget_sweep, cmd_compare, cmd_run};
use serde_json::Value;
use tempfile::TempDir;

const NO_OVERRIDES: Overrides<'_> = Overrides {
    seed: None,
    out: None,
};

fn expect_config_error<T>(result: Result<T, CliError>, needle: &str) {
    match result {
        Err(CliError::Config(msg)) => assert!(
            msg.contains(needle),
            "config error does not name {needle:?}: {msg}"
        ),
        Err(other) => panic!("expected config error naming {needle:?}, got: {other}"),
        Ok(_) => panic!("expected config error naming {needle:?}, got success"),
    }
}

fn read_jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .expect("reading jsonl")
        .lines()
        .map(|l| serde_json::from_str(l).expect("parsing jsonl line"))
        .collect()
}

#[test]
fn synthetic_run_meets_the_budget_and_replays_from_its_echo() {
    let dir = TempDir::new().unwrap();
    let config = util::write_config(
        dir.path(),
        "run.toml",
        &util::synthetic_config(
            &dir.path().join("out"),
            "constrained",
            "near_toward",
            0.0,
            "mode = \"uniform\"\nepsilon = 0.2",
            "eta = 0.01\nmax_iters_stage1 = 4000\nmax_iters_stage2 = 100\nseed = 7",
        ),
    );
    let artifacts = cmd_run(&config, NO_OVERRIDES).unwrap();
    let client = &artifacts.summary["clients"][0];
    assert!(client["soft_disparity"].as_f64().unwrap() <= 0.201);
    assert!(!artifacts.outcome.flags.mcf_violated);

    // The summary's config echo must reproduce the run byte for byte.
    let echo = artifacts.summary["config_echo"].as_str().unwrap();
    let replay_cfg = util::write_config(dir.path(), "replay.toml", echo);
    let replay_out = dir.path().join("replay_out");
    let replay = cmd_run(
        &replay_cfg,
        Overrides {
            seed: None,
            out: Some(&replay_out),
        },
    )
    .unwrap();
    let original = std::fs::read(&artifacts.trajectory_path).unwrap();
    let replayed = std::fs::read(&replay.trajectory_path).unwrap();
    assert_eq!(original, replayed, "replay diverged from the original run");
}

#[test]
fn trajectory_records_carry_the_documented_fields() {
    let dir = TempDir::new().unwrap();
    let config = util::write_config(
        dir.path(),
        "run.toml",
        &util::synthetic_config(
            &dir.path().join("out"),
            "constrained",
            "near_away",
            0.0,
            "mode = \"uniform\"\nepsilon = 0.4",
            "eta = 0.01\nmax_iters_stage1 = 500\nmax_iters_stage2 = 50\nseed = 1",
        ),
    );
    let artifacts = cmd_run(&config, NO_OVERRIDES).unwrap();
    let records = read_jsonl(&artifacts.trajectory_path);
    assert!(!records.is_empty());
    for rec in &records {
        for field in [
            "iter",
            "stage",
            "branch",
            "losses",
            "soft_disparities",
            "hard_disparities",
            "dir_sq_norm",
            "delta_l",
            "delta_g",
        ] {
            assert!(rec.get(field).is_some(), "record missing {field}: {rec}");
        }
    }
    let stages: Vec<&str> = records
        .iter()
        .map(|r| r["stage"].as_str().unwrap())
        .collect();
    assert_eq!(*stages.last().unwrap(), "done");
    assert!(stages.contains(&"minmax"));
}

#[test]
fn missing_dataset_names_the_path_field() {
    let dir = TempDir::new().unwrap();
    let config = util::write_config(
        dir.path(),
        "bad.toml",
        &util::tabular_config(
            &dir.path().join("nope.csv"),
            &dir.path().join("out"),
            3,
            "mode = \"uniform\"\nepsilon = 0.1",
            "seed = 0",
        ),
    );
    expect_config_error(cmd_run(&config, NO_OVERRIDES), "tabular.path");
}

#[test]
fn unknown_and_invalid_fields_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let mut text = util::synthetic_config(
        &dir.path().join("out"),
        "constrained",
        "origin",
        0.0,
        "mode = \"uniform\"\nepsilon = 0.2",
        "seed = 0",
    );
    text.push_str("\n[optimizer.extra]\nknob = 1\n");
    let config = util::write_config(dir.path(), "unknown.toml", &text);
    match cmd_run(&config, NO_OVERRIDES) {
        Err(CliError::Config(_)) => {}
        other => panic!("unknown field accepted: {:?}", other.map(|_| ())),
    }

    let bad_eta = util::write_config(
        dir.path(),
        "bad_eta.toml",
        &util::synthetic_config(
            &dir.path().join("out"),
            "constrained",
            "origin",
            0.0,
            "mode = \"uniform\"\nepsilon = 0.2",
            "eta = -1.0",
        ),
    );
    expect_config_error(cmd_run(&bad_eta, NO_OVERRIDES), "optimizer.eta");

    let no_ref = util::write_config(
        dir.path(),
        "no_ref.toml",
        &util::synthetic_config(
            &dir.path().join("out"),
            "constrained",
            "origin",
            0.0,
            "mode = \"client_specific\"\nw = 0.5",
            "seed = 0",
        ),
    );
    expect_config_error(cmd_run(&no_ref, NO_OVERRIDES), "budgets.baseline_run_ref");
}

#[test]
fn budget_sweep_scales_baseline_disparities_and_trends_down() {
    let dir = TempDir::new().unwrap();
    let csv = util::write_planted_csv(dir.path(), &util::planted_spec(&[("a", 0.15), ("b", 0.3)], 800), 11);
    let config = util::write_config(
        dir.path(),
        "sweep.toml",
        &util::tabular_config(
            &csv,
            &dir.path().join("out"),
            5,
            "mode = \"client_specific\"\nw = 1.0",
            "eta = 0.5\nmax_iters_stage1 = 600\nmax_iters_stage2 = 100\nseed = 3",
        ),
    );
    let sweep = cmd_budget_sweep(&config, &[1.0, 0.5], 2, NO_OVERRIDES).unwrap();

    // w = 1.0 budgets equal the baseline's measured soft disparities, so the
    // baseline point itself satisfies them and the run must end feasible.
    let baseline_clients = sweep.baseline.summary["clients"].as_array().unwrap();
    let (w1, w1_artifacts) = &sweep.members[0];
    assert_eq!(*w1, 1.0);
    for (base, report) in baseline_clients.iter().zip(&w1_artifacts.outcome.reports) {
        let base_dp = base["soft_disparity"].as_f64().unwrap();
        assert!(
            (report.budget - base_dp).abs() <= 1e-15,
            "w=1 budget {} != baseline disparity {base_dp}",
            report.budget
        );
    }
    let max_slack_w1 = w1_artifacts
        .outcome
        .final_slacks
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(max_slack_w1 <= 1e-4, "w=1 run violates its own baseline budgets: {max_slack_w1}");

    // Halving the budgets must not increase the worst hard disparity.
    let table = read_jsonl(&sweep.table_path);
    assert_eq!(table.len(), 2);
    let hard_w1 = table[0]["max_hard_disparity"].as_f64().unwrap();
    let hard_w05 = table[1]["max_hard_disparity"].as_f64().unwrap();
    assert!(
        hard_w05 <= hard_w1 + 0.01,
        "sweep trend broken: w=1 {hard_w1}, w=0.5 {hard_w05}"
    );
}

#[test]
fn empty_or_duplicate_w_lists_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let csv = util::write_planted_csv(dir.path(), &util::planted_spec(&[("a", 0.2)], 60), 5);
    let config = util::write_config(
        dir.path(),
        "sweep.toml",
        &util::tabular_config(
            &csv,
            &dir.path().join("out"),
            5,
            "mode = \"client_specific\"\nw = 1.0",
            "seed = 0",
        ),
    );
    expect_config_error(cmd_budget_sweep(&config, &[], 1, NO_OVERRIDES), "--w");
    expect_config_error(
        cmd_budget_sweep(&config, &[0.5, 0.5], 1, NO_OVERRIDES),
        "--w",
    );
}

#[test]
fn compare_emits_one_parseable_row_per_mode() {
    let dir = TempDir::new().unwrap();
    let config = util::write_config(
        dir.path(),
        "compare.toml",
        &util::synthetic_config(
            &dir.path().join("out"),
            "minmax_pair",
            "origin",
            0.3,
            "mode = \"uniform\"\nepsilon = 1.0",
            "eta = 0.05\nmax_iters_stage1 = 2000\nmax_iters_stage2 = 50\nseed = 9",
        ),
    );
    let cmp = cmd_compare(&config, 2, NO_OVERRIDES).unwrap();
    let rows = read_jsonl(&cmp.table_path);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["mode"], "fcfl");
    assert_eq!(rows[1]["mode"], "fedave_fairreg");

    // The constrained min-max run balances the two losses; the equal-weight
    // scalarization slides to one anchor.
    let gap = |row: &Value| {
        let l = row["losses"].as_array().unwrap();
        (l[0].as_f64().unwrap() - l[1].as_f64().unwrap()).abs()
    };
    assert!(gap(&rows[0]) <= 0.05, "fcfl unbalanced: {}", gap(&rows[0]));
    assert!(gap(&rows[1]) >= 0.25, "baseline balanced: {}", gap(&rows[1]));

    // Same mode, same seed: identical row.
    let again = cmd_compare(&config, 1, NO_OVERRIDES).unwrap();
    assert_eq!(
        fcfl_cli::commands::comparison_row("fcfl", &cmp.fcfl),
        fcfl_cli::commands::comparison_row("fcfl", &again.fcfl),
    );
}

#[test]
fn binary_exit_codes_match_the_contract() {
    let bin = env!("CARGO_BIN_EXE_fcfl");
    let dir = TempDir::new().unwrap();

    // Config error → 3.
    let status = Command::new(bin)
        .args(["run", &dir.path().join("absent.toml").to_string_lossy()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));

    // Success → 0.
    let ok_config = util::write_config(
        dir.path(),
        "ok.toml",
        &util::synthetic_config(
            &dir.path().join("ok_out"),
            "constrained",
            "near_away",
            0.0,
            "mode = \"uniform\"\nepsilon = 0.5",
            "eta = 0.01\nmax_iters_stage1 = 400\nmax_iters_stage2 = 20\nseed = 2",
        ),
    );
    let status = Command::new(bin)
        .args(["run", &ok_config.to_string_lossy()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    // Budgets unattainable within the iteration budget → 2.
    let mcf_config = util::write_config(
        dir.path(),
        "mcf.toml",
        &util::synthetic_config(
            &dir.path().join("mcf_out"),
            "constrained",
            "near_toward",
            0.0,
            "mode = \"uniform\"\nepsilon = 0.2",
            "eta = 0.01\nmax_iters_stage1 = 3\nmax_iters_stage2 = 2\nseed = 2",
        ),
    );
    let status = Command::new(bin)
        .args(["run", &mcf_config.to_string_lossy()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Usage errors must not collide with exit code 2.
    let status = Command::new(bin).args(["run"]).status().unwrap();
    assert_eq!(status.code(), Some(3));
}
