//! Shared fixtures for the CLI integration tests: planted datasets written
//! to CSV and config files assembled around them.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fcfl_core::data::{generate_planted, PlantedClient, PlantedSpec};

pub fn planted_spec(strengths: &[(&str, f64)], samples: usize) -> PlantedSpec {
    PlantedSpec {
        clients: strengths
            .iter()
            .map(|(id, s)| PlantedClient {
                client_id: (*id).to_string(),
                samples,
                base_rate: 0.4,
                disparity_strength: *s,
            })
            .collect(),
        ..PlantedSpec::default()
    }
}

/// Materializes a planted federation as one CSV with a client-key column,
/// so runs go through the full ingestion path. Floats use Rust's shortest
/// round-trip formatting, so re-parsing reproduces the exact values.
pub fn write_planted_csv(dir: &Path, spec: &PlantedSpec, seed: u64) -> PathBuf {
    let shards = generate_planted::<f64>(spec, seed).expect("planted generation");
    let dim = shards[0].feature_dim();
    let mut text = String::from("client,a,y");
    for j in 0..dim {
        write!(text, ",f{j}").unwrap();
    }
    text.push('\n');
    for shard in &shards {
        for i in 0..shard.n_samples() {
            write!(
                text,
                "{},{},{}",
                shard.client_id(),
                u8::from(shard.sensitive()[i]),
                u8::from(shard.labels()[i])
            )
            .unwrap();
            for v in shard.row(i) {
                write!(text, ",{v}").unwrap();
            }
            text.push('\n');
        }
    }
    let path = dir.join("planted.csv");
    std::fs::write(&path, text).expect("writing planted csv");
    path
}

/// Config for a tabular run over a planted CSV, split by the client column.
pub fn tabular_config(
    csv_path: &Path,
    out_dir: &Path,
    feature_dim: usize,
    budgets: &str,
    optimizer: &str,
) -> String {
    let features: Vec<String> = (0..feature_dim).map(|j| format!("\"f{j}\"")).collect();
    format!(
        r#"config_version = 1
experiment = "tabular"
metric = "dp"
output_dir = "{out}"

[tabular]
path = "{csv}"
[tabular.schema]
label_column = "y"
positive_label_value = "1"
sensitive_column = "a"
positive_sensitive_value = "1"
numeric_columns = [{features}]
client_key_column = "client"
[tabular.split]
kind = "key"

[budgets]
{budgets}

[optimizer]
{optimizer}
"#,
        out = out_dir.display(),
        csv = csv_path.display(),
        features = features.join(", "),
    )
}

pub fn synthetic_config(
    out_dir: &Path,
    mode: &str,
    init: &str,
    init_noise: f64,
    budgets: &str,
    optimizer: &str,
) -> String {
    format!(
        r#"config_version = 1
experiment = "synthetic"
metric = "dp"
output_dir = "{out}"

[synthetic]
mode = "{mode}"
n = 20
init = "{init}"
init_noise = {init_noise}

[budgets]
{budgets}

[optimizer]
{optimizer}
"#,
        out = out_dir.display(),
    )
}

pub fn write_config(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).expect("writing config");
    path
}
