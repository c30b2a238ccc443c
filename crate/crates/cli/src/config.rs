//! Run configuration: a versioned TOML file describing the experiment, the
//! data, the fairness budgets, and every optimizer knob. Loading resolves
//! command-line overrides and validates eagerly so that a bad config never
//! reaches the training loop; every error message names the offending field.

use std::fmt;
use std::path::{Path, PathBuf};

use fcfl_core::metrics::{DegenerateGroupPolicy, MetricKind};
use fcfl_core::optimizer::{LossGuardMode, OptimizerConfig, TrainingMode};
use fcfl_core::smf::SmoothingState;
use serde::{Deserialize, Serialize};

/// Schema revision this binary reads and writes.
pub const CONFIG_VERSION: u32 = 1;

/// Errors carry the exit-code decision: bad configuration is distinguishable
/// from failures of an otherwise valid run.
#[derive(Debug)]
pub enum CliError {
    /// Invalid or inconsistent configuration (exit code 3). The message
    /// names the field or flag at fault.
    Config(String),
    /// A valid run failed while executing (exit code 1).
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Runtime(msg) => write!(f, "run failed: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fcfl_core::Error> for CliError {
    fn from(e: fcfl_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Anchors a core optimizer validation message (which starts with the bare
/// field name) to its config section.
pub(crate) fn optimizer_field_error(e: fcfl_core::Error) -> CliError {
    let msg = match e {
        fcfl_core::Error::InvalidProblem(inner) => inner,
        other => other.to_string(),
    };
    CliError::Config(format!("optimizer.{msg}"))
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Synthetic,
    Tabular,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricChoice {
    Dp,
    Eo,
}

impl MetricChoice {
    pub fn to_core(self) -> MetricKind {
        match self {
            MetricChoice::Dp => MetricKind::Dp,
            MetricChoice::Eo => MetricKind::Eo,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticModeChoice {
    /// Single objective with the second benchmark loss as a budgeted
    /// constraint.
    Constrained,
    /// Two clients holding the two benchmark losses, vacuous budgets.
    MinmaxPair,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitChoice {
    /// Start at (noise around) the minimizer of the first loss — infeasible
    /// for small budgets.
    NearToward,
    /// Start at (noise around) the minimizer of the second loss — feasible.
    NearAway,
    Origin,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub mode: SyntheticModeChoice,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_init")]
    pub init: InitChoice,
    /// Half-width of the uniform perturbation around the chosen anchor.
    #[serde(default)]
    pub init_noise: f64,
}

fn default_n() -> usize {
    20
}

fn default_init() -> InitChoice {
    InitChoice::NearToward
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    /// Two clients: rows matching `column == value` and the rest.
    Predicate,
    /// One client per distinct value of the key column.
    Key,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub kind: SplitKind,
    /// Splitting column; for `key` splits this defaults to the schema's
    /// `client_key_column`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    /// Matched cell value; required for `predicate` splits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    /// Tolerate a predicate side with no rows (that side is dropped).
    #[serde(default)]
    pub allow_empty: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateGroupChoice {
    /// A client whose data cannot express the disparity (single group,
    /// or single labeled group for equal opportunity) aborts the run.
    Error,
    /// Such a client contributes zero disparity, with a warning.
    ZeroWithWarning,
}

impl DegenerateGroupChoice {
    pub fn to_core(self) -> DegenerateGroupPolicy {
        match self {
            DegenerateGroupChoice::Error => DegenerateGroupPolicy::Error,
            DegenerateGroupChoice::ZeroWithWarning => DegenerateGroupPolicy::ZeroWithWarning,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaSection {
    pub label_column: String,
    pub positive_label_value: String,
    pub sensitive_column: String,
    pub positive_sensitive_value: String,
    #[serde(default)]
    pub numeric_columns: Vec<String>,
    #[serde(default)]
    pub categorical_columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_key_column: Option<String>,
    #[serde(default)]
    pub include_sensitive_feature: bool,
}

impl SchemaSection {
    pub fn to_core(&self) -> fcfl_core::data::TableSchema {
        fcfl_core::data::TableSchema {
            label_column: self.label_column.clone(),
            positive_label_value: self.positive_label_value.clone(),
            sensitive_column: self.sensitive_column.clone(),
            positive_sensitive_value: self.positive_sensitive_value.clone(),
            numeric_columns: self.numeric_columns.clone(),
            categorical_columns: self.categorical_columns.clone(),
            client_key_column: self.client_key_column.clone(),
            include_sensitive_feature: self.include_sensitive_feature,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularSection {
    pub path: PathBuf,
    /// Single-character field delimiter.
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    pub schema: SchemaSection,
    pub split: SplitSection,
    #[serde(default = "default_degenerate")]
    pub degenerate_groups: DegenerateGroupChoice,
}

fn default_delimiter() -> String {
    ",".into()
}

fn default_degenerate() -> DegenerateGroupChoice {
    DegenerateGroupChoice::Error
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    /// One shared budget `epsilon` for every client.
    Uniform,
    /// Per-client budgets `w · (baseline soft disparity)`, measured from an
    /// unconstrained min-max run.
    ClientSpecific,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    pub mode: BudgetMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<f64>,
    /// Summary file of the baseline run the per-client budgets derive from.
    /// `run` requires it in client-specific mode; `budget-sweep` performs
    /// its own baseline run and ignores it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_run_ref: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeChoice {
    Fcfl,
    FedaveFairreg,
}

impl ModeChoice {
    pub fn to_core(self) -> TrainingMode {
        match self {
            ModeChoice::Fcfl => TrainingMode::Fcfl,
            ModeChoice::FedaveFairreg => TrainingMode::FedAveFairReg,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossGuardChoice {
    PerClient,
    SmfOnly,
}

impl LossGuardChoice {
    pub fn to_core(self) -> LossGuardMode {
        match self {
            LossGuardChoice::PerClient => LossGuardMode::PerClient,
            LossGuardChoice::SmfOnly => LossGuardMode::SmfOnly,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingSection {
    #[serde(default = "default_delta")]
    pub delta_l: f64,
    #[serde(default = "default_delta")]
    pub delta_g: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_eps_d")]
    pub eps_d: f64,
}

fn default_delta() -> f64 {
    0.1
}

fn default_beta() -> f64 {
    0.5
}

fn default_eps_d() -> f64 {
    1e-8
}

impl Default for SmoothingSection {
    fn default() -> Self {
        Self {
            delta_l: default_delta(),
            delta_g: default_delta(),
            beta: default_beta(),
            eps_d: default_eps_d(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(default = "default_mode")]
    pub mode: ModeChoice,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_iters1")]
    pub max_iters_stage1: usize,
    #[serde(default = "default_iters2")]
    pub max_iters_stage2: usize,
    #[serde(default)]
    pub smoothing: SmoothingSection,
    #[serde(default = "default_tol")]
    pub convergence_tol: f64,
    #[serde(default = "default_margin")]
    pub boundary_margin: f64,
    #[serde(default = "default_guard")]
    pub loss_nonincrease_mode: LossGuardChoice,
    #[serde(default = "default_stage2_slack")]
    pub stage2_loss_slack: f64,
    #[serde(default = "default_backtracks")]
    pub max_backtracks: usize,
    #[serde(default)]
    pub fairreg_weight: f64,
    #[serde(default)]
    pub init_base_rate_bias: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_mode() -> ModeChoice {
    ModeChoice::Fcfl
}

fn default_eta() -> f64 {
    0.05
}

fn default_iters1() -> usize {
    2000
}

fn default_iters2() -> usize {
    500
}

fn default_tol() -> f64 {
    1e-4
}

fn default_margin() -> f64 {
    1e-4
}

fn default_guard() -> LossGuardChoice {
    LossGuardChoice::PerClient
}

fn default_stage2_slack() -> f64 {
    1e-6
}

fn default_backtracks() -> usize {
    20
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            eta: default_eta(),
            max_iters_stage1: default_iters1(),
            max_iters_stage2: default_iters2(),
            smoothing: SmoothingSection::default(),
            convergence_tol: default_tol(),
            boundary_margin: default_margin(),
            loss_nonincrease_mode: default_guard(),
            stage2_loss_slack: default_stage2_slack(),
            max_backtracks: default_backtracks(),
            fairreg_weight: 0.0,
            init_base_rate_bias: false,
            seed: 0,
        }
    }
}

impl OptimizerSection {
    pub fn to_core(&self) -> OptimizerConfig<f64> {
        OptimizerConfig {
            mode: self.mode.to_core(),
            eta: self.eta,
            max_iters_stage1: self.max_iters_stage1,
            max_iters_stage2: self.max_iters_stage2,
            smoothing: SmoothingState {
                delta_l: self.smoothing.delta_l,
                delta_g: self.smoothing.delta_g,
                beta: self.smoothing.beta,
                eps_d: self.smoothing.eps_d,
            },
            convergence_tol: self.convergence_tol,
            boundary_margin: self.boundary_margin,
            loss_nonincrease_mode: self.loss_nonincrease_mode.to_core(),
            stage2_loss_slack: self.stage2_loss_slack,
            max_backtracks: self.max_backtracks,
            fairreg_weight: self.fairreg_weight,
            init_base_rate_bias: self.init_base_rate_bias,
            seed: self.seed,
            record_history: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub config_version: u32,
    pub experiment: ExperimentKind,
    pub metric: MetricChoice,
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tabular: Option<TabularSection>,
    pub budgets: BudgetSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides<'a> {
    pub seed: Option<u64>,
    pub out: Option<&'a Path>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: Overrides<'_>) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("config path {}: {e}", path.display()))
        })?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(seed) = overrides.seed {
            cfg.optimizer.seed = seed;
        }
        if let Some(out) = overrides.out {
            cfg.output_dir = out.to_path_buf();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// The resolved config as TOML — embedded in every summary so a run can
    /// be replayed from its report alone.
    pub fn echo(&self) -> CliResult<String> {
        toml::to_string(self)
            .map_err(|e| CliError::Runtime(format!("serializing config echo: {e}")))
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.config_version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "config_version: expected {CONFIG_VERSION}, got {}",
                self.config_version
            )));
        }
        match self.experiment {
            ExperimentKind::Synthetic => {
                if self.tabular.is_some() {
                    return Err(CliError::Config(
                        "tabular: section present but experiment = \"synthetic\"".into(),
                    ));
                }
                let synth = self.synthetic.as_ref().ok_or_else(|| {
                    CliError::Config(
                        "synthetic: section required when experiment = \"synthetic\"".into(),
                    )
                })?;
                synth.validate()?;
            }
            ExperimentKind::Tabular => {
                if self.synthetic.is_some() {
                    return Err(CliError::Config(
                        "synthetic: section present but experiment = \"tabular\"".into(),
                    ));
                }
                let tab = self.tabular.as_ref().ok_or_else(|| {
                    CliError::Config(
                        "tabular: section required when experiment = \"tabular\"".into(),
                    )
                })?;
                tab.validate()?;
            }
        }
        self.budgets.validate()?;
        self.optimizer
            .to_core()
            .validate()
            .map_err(optimizer_field_error)?;
        Ok(())
    }
}

impl SyntheticSection {
    fn validate(&self) -> CliResult<()> {
        if self.n == 0 {
            return Err(CliError::Config("synthetic.n: must be at least 1".into()));
        }
        if !self.init_noise.is_finite() || self.init_noise < 0.0 {
            return Err(CliError::Config(format!(
                "synthetic.init_noise: must be nonnegative and finite, got {}",
                self.init_noise
            )));
        }
        Ok(())
    }
}

impl TabularSection {
    fn validate(&self) -> CliResult<()> {
        if !self.path.exists() {
            return Err(CliError::Config(format!(
                "tabular.path: {} does not exist",
                self.path.display()
            )));
        }
        self.delimiter_byte()?;
        self.schema
            .to_core()
            .validate()
            .map_err(|e| CliError::Config(format!("tabular.schema: {e}")))?;
        match self.split.kind {
            SplitKind::Predicate => {
                if self.split.column.is_none() {
                    return Err(CliError::Config(
                        "tabular.split.column: required for predicate splits".into(),
                    ));
                }
                if self.split.value.is_none() {
                    return Err(CliError::Config(
                        "tabular.split.value: required for predicate splits".into(),
                    ));
                }
            }
            SplitKind::Key => {
                if self.split.column.is_none() && self.schema.client_key_column.is_none() {
                    return Err(CliError::Config(
                        "tabular.split.column: required for key splits when \
                         tabular.schema.client_key_column is not set"
                            .into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn delimiter_byte(&self) -> CliResult<u8> {
        let bytes = self.delimiter.as_bytes();
        if bytes.len() != 1 {
            return Err(CliError::Config(format!(
                "tabular.delimiter: must be a single byte, got {:?}",
                self.delimiter
            )));
        }
        Ok(bytes[0])
    }

    /// The column that assigns rows to clients.
    pub fn split_column(&self) -> &str {
        self.split
            .column
            .as_deref()
            .or(self.schema.client_key_column.as_deref())
            .expect("validated")
    }
}

impl BudgetSection {
    fn validate(&self) -> CliResult<()> {
        match self.mode {
            BudgetMode::Uniform => {
                let eps = self.epsilon.ok_or_else(|| {
                    CliError::Config(
                        "budgets.epsilon: required when budgets.mode = \"uniform\"".into(),
                    )
                })?;
                if !(eps >= 0.0) || !eps.is_finite() {
                    return Err(CliError::Config(format!(
                        "budgets.epsilon: must be nonnegative and finite, got {eps}"
                    )));
                }
                if self.w.is_some() {
                    return Err(CliError::Config(
                        "budgets.w: only valid when budgets.mode = \"client_specific\"".into(),
                    ));
                }
            }
            BudgetMode::ClientSpecific => {
                let w = self.w.ok_or_else(|| {
                    CliError::Config(
                        "budgets.w: required when budgets.mode = \"client_specific\"".into(),
                    )
                })?;
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(CliError::Config(format!(
                        "budgets.w: must be nonnegative and finite, got {w}"
                    )));
                }
                if self.epsilon.is_some() {
                    return Err(CliError::Config(
                        "budgets.epsilon: only valid when budgets.mode = \"uniform\"".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}
