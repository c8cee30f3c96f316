//! Run configuration: a JSON document with command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::{Deserialize, Serialize};

use mcot::entrygame::{EntryGame, Selection};
use mcot::model::{MetricConfig, StructuralModel, Theta};
use mcot::region::{parse_fixed, GridAxis, ParameterGrid};

pub const SCHEMA_VERSION: u32 = 1;

/// A problem with the configuration or the command line (exit code 2), as
/// opposed to a failure while running (exit code 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

macro_rules! config_err {
    ($($arg:tt)*) => {
        anyhow::Error::new($crate::config::ConfigError(format!($($arg)*)))
    };
}
pub(crate) use config_err;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cx,
    Ncx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_players")]
    pub players: usize,
    /// Sample sizes; commands that take one sample size use the first.
    #[serde(default = "default_n")]
    pub n: Vec<usize>,
    /// Monte Carlo draws `S`.
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_alpha")]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_theta_true")]
    pub theta_true: BTreeMap<String, f64>,
    /// Parameter tested by `test`.
    #[serde(default)]
    pub theta: Option<BTreeMap<String, f64>>,
    /// Alternative for `power`.
    #[serde(default)]
    pub theta_alt: Option<BTreeMap<String, f64>>,
    #[serde(default = "default_selection")]
    pub selection: String,
    #[serde(default = "default_lambda_x")]
    pub lambda_x: f64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_cx_tol")]
    pub cx_tol: f64,
    #[serde(default = "default_cx_max_iterations")]
    pub cx_max_iterations: usize,
    #[serde(default = "default_ncx_budget")]
    pub ncx_budget: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub grid: Vec<String>,
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    #[serde(default)]
    pub data: Option<PathBuf>,
    /// Not echoed into outputs, which must not depend on it.
    #[serde(default = "default_threads", skip_serializing)]
    pub threads: usize,
    #[serde(default = "default_out", skip_serializing)]
    pub out: PathBuf,
    #[serde(default)]
    pub time_cap_secs: Option<f64>,
    /// Adds wall-clock times to the JSON outputs, which then differ
    /// between runs.
    #[serde(default)]
    pub timings: bool,
}

fn default_model() -> String {
    "entry_game".into()
}
fn default_players() -> usize {
    3
}
fn default_n() -> Vec<usize> {
    vec![50]
}
fn default_draws() -> usize {
    100
}
fn default_alpha() -> Vec<f64> {
    vec![0.05]
}
fn default_theta_true() -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("beta0".to_string(), 0.6),
        ("beta1".to_string(), 0.6),
        ("delta".to_string(), 0.3),
    ])
}
fn default_selection() -> String {
    "uniform".into()
}
fn default_lambda_x() -> f64 {
    1.0
}
fn default_methods() -> Vec<Method> {
    vec![Method::Cx]
}
fn default_cx_tol() -> f64 {
    1e-8
}
fn default_cx_max_iterations() -> usize {
    500
}
fn default_ncx_budget() -> u64 {
    1_000_000
}
fn default_replications() -> usize {
    100
}
fn default_threads() -> usize {
    1
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str(&format!("{{\"schema_version\": {SCHEMA_VERSION}}}"))
            .expect("defaults deserialize")
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| config_err!("config: {e}"))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(config_err!(
                "config: schema_version {} is not supported (expected {SCHEMA_VERSION})",
                config.schema_version
            ));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err!("cannot read config {}: {e}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.model != "entry_game" {
            return Err(config_err!("unknown model {:?} (available: entry_game)", self.model));
        }
        self.game()?;
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(config_err!("sample sizes must be positive"));
        }
        if self.draws == 0 {
            return Err(config_err!("S must be at least 1"));
        }
        if self.alpha.is_empty() {
            return Err(config_err!("at least one alpha is required"));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(config_err!("alpha must lie in (0, 1), got {a}"));
        }
        if self.replications == 0 {
            return Err(config_err!("replications must be at least 1"));
        }
        if self.threads == 0 {
            return Err(config_err!("threads must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(config_err!("at least one method is required"));
        }
        if !(self.cx_tol > 0.0) || self.cx_max_iterations == 0 {
            return Err(config_err!("cx_tol and cx_max_iterations must be positive"));
        }
        if let Some(t) = self.time_cap_secs {
            if !(t > 0.0 && t.is_finite()) {
                return Err(config_err!("time cap must be a positive number of seconds"));
            }
        }
        self.metric()?;
        self.selection()?;
        self.theta_true()?;
        Ok(())
    }

    pub fn game(&self) -> Result<EntryGame> {
        EntryGame::new(self.players).map_err(|e| config_err!("players: {e}"))
    }

    pub fn metric(&self) -> Result<MetricConfig> {
        MetricConfig::new(self.lambda_x).map_err(|e| config_err!("lambda_x: {e}"))
    }

    pub fn selection(&self) -> Result<Selection> {
        self.selection.parse().map_err(|e| config_err!("selection: {e}"))
    }

    pub fn first_n(&self) -> usize {
        self.n[0]
    }

    pub fn theta_true(&self) -> Result<Theta> {
        named_theta(&self.game()?, &self.theta_true, "theta_true")
    }

    pub fn grid(&self) -> Result<ParameterGrid> {
        if self.grid.is_empty() {
            return Err(config_err!("region needs at least one --grid axis"));
        }
        let axes = self
            .grid
            .iter()
            .map(|s| s.parse::<GridAxis>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| config_err!("grid: {e}"))?;
        ParameterGrid::new(axes, self.fixed.clone()).map_err(|e| config_err!("grid: {e}"))
    }
}

/// Builds a parameter from named components, requiring every model
/// parameter exactly once.
pub fn named_theta<M: StructuralModel>(
    model: &M,
    values: &BTreeMap<String, f64>,
    what: &str,
) -> Result<Theta> {
    let names = model.parameter_names();
    if let Some(extra) = values.keys().find(|k| !names.contains(k)) {
        return Err(config_err!("{what}: unknown parameter {extra} (model has {})", names.join(", ")));
    }
    let flat = names
        .iter()
        .map(|n| values.get(n).copied().ok_or_else(|| config_err!("{what}: missing {n}")))
        .collect::<Result<Vec<_>>>()?;
    let theta = Theta::from_flat(&flat, model.theta1_dim()).map_err(|e| config_err!("{what}: {e}"))?;
    model.check_theta(&theta).map_err(|e| config_err!("{what}: {e}"))?;
    Ok(theta)
}

/// Parses `name=value,name=value`.
pub fn parse_assignments(s: &str) -> Result<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (name, value) = parse_fixed(part).map_err(|e| config_err!("{e}"))?;
        if map.insert(name.clone(), value).is_some() {
            return Err(config_err!("{name} given twice"));
        }
    }
    Ok(map)
}
