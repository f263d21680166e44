//! Run configuration shared by every subcommand.
//!
//! A config file is a JSON document tagged `"schema": "l0fa/v1"`; missing keys
//! take their defaults and unknown keys are rejected. Command-line flags are
//! applied on top.

use std::path::Path;

use serde::{Deserialize, Serialize};

use l0fa::experiments::{CvGrid, SyntheticSpec};
use l0fa::linalg::DEFAULT_RATIO_THRESHOLD;
use l0fa::stationarity::DEFAULT_CHECK_TOL;
use l0fa::AdmmConfig;

use crate::error::CliError;

pub const SCHEMA: &str = "l0fa/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningMode {
    Fixed,
    #[default]
    Cv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub solver: AdmmConfig,
    pub synthetic: SyntheticSpec,
    pub grid: CvGrid,
    pub trials: usize,
    pub tuning: TuningMode,
    pub ratio_threshold: f64,
    pub check_tol: f64,
    /// Step sizes swept by `montecarlo`; empty means just `solver.gamma`.
    pub gammas: Vec<f64>,
    /// Sample sizes swept by `montecarlo`; empty means just `synthetic.n`.
    pub sample_sizes: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA.to_string(),
            solver: AdmmConfig::default(),
            synthetic: SyntheticSpec::default(),
            grid: CvGrid::paper(),
            trials: 10,
            tuning: TuningMode::Cv,
            ratio_threshold: DEFAULT_RATIO_THRESHOLD,
            check_tol: DEFAULT_CHECK_TOL,
            gammas: Vec::new(),
            sample_sizes: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::input(format!("{}:{e}", path.display())))
    }

    /// Errors are prefixed with `line:column:`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| format!("{}:{}: {e}", e.line(), e.column()))?;
        match raw.get("schema") {
            Some(serde_json::Value::String(s)) if s == SCHEMA => {}
            Some(other) => return Err(format!("1:1: unsupported schema {other}, expected {SCHEMA:?}")),
            None => return Err(format!("1:1: missing \"schema\": {SCHEMA:?}")),
        }
        let cfg: Self = serde_json::from_str(text).map_err(|e| format!("{}:{}: {e}", e.line(), e.column()))?;
        cfg.validate().map_err(|e| format!("1:1: {e}"))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.synthetic.validate().map_err(|e| e.to_string())?;
        self.grid.validate().map_err(|e| e.to_string())?;
        if !(self.ratio_threshold > 0.0 && self.ratio_threshold < 1.0) {
            return Err(format!("ratio_threshold must lie in (0, 1), got {}", self.ratio_threshold));
        }
        if !(self.check_tol > 0.0) {
            return Err(format!("check_tol must be positive, got {}", self.check_tol));
        }
        if let Some(g) = self.gammas.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(format!("gamma {g} is not positive"));
        }
        Ok(())
    }

    /// Full-size experiment: `p = 40`, 100 trials, the complete grid.
    pub fn paper_scale(&mut self) {
        self.synthetic.p = SyntheticSpec::paper().p;
        self.trials = 100;
        self.grid = CvGrid::paper();
    }
}
