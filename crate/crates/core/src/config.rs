//! Study configuration, read from TOML.
//!
//! ```toml
//! schema = 1
//! p_target = 3.0
//! sigma = 0.97
//! x0 = [-1.0, -1.0]
//! initial_n = 2
//! strategy = "uniform"        # uniform | pre_adapted_then_uniform | adaptive
//! theta = 0.5
//! max_levels = 6
//! pre_adapt_steps = 4
//! warm_start = "off"          # off | restart | at_target
//! load_quad_degree = 10
//! error_quad_degree = 10
//!
//! [solver]
//! newton_tol = 1e-8
//! max_newton = 50
//! continuation_step = 0.1
//! min_step = 1e-3
//! damping = { enabled = true, factor = 0.5, max_halvings = 12 }
//! linear = { kind = "direct", rel_tol = 1e-10, max_iterations = 5000 }
//!
//! [output]
//! dir = "out"
//! csv_name = "records.csv"
//! telemetry_name = "telemetry.jsonl"
//! snapshot_levels = [0, 2, 6]
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::newton::SolverOptions;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Uniform,
    PreAdaptedThenUniform,
    Adaptive,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Strategy::Uniform),
            "pre_adapted" | "pre_adapted_then_uniform" => Ok(Strategy::PreAdaptedThenUniform),
            "adaptive" => Ok(Strategy::Adaptive),
            _ => Err(format!("unknown strategy `{s}` (expected uniform, pre_adapted or adaptive)")),
        }
    }
}

/// How a level's solve is initialized from the previous level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStart {
    /// Every level restarts from zero interior values at `p = 2`.
    #[default]
    Off,
    /// Transferred state, continuation restarted at `p = 2`.
    Restart,
    /// Transferred state, Newton directly at the target exponent.
    AtTarget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub csv_name: String,
    pub telemetry_name: Option<String>,
    pub snapshot_levels: Vec<usize>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, csv_name: "records.csv".into(), telemetry_name: None, snapshot_levels: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub schema: u32,
    pub p_target: f64,
    pub sigma: f64,
    pub x0: [f64; 2],
    pub initial_n: usize,
    pub strategy: Strategy,
    pub theta: f64,
    pub max_levels: usize,
    pub pre_adapt_steps: usize,
    pub warm_start: WarmStart,
    pub load_quad_degree: usize,
    pub error_quad_degree: usize,
    pub solver: SolverOptions,
    pub output: OutputConfig,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            schema: SCHEMA_VERSION,
            p_target: 3.0,
            sigma: 0.97,
            x0: [-1.0, -1.0],
            initial_n: 2,
            strategy: Strategy::Uniform,
            theta: 0.5,
            max_levels: 6,
            pre_adapt_steps: 4,
            warm_start: WarmStart::Off,
            load_quad_degree: 10,
            error_quad_degree: 10,
            solver: SolverOptions::default(),
            output: OutputConfig::default(),
        }
    }
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, message: message.into() }
}

impl ProblemConfig {
    /// Smooth benchmark: singularity outside the domain, uniform levels.
    pub fn case1(p: f64) -> Self {
        ProblemConfig { p_target: p, x0: [-1.0, -1.0], ..Default::default() }
    }

    /// Singular-load benchmark at the corner `(0, 0)` with `p = 1.5`.
    pub fn case2(strategy: Strategy) -> Self {
        let max_levels = match strategy {
            Strategy::Uniform => 6,
            Strategy::PreAdaptedThenUniform => 5,
            Strategy::Adaptive => 12,
        };
        ProblemConfig { p_target: 1.5, x0: [0.0, 0.0], strategy, max_levels, ..Default::default() }
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: ProblemConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: origin.to_string(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Parse { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema != SCHEMA_VERSION {
            return Err(invalid("schema", format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema)));
        }
        if !(self.p_target > 1.0 && self.p_target.is_finite()) {
            return Err(invalid("p_target", format!("must be greater than 1, got {}", self.p_target)));
        }
        if !(self.sigma < 2.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma", format!("must be less than 2, got {}", self.sigma)));
        }
        if !(self.p_target > self.sigma) {
            return Err(invalid("sigma", format!("must be below p_target = {}, got {}", self.p_target, self.sigma)));
        }
        if !self.x0.iter().all(|v| v.is_finite()) {
            return Err(invalid("x0", "coordinates must be finite"));
        }
        if self.initial_n == 0 {
            return Err(invalid("initial_n", "must be at least 1"));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(invalid("theta", format!("must lie in (0, 1], got {}", self.theta)));
        }
        if self.max_levels == 0 {
            return Err(invalid("max_levels", "must be at least 1"));
        }
        if self.load_quad_degree == 0 || self.error_quad_degree == 0 {
            return Err(invalid("load_quad_degree", "quadrature degrees must be positive"));
        }
        self.solver.validate().map_err(|m| invalid("solver", m))?;
        if self.output.csv_name.is_empty() {
            return Err(invalid("output.csv_name", "must not be empty"));
        }
        Ok(())
    }
}
