//! Run configuration files.

use serde::{Deserialize, Serialize};
use sgnet_core::discrete::DiscreteInput;
use sgnet_core::ode::OdeRun;
use sgnet_core::verifier::{cubic_max_preset, linear_chain_preset, Budgets, NetworkSpec};

/// Schema version written into every config and report.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema: u32,
    /// Required by the sampling commands (`analyze`, `battery`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(flatten)]
    pub task: Task,
}

/// A network given directly or through one of the built-in examples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkInput {
    /// Linear chain `ẋᵢ = a·xᵢ₋₁ − xᵢ + b·xᵢ₊₁ + u` (summation).
    LinearChain { a: f64, b: f64 },
    /// Cubic chain `ẋᵢ = −xᵢ³ + max{a·xᵢ₋₁³, b·xᵢ₊₁³, u}` (max).
    CubicMax { a: f64, b: f64, epsilon: f64 },
    Custom { spec: NetworkSpec },
}

impl NetworkInput {
    pub fn resolve(&self) -> sgnet_core::Result<NetworkSpec> {
        match self {
            NetworkInput::LinearChain { a, b } => Ok(linear_chain_preset(*a, *b)),
            NetworkInput::CubicMax { a, b, epsilon } => cubic_max_preset(*a, *b, *epsilon),
            NetworkInput::Custom { spec } => Ok(spec.clone()),
        }
    }
}

fn default_tol() -> f64 {
    sgnet_core::operator::DEFAULT_TOL
}

fn default_k_max() -> usize {
    sgnet_core::operator::DEFAULT_K_MAX
}

fn default_samples() -> usize {
    256
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    /// Small-gain hypothesis checks and conclusion.
    Analyze {
        network: NetworkInput,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_analyze_k_max")]
        k_max: usize,
    },
    /// Spectral radius (and cycle data for finite max networks).
    Spectral {
        network: NetworkInput,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_k_max")]
        n_max: usize,
    },
    /// Kleene closure `Q(s)` of a max network.
    Closure {
        network: NetworkInput,
        s: Vec<f64>,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_k_max")]
        k_max: usize,
    },
    SimulateDiscrete {
        network: NetworkInput,
        x0: Vec<f64>,
        input: DiscreteInput,
        steps: usize,
    },
    SimulateOde { run: OdeRun },
    ThresholdScan { template: OdeRun, grid: Vec<(f64, f64)> },
    /// The six finite-dimensional small-gain probes side by side.
    Battery {
        network: NetworkInput,
        #[serde(default = "default_samples")]
        samples: usize,
    },
}

fn default_analyze_k_max() -> usize {
    Budgets::default().k_max
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Analyze { .. } => "analyze",
            Task::Spectral { .. } => "spectral",
            Task::Closure { .. } => "closure",
            Task::SimulateDiscrete { .. } => "simulate-discrete",
            Task::SimulateOde { .. } => "simulate-ode",
            Task::ThresholdScan { .. } => "threshold-scan",
            Task::Battery { .. } => "battery",
        }
    }

    pub fn needs_seed(&self) -> bool {
        matches!(self, Task::Analyze { .. } | Task::Battery { .. })
    }

    pub fn produces_trajectory(&self) -> bool {
        matches!(self, Task::SimulateDiscrete { .. } | Task::SimulateOde { .. })
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Parses and schema-checks a config.
pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ConfigError(format!("malformed JSON: {e}")))?;
    match value.get("schema") {
        Some(serde_json::Value::Number(n)) if n.as_u64() == Some(SCHEMA_VERSION as u64) => {}
        Some(other) => return Err(ConfigError(format!("unsupported schema {other}, expected {SCHEMA_VERSION}"))),
        None => return Err(ConfigError("missing \"schema\" field".into())),
    }
    serde_json::from_value(value).map_err(|e| ConfigError(format!("invalid config: {e}")))
}
