//! JSON report envelope and CSV trajectory output.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::{RunConfig, SCHEMA_VERSION};

pub const TOOL: &str = "sgnet";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Falsified,
    NumericFailure,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Falsified => 1,
            Verdict::NumericFailure => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub schema: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: RunConfig,
    /// Sub-reports keyed by the module that produced them.
    pub reports: Map<String, Value>,
    pub verdict: Verdict,
    pub summary: String,
    pub exit_code: i32,
    /// Only present with `--timing`; omitted by default so that reports are
    /// byte-identical across runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
}

impl ReportEnvelope {
    pub fn new(config: RunConfig, reports: Map<String, Value>, verdict: Verdict, summary: String) -> Self {
        ReportEnvelope {
            schema: SCHEMA_VERSION,
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: config.task.name().into(),
            seed: config.seed,
            config,
            reports,
            verdict,
            summary,
            exit_code: verdict.exit_code(),
            wall_time_ms: None,
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

/// Rows `k,i,x_i,u_i` for a discrete trajectory.
pub fn discrete_csv(traj: &sgnet_core::discrete::DiscreteTrajectory) -> csv::Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["k", "i", "x_i", "u_i"])?;
    for (k, x) in traj.states.iter().enumerate() {
        for (pos, v) in x.iter().enumerate() {
            let u = traj.inputs.get(k).map_or(String::new(), |u| u[pos].to_string());
            w.write_record([k.to_string(), traj.layout.index(pos).to_string(), v.to_string(), u])?;
        }
    }
    finish(w)
}

/// Rows `t,i,x_i` for an ODE trajectory.
pub fn ode_csv(traj: &sgnet_core::ode::Trajectory) -> csv::Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["t", "i", "x_i"])?;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        for (i, v) in x.iter().enumerate() {
            w.write_record([t.to_string(), i.to_string(), v.to_string()])?;
        }
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> csv::Result<String> {
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Writes `text` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
