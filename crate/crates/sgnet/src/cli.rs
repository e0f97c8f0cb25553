//! Command-line entry point.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{Map, Value};
use sgnet_core::cone::{finite_dim_battery, BatteryConfig};
use sgnet_core::discrete::iterate;
use sgnet_core::ode::{simulate, threshold_scan};
use sgnet_core::verifier::{describe, verify, Budgets, Conclusion};
use sgnet_core::{AggregationMode, Evidence};

use crate::config::{self, RunConfig, Task};
use crate::report::{discrete_csv, ode_csv, write_atomic, ReportEnvelope, Verdict};

/// Exit code for unreadable, malformed or inconsistent configs and flags.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for numeric failures (blow-up, divergence, exhausted budgets).
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Small-gain analysis and simulation of monotone networks.
#[derive(Debug, Parser)]
#[command(name = "sgnet", version)]
pub struct Args {
    /// Command to run; must match the config's "command" when given.
    pub command: Option<String>,
    /// JSON run config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for sampling commands; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Record wall time in the report (breaks byte-identical replay).
    #[arg(long)]
    pub timing: bool,
}

/// Everything a command produced.
pub struct Outcome {
    pub reports: Map<String, Value>,
    pub verdict: Verdict,
    pub summary: String,
    pub csv: Option<String>,
}

enum Failure {
    Config(String),
    Numeric(String),
}

impl From<sgnet_core::Error> for Failure {
    fn from(e: sgnet_core::Error) -> Self {
        if e.is_numeric() {
            Failure::Numeric(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("reports serialize to JSON")
}

fn single(key: &str, v: &impl Serialize) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert(key.into(), to_value(v));
    m
}

fn evidence_verdict(e: &Evidence) -> Verdict {
    match e {
        Evidence::Pass | Evidence::Supported { .. } => Verdict::Pass,
        Evidence::Falsified { .. } => Verdict::Falsified,
        Evidence::Inconclusive { .. } => Verdict::NumericFailure,
    }
}

/// Runs the task of a parsed config.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, sgnet_core::Error> {
    let seed = cfg.seed.unwrap_or(0);
    let outcome = match &cfg.task {
        Task::Analyze { network, samples, k_max } => {
            let spec = network.resolve()?;
            let verdict = verify(&spec, &Budgets { samples: *samples, k_max: *k_max, seed })?;
            let v = match verdict.conclusion {
                Conclusion::Iss | Conclusion::Ugs => Verdict::Pass,
                Conclusion::Inconclusive if verdict.counterevidence => Verdict::Falsified,
                Conclusion::Inconclusive => Verdict::NumericFailure,
            };
            let mut summary = describe(&verdict);
            if let Some(r) = verdict.spectral_radius {
                summary.push_str(&format!(", spectral radius {r}"));
            }
            Outcome { reports: single("verifier", &verdict), verdict: v, summary, csv: None }
        }
        Task::Spectral { network, tol, n_max } => {
            let op = network.resolve()?.bind()?;
            let est = op.spectral_radius(*tol, *n_max)?;
            let mut reports = single("spectral", &est);
            let mut verdict = if est.value < 1.0 { Verdict::Pass } else { Verdict::Falsified };
            let mut summary = format!("spectral radius {}", est.value);
            if op.mode() == AggregationMode::Max {
                if let Ok(cycles) = op.cycle_analysis() {
                    verdict = evidence_verdict(&cycles.evidence);
                    if let Evidence::Falsified { witness } = &cycles.evidence {
                        summary.push_str(&format!("; {witness}"));
                    }
                    reports.insert("cycles".into(), to_value(&cycles));
                }
            }
            Outcome { reports, verdict, summary, csv: None }
        }
        Task::Closure { network, s, tol, k_max } => {
            let op = network.resolve()?.bind()?;
            if s.len() != op.len() {
                return Err(sgnet_core::Error::WindowMismatch { expected: op.len(), found: s.len() });
            }
            let star = op.kleene_star(s, *tol, *k_max)?;
            let (verdict, summary) = if star.diverged {
                (Verdict::NumericFailure, format!("closure diverged after {} iterations", star.iterations))
            } else if !star.converged {
                (Verdict::NumericFailure, format!("closure not reached within {k_max} iterations"))
            } else {
                (Verdict::Pass, format!("closure reached after {} iterations", star.iterations))
            };
            Outcome { reports: single("closure", &star), verdict, summary, csv: None }
        }
        Task::SimulateDiscrete { network, x0, input, steps } => {
            let op = network.resolve()?.bind()?;
            let traj = iterate(&op, x0, input, *steps)?;
            let summary = format!("final norm {}", traj.norms().last().copied().unwrap_or(0.0));
            let csv = discrete_csv(&traj).map_err(|e| sgnet_core::Error::InvalidInput(e.to_string()))?;
            Outcome { reports: single("discrete", &traj), verdict: Verdict::Pass, summary, csv: Some(csv) }
        }
        Task::SimulateOde { run } => {
            let traj = simulate(run)?;
            let (verdict, summary) = match traj.escape_time {
                Some(t) => (Verdict::NumericFailure, format!("blow-up at t = {t}")),
                None => (Verdict::Pass, format!("final norm {}", traj.final_norm())),
            };
            let csv = ode_csv(&traj).map_err(|e| sgnet_core::Error::InvalidInput(e.to_string()))?;
            Outcome { reports: single("ode", &traj), verdict, summary, csv: Some(csv) }
        }
        Task::ThresholdScan { template, grid } => {
            let table = threshold_scan(template, grid)?;
            let verdict = if table.monotone { Verdict::Pass } else { Verdict::Falsified };
            let summary = format!(
                "last decaying key {:?}, first non-decaying key {:?}",
                table.last_decay, table.first_non_decay
            );
            Outcome { reports: single("threshold_scan", &table), verdict, summary, csv: None }
        }
        Task::Battery { network, samples } => {
            let op = network.resolve()?.bind()?;
            let report = finite_dim_battery(&op, &BatteryConfig { samples: *samples, seed })?;
            let (verdict, summary) = if !report.consistent {
                (Verdict::NumericFailure, format!("probes disagree: {}", report.diagnostics.join("; ")))
            } else if report.all_positive() {
                (Verdict::Pass, "all six probes positive".to_string())
            } else {
                (Verdict::Falsified, "all six probes falsified".to_string())
            };
            Outcome { reports: single("battery", &report), verdict, summary, csv: None }
        }
    };
    Ok(outcome)
}

fn load(args: &Args) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read config {}", args.config.display()))?;
    let mut cfg = config::parse(&text)?;
    if let Some(cmd) = &args.command {
        anyhow::ensure!(
            cmd == cfg.task.name(),
            "command {cmd:?} does not match config command {:?}",
            cfg.task.name()
        );
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    anyhow::ensure!(!cfg.task.needs_seed() || cfg.seed.is_some(), "command {} needs a seed", cfg.task.name());
    anyhow::ensure!(
        args.format == Format::Json || cfg.task.produces_trajectory(),
        "CSV output is only available for simulation commands"
    );
    Ok(cfg)
}

fn emit(args: &Args, text: &str) -> anyhow::Result<()> {
    match &args.out {
        Some(path) => write_atomic(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs the tool on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(args) => args,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match load(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_CONFIG;
        }
    };
    let start = Instant::now();
    let outcome = match execute(&cfg).map_err(Failure::from) {
        Ok(o) => o,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("numeric failure: {msg}");
            return EXIT_NUMERIC;
        }
    };
    let Outcome { reports, verdict, summary, csv } = outcome;
    eprintln!("{}: {summary}", cfg.task.name());
    let mut envelope = ReportEnvelope::new(cfg, reports, verdict, summary);
    if args.timing {
        envelope.wall_time_ms = Some(start.elapsed().as_millis() as u64);
    }
    let text = match args.format {
        Format::Csv => csv.expect("checked in load"),
        Format::Json => match envelope.to_json() {
            Ok(text) => text,
            Err(e) => {
                eprintln!("error: cannot serialize report: {e}");
                return EXIT_NUMERIC;
            }
        },
    };
    if let Err(e) = emit(&args, &text) {
        eprintln!("error: {e:#}");
        return EXIT_CONFIG;
    }
    envelope.exit_code
}
