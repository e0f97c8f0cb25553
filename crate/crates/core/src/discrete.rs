//! The discrete monotone system `x(k+1) ≤ A(x(k)) + u(k)`.
//!
//! The simulator runs the equality branch, which dominates every solution of
//! the inequality started at the same point with the same input. On top of it
//! sit eISS certificates, the MLIM probe and a Lyapunov function built from
//! operator powers.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::comparison::ComparisonFunction;
use crate::math;
use crate::network::{sup_norm, AggregationMode};
use crate::operator::{kleene_with, BoundOperator, Layout, DEFAULT_K_MAX, DEFAULT_TOL};
use crate::sampling;
use crate::{Error, Evidence, Result};

/// Simulated states above this norm abort the run.
pub const OVERFLOW_GUARD: f64 = 1e12;

/// Input sequence of the discrete system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteInput {
    /// The same vector at every step.
    Constant(Vec<f64>),
    /// `u(k)` for `k = 0, 1, …`; must cover every simulated step.
    Table(Vec<Vec<f64>>),
}

impl DiscreteInput {
    pub fn zero(len: usize) -> Self {
        DiscreteInput::Constant(vec![0.0; len])
    }

    pub fn at(&self, k: usize) -> &[f64] {
        match self {
            DiscreteInput::Constant(u) => u,
            DiscreteInput::Table(rows) => &rows[k],
        }
    }

    fn validate(&self, len: usize, steps: usize) -> Result<()> {
        let rows: &[Vec<f64>] = match self {
            DiscreteInput::Constant(u) => core::slice::from_ref(u),
            DiscreteInput::Table(rows) => {
                if rows.len() < steps {
                    return Err(Error::InvalidInput(format!(
                        "input table has {} rows, {steps} steps requested",
                        rows.len()
                    )));
                }
                rows
            }
        };
        for u in rows {
            if u.len() != len {
                return Err(Error::WindowMismatch { expected: len, found: u.len() });
            }
            if u.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidInput("inputs must be finite and >= 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteTrajectory {
    pub layout: Layout,
    /// `x(0), …, x(K)`.
    pub states: Vec<Vec<f64>>,
    /// `u(0), …, u(K−1)`.
    pub inputs: Vec<Vec<f64>>,
}

impl DiscreteTrajectory {
    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(|x| sup_norm(x)).collect()
    }

    /// `sup_k ‖u(k)‖`.
    pub fn input_sup(&self) -> f64 {
        self.inputs.iter().map(|u| sup_norm(u)).fold(0.0, f64::max)
    }
}

fn check_start(op: &BoundOperator, x0: &[f64]) -> Result<()> {
    if x0.len() != op.len() {
        return Err(Error::WindowMismatch { expected: op.len(), found: x0.len() });
    }
    if x0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidInput("initial state must be finite and >= 0".into()));
    }
    Ok(())
}

/// Runs `x(k+1) = A(x(k)) + u(k)` for `steps` steps.
pub fn iterate(op: &BoundOperator, x0: &[f64], input: &DiscreteInput, steps: usize) -> Result<DiscreteTrajectory> {
    simulate(op, x0, input, steps, |_, x| x)
}

/// Runs `x(k+1) = d(k) ⊙ (A(x(k)) + u(k))` with damping factors drawn
/// uniformly from `[0, 1]`; a solution of the inequality.
pub fn iterate_damped(
    op: &BoundOperator,
    x0: &[f64],
    input: &DiscreteInput,
    steps: usize,
    seed: u64,
) -> Result<DiscreteTrajectory> {
    let mut rng = sampling::stream(seed, 0);
    simulate(op, x0, input, steps, move |_, mut x| {
        x.iter_mut().for_each(|v| *v *= rng.gen::<f64>());
        x
    })
}

fn simulate(
    op: &BoundOperator,
    x0: &[f64],
    input: &DiscreteInput,
    steps: usize,
    mut post: impl FnMut(usize, Vec<f64>) -> Vec<f64>,
) -> Result<DiscreteTrajectory> {
    check_start(op, x0)?;
    input.validate(op.len(), steps)?;
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps);
    states.push(x0.to_vec());
    for k in 0..steps {
        let u = input.at(k);
        let mut next = op.apply(&states[k]);
        next.iter_mut().zip(u).for_each(|(x, u)| *x += u);
        let next = post(k, next);
        let norm = sup_norm(&next);
        if !(norm <= OVERFLOW_GUARD) {
            return Err(Error::Overflow { step: k + 1, norm });
        }
        states.push(next);
        inputs.push(u.to_vec());
    }
    Ok(DiscreteTrajectory { layout: op.layout(), states, inputs })
}

/// `‖x(k)‖ ≤ M‖x(0)‖aᵏ + γ(‖u‖∞)`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EissCertificate {
    pub m: f64,
    pub a: f64,
    pub gamma: ComparisonFunction,
}

/// eISS certificate for linear gains with spectral radius `r < 1`.
///
/// With `a_k = ‖Aᵏ(𝟏)‖` (submultiplicative) and `a = (1 + r)/2`, pick the
/// first `N ≥ 1` with `a_N ≤ aᴺ`; then `a_k ≤ M·aᵏ` for
/// `M = max_{j<N} a_j/aʲ`. The input gain is the Neumann bound.
pub fn certify_eiss(op: &BoundOperator) -> Result<EissCertificate> {
    let r = op.spectral_radius(DEFAULT_TOL, DEFAULT_K_MAX)?.value;
    if !(r < 1.0) {
        return Err(Error::InvalidInput(format!("spectral radius {r} >= 1 admits no eISS certificate")));
    }
    let a = r + 0.5 * (1.0 - r);
    let norms = op.power_norms(1_000_000, 0.0);
    let mut m: f64 = 1.0;
    let mut found = false;
    for (n, &an) in norms.iter().enumerate() {
        let an_bound = math::powf(a, n as f64);
        if n >= 1 && an <= an_bound {
            found = true;
            break;
        }
        m = m.max(an / an_bound);
    }
    if !found && norms.last() != Some(&0.0) {
        return Err(Error::Budget("power norms did not fall below the eISS rate".into()));
    }
    let gamma = ComparisonFunction::linear(op.neumann_bound(1_000_000)?.bound);
    Ok(EissCertificate { m, a, gamma })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub pass: bool,
    pub first_violation: Option<usize>,
    /// Largest `lhs − rhs` over all steps.
    pub max_excess: f64,
}

fn tolerance(rhs: f64) -> f64 {
    1e-9 * rhs.abs().max(1.0)
}

/// Checks the eISS inequality at every step of `traj` (tolerance `1e-9`,
/// relative above 1).
pub fn check_eiss(traj: &DiscreteTrajectory, cert: &EissCertificate) -> InequalityCheck {
    let x0 = sup_norm(&traj.states[0]);
    let input_term = cert.gamma.value(traj.input_sup());
    let mut out = InequalityCheck { pass: true, first_violation: None, max_excess: f64::NEG_INFINITY };
    for (k, x) in traj.states.iter().enumerate() {
        let rhs = cert.m * x0 * math::powf(cert.a, k as f64) + input_term;
        let excess = sup_norm(x) - rhs;
        out.max_excess = out.max_excess.max(excess);
        if excess > tolerance(rhs) && out.pass {
            out.pass = false;
            out.first_violation = Some(k);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedKind {
    /// `t·s0` for a point of strict decay `s0`.
    StrictDecay,
    /// Closure `Q(t𝟏)` (max mode) or `t𝟏` (sum mode) that happens to decrease.
    Majorant,
    /// Supplied by the caller.
    Given,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MlimStatus {
    /// `‖x(N)‖ ≤ ε + ξ(‖w‖)` first at step `n`.
    Attained { n: usize },
    /// Not attained within the step budget.
    EvidenceNegative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlimAttainment {
    pub epsilon: f64,
    pub status: MlimStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlimReport {
    pub w_norm: f64,
    /// `ξ(‖w‖)`
    pub bound: f64,
    pub seed_kind: Option<SeedKind>,
    pub x0: Option<Vec<f64>>,
    /// Attainment along the extremal (equality) solution.
    pub attainment: Vec<MlimAttainment>,
    /// Damped decreasing solutions checked in addition.
    pub damped_runs: usize,
    /// Constant solution `c·v` with `A(c·v) ≥ c·v` staying above the bound.
    pub constant_witness: Option<Vec<f64>>,
    pub evidence: Evidence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlimOptions {
    /// Decreasing start point; constructed when absent.
    pub initial: Option<Vec<f64>>,
    /// Number of damped decreasing solutions to run alongside.
    pub damped: usize,
    pub seed: u64,
}

impl Default for MlimOptions {
    fn default() -> Self {
        MlimOptions { initial: None, damped: 4, seed: 0 }
    }
}

fn decreasing_step(op: &BoundOperator, x: &[f64], w: &[f64]) -> bool {
    op.apply(x).iter().zip(w).zip(x).all(|((a, w), x)| a + w <= *x)
}

/// Start point `x0` with `x0 ≥ A(x0) + w`.
fn decreasing_seed(op: &BoundOperator, w: &[f64]) -> Option<(SeedKind, Vec<f64>)> {
    let w_norm = sup_norm(w);
    if op.is_linear() {
        if let Ok(est) = op.spectral_radius(DEFAULT_TOL, DEFAULT_K_MAX) {
            if est.value < 1.0 {
                let eps = if est.value > 0.0 { (0.5 * (1.0 / est.value - 1.0)).min(1.0) } else { 1.0 };
                if let Ok(cert) = op.strict_decay_point(eps, DEFAULT_TOL) {
                    let s0 = &cert.s0.values;
                    let min = s0.iter().copied().fold(f64::INFINITY, f64::min);
                    let t = (2.0 * w_norm / ((1.0 - cert.lambda) * min)).max(1.0);
                    let x0: Vec<f64> = s0.iter().map(|v| t * v).collect();
                    if decreasing_step(op, &x0, w) {
                        return Some((SeedKind::StrictDecay, x0));
                    }
                }
            }
        }
    }
    for k in 0..=12 {
        let t = math::powf(10.0, k as f64) * w_norm.max(1.0);
        let ones = vec![t; op.len()];
        let x0 = match op.mode() {
            AggregationMode::Max => {
                let star = kleene_with(|x| op.apply(x), &ones, 0.0, DEFAULT_K_MAX);
                if !star.converged {
                    continue;
                }
                star.q
            }
            AggregationMode::Sum => ones,
        };
        if decreasing_step(op, &x0, w) {
            return Some((SeedKind::Majorant, x0));
        }
    }
    None
}

/// Nonzero `v ≥ 0` with `A(v) ≥ v` at the scale `‖v‖ = norm`, if one of the
/// candidates works.
fn constant_solution(op: &BoundOperator, candidates: &[Vec<f64>], norm: f64) -> Option<Vec<f64>> {
    candidates.iter().find_map(|v| {
        let n = sup_norm(v);
        if n == 0.0 {
            return None;
        }
        let x: Vec<f64> = v.iter().map(|c| c * norm / n).collect();
        op.apply(&x).iter().zip(&x).all(|(a, x)| a >= x).then_some(x)
    })
}

/// Probes the MLIM property for the constant input `w` and gain candidate `ξ`.
///
/// Runs the equality recursion from a decreasing start point (decreasing by
/// induction and monotonicity) and records, per `ε`, the first `N` with
/// `‖x(N)‖ ≤ ε + ξ(‖w‖)`. `expansive` lists vectors `v` to test for
/// `A(v) ≥ v`; such a `v` scaled above the bound is a decreasing (constant)
/// solution that never enters the ball.
pub fn mlim_probe(
    op: &BoundOperator,
    w: &[f64],
    xi: &ComparisonFunction,
    eps_grid: &[f64],
    k_max: usize,
    expansive: &[Vec<f64>],
    options: &MlimOptions,
) -> Result<MlimReport> {
    check_start(op, w)?;
    if eps_grid.is_empty() || eps_grid.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidInput("epsilon grid must be nonempty and positive".into()));
    }
    let w_norm = sup_norm(w);
    let bound = xi.value(w_norm);
    let eps_max = eps_grid.iter().copied().fold(0.0, f64::max);
    let mut report = MlimReport {
        w_norm,
        bound,
        seed_kind: None,
        x0: None,
        attainment: Vec::new(),
        damped_runs: 0,
        constant_witness: None,
        evidence: Evidence::Inconclusive { reason: String::new() },
    };
    let mut candidates: Vec<Vec<f64>> = expansive.to_vec();
    candidates.push(vec![1.0; op.len()]);
    if let Some(x) = constant_solution(op, &candidates, 2.0 * (eps_max + bound) + 1.0) {
        report.evidence = Evidence::Falsified {
            witness: format!(
                "constant solution with norm {} satisfies x <= A(x) + w and stays above {}",
                sup_norm(&x),
                eps_max + bound
            ),
        };
        report.constant_witness = Some(x);
        return Ok(report);
    }
    let seed = match &options.initial {
        Some(x0) => {
            check_start(op, x0)?;
            decreasing_step(op, x0, w).then(|| (SeedKind::Given, x0.clone()))
        }
        None => decreasing_seed(op, w),
    };
    let Some((kind, x0)) = seed else {
        report.evidence = Evidence::Inconclusive { reason: "no decreasing start point found (seed failure)".into() };
        return Ok(report);
    };
    report.seed_kind = Some(kind);
    report.x0 = Some(x0.clone());
    let mut first_hit: Vec<Option<usize>> = vec![None; eps_grid.len()];
    let mut x = x0.clone();
    for k in 0..=k_max {
        let norm = sup_norm(&x);
        for (hit, eps) in first_hit.iter_mut().zip(eps_grid) {
            if hit.is_none() && norm <= eps + bound {
                *hit = Some(k);
            }
        }
        if first_hit.iter().all(Option::is_some) || k == k_max {
            break;
        }
        let mut next = op.apply(&x);
        next.iter_mut().zip(w).for_each(|(a, w)| *a += w);
        x = next;
    }
    report.attainment = eps_grid
        .iter()
        .zip(&first_hit)
        .map(|(&epsilon, hit)| MlimAttainment {
            epsilon,
            status: match hit {
                Some(n) => MlimStatus::Attained { n: *n },
                None => MlimStatus::EvidenceNegative,
            },
        })
        .collect();
    // Damped decreasing solutions x(k+1) = min(x(k), d ⊙ (A(x(k)) + w)) lie
    // below the extremal one; they must attain no later.
    let latest = first_hit.iter().flatten().copied().max();
    if let (Some(limit), true) = (latest, first_hit.iter().all(Option::is_some)) {
        for run in 0..options.damped {
            let mut rng = sampling::stream(options.seed, run as u64);
            let mut y = x0.clone();
            for _ in 0..limit {
                let mut next = op.apply(&y);
                for ((n, w), prev) in next.iter_mut().zip(w).zip(&y) {
                    *n = ((*n + w) * rng.gen::<f64>()).min(*prev);
                }
                y = next;
            }
            if sup_norm(&y) > eps_grid.iter().copied().fold(f64::INFINITY, f64::min) + bound {
                return Err(Error::Budget(String::from("damped solution outran the extremal one")));
            }
        }
        report.damped_runs = options.damped;
    }
    report.evidence = if first_hit.iter().all(Option::is_some) {
        Evidence::Supported { samples: 1 + report.damped_runs }
    } else {
        Evidence::Inconclusive {
            reason: format!("bound not attained within {k_max} steps (evidence negative)"),
        }
    };
    Ok(report)
}

/// `V(x) = max_{0≤n<N} ηⁿ ‖Aⁿ(x)‖`.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovFunction {
    pub eta: f64,
    pub truncation: usize,
    /// `‖A(𝟏)‖`
    pub c: f64,
    /// `max_{0≤n<N} (ηC)ⁿ`
    pub psi: f64,
    op: BoundOperator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSummary {
    pub eta: f64,
    pub truncation: usize,
    pub c: f64,
    pub psi: f64,
}

/// Truncated Lyapunov function for linear gains with `η·r < 1`.
///
/// `N` is the first `n ≥ 1` with `ηⁿ‖Aⁿ(𝟏)‖ < 1e-3`; the omitted terms are
/// then dominated by the `n = 0` term, so the truncated function satisfies
/// both the sandwich and the dissipation inequality exactly.
pub fn build_lyapunov(op: &BoundOperator, eta: f64) -> Result<LyapunovFunction> {
    if !(eta > 1.0 && eta.is_finite()) {
        return Err(Error::InvalidInput(format!("eta must exceed 1, got {eta}")));
    }
    let r = op.spectral_radius(DEFAULT_TOL, DEFAULT_K_MAX)?.value;
    if eta * r >= 1.0 {
        return Err(Error::EtaTooLarge { eta, spectral_radius: r });
    }
    let mut x = vec![1.0; op.len()];
    let mut scale = 1.0;
    let mut truncation = None;
    let mut c = 0.0;
    for n in 1..=1_000_000 {
        x = op.apply(&x);
        scale *= eta;
        let a = sup_norm(&x);
        if n == 1 {
            c = a;
        }
        if scale * a < 1e-3 {
            truncation = Some(n);
            break;
        }
    }
    let truncation = truncation.ok_or_else(|| Error::Budget("Lyapunov truncation not reached".into()))?;
    let psi = (0..truncation).map(|n| math::powf(eta * c, n as f64)).fold(0.0, f64::max);
    Ok(LyapunovFunction { eta, truncation, c, psi, op: op.clone() })
}

impl LyapunovFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut y = x.to_vec();
        let mut best = sup_norm(&y);
        let mut scale = 1.0;
        for _ in 1..self.truncation {
            y = self.op.apply(&y);
            scale *= self.eta;
            best = best.max(scale * sup_norm(&y));
        }
        best
    }

    /// `‖x‖ ≤ V(x) ≤ ψ‖x‖` within `1e-9`.
    pub fn sandwich_holds(&self, x: &[f64]) -> bool {
        let (n, v) = (sup_norm(x), self.eval(x));
        n <= v + tolerance(v) && v <= self.psi * n + tolerance(self.psi * n)
    }

    pub fn summary(&self) -> LyapunovSummary {
        LyapunovSummary { eta: self.eta, truncation: self.truncation, c: self.c, psi: self.psi }
    }
}

/// Checks `V(x(k+1)) ≤ V(x(k))/η + ψ‖u(k)‖` along `traj`.
pub fn check_dissipation(v: &LyapunovFunction, traj: &DiscreteTrajectory) -> InequalityCheck {
    let mut out = InequalityCheck { pass: true, first_violation: None, max_excess: f64::NEG_INFINITY };
    let values: Vec<f64> = traj.states.iter().map(|x| v.eval(x)).collect();
    for (k, u) in traj.inputs.iter().enumerate() {
        let rhs = values[k] / v.eta + v.psi * sup_norm(u);
        let excess = values[k + 1] - rhs;
        out.max_excess = out.max_excess.max(excess);
        if excess > tolerance(rhs) && out.pass {
            out.pass = false;
            out.first_violation = Some(k + 1);
        }
    }
    out
}
