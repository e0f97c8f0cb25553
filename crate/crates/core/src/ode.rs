//! Truncated infinite ODE networks on a ring or a zero-padded chain.
//!
//! Integration is fixed-step RK4 so that trajectories are bit-reproducible.
//! The max-type network has a non-smooth right-hand side; RK4 is applied
//! anyway, which is exact enough for constant profiles (they never switch
//! branches) but carries only first-order accuracy at switching surfaces.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::comparison::{ComparisonFunction, KlFunction};
use crate::envelope::upper_comparison;
use crate::math;
use crate::network::{sup_norm, Boundary};
use crate::{Error, Result};

/// Sup norm at which a run is declared to blow up.
pub const BLOW_UP: f64 = 1e9;

pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkKind {
    /// `ẋᵢ = a·xᵢ₋₁ − xᵢ + b·xᵢ₊₁ + u`
    LinearInvariant { a: f64, b: f64 },
    /// `ẋᵢ = −xᵢ³ + max{a·xᵢ₋₁³, b·xᵢ₊₁³, u}`
    CubicMax { a: f64, b: f64 },
    /// `ẋᵢ = −decay·xᵢ + Σₖ cₖ·xᵢ₊ₖ + u`
    GenericBandedLinear { offsets: BTreeMap<i64, f64>, decay: f64 },
}

impl NetworkKind {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        let valid = match self {
            NetworkKind::LinearInvariant { a, b } | NetworkKind::CubicMax { a, b } => ok(*a) && ok(*b),
            NetworkKind::GenericBandedLinear { offsets, decay } => ok(*decay) && offsets.values().all(|c| ok(*c)),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::InvalidInput("network coefficients must be finite and >= 0".into()))
        }
    }

    /// Copy with the coupling pair replaced.
    pub fn with_pair(&self, a: f64, b: f64) -> Result<Self> {
        match self {
            NetworkKind::LinearInvariant { .. } => Ok(NetworkKind::LinearInvariant { a, b }),
            NetworkKind::CubicMax { .. } => Ok(NetworkKind::CubicMax { a, b }),
            NetworkKind::GenericBandedLinear { .. } => {
                Err(Error::UnsupportedStructure("threshold scans need a two-parameter network"))
            }
        }
    }

    /// Quantity whose position relative to 1 decides stability:
    /// `a + b` for the linear network, `max{a, b}` for the cubic one.
    pub fn threshold_key(&self) -> f64 {
        match self {
            NetworkKind::LinearInvariant { a, b } => a + b,
            NetworkKind::CubicMax { a, b } => a.max(*b),
            NetworkKind::GenericBandedLinear { offsets, decay } => offsets.values().sum::<f64>() / decay,
        }
    }

    fn rhs(&self, x: &[f64], u: f64, boundary: Boundary, out: &mut [f64]) {
        let n = x.len() as i64;
        let at = |i: i64| -> f64 {
            if (0..n).contains(&i) {
                x[i as usize]
            } else {
                match boundary {
                    Boundary::Periodic => x[i.rem_euclid(n) as usize],
                    Boundary::ZeroPad => 0.0,
                }
            }
        };
        for (i, o) in out.iter_mut().enumerate() {
            let i = i as i64;
            let xi = x[i as usize];
            *o = match self {
                NetworkKind::LinearInvariant { a, b } => a * at(i - 1) - xi + b * at(i + 1) + u,
                NetworkKind::CubicMax { a, b } => {
                    let (l, r) = (at(i - 1), at(i + 1));
                    -xi * xi * xi + (a * l * l * l).max(b * r * r * r).max(u)
                }
                NetworkKind::GenericBandedLinear { offsets, decay } => {
                    offsets.iter().map(|(k, c)| c * at(i + k)).sum::<f64>() - decay * xi + u
                }
            };
        }
    }
}

/// Scalar input applied at every node, piecewise constant in time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSignal {
    Constant { value: f64 },
    /// `(start time, value)` pairs in increasing time; the first value also
    /// applies before its start time.
    Table { steps: Vec<(f64, f64)> },
}

impl Default for InputSignal {
    fn default() -> Self {
        InputSignal::Constant { value: 0.0 }
    }
}

impl InputSignal {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            InputSignal::Constant { value } => *value,
            InputSignal::Table { steps } => {
                let k = steps.partition_point(|(s, _)| *s <= t);
                steps[k.saturating_sub(1)].1
            }
        }
    }

    /// `‖u‖∞`
    pub fn sup(&self) -> f64 {
        match self {
            InputSignal::Constant { value } => value.abs(),
            InputSignal::Table { steps } => steps.iter().map(|s| s.1.abs()).fold(0.0, f64::max),
        }
    }

    fn validate(&self) -> Result<()> {
        let values: Vec<f64> = match self {
            InputSignal::Constant { value } => vec![*value],
            InputSignal::Table { steps } => {
                if steps.is_empty() || steps.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    return Err(Error::InvalidInput("input table must be nonempty with increasing times".into()));
                }
                steps.iter().map(|s| s.1).collect()
            }
        };
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput("inputs must be finite and >= 0".into()));
        }
        Ok(())
    }
}

fn default_record_every() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeRun {
    pub kind: NetworkKind,
    #[serde(default)]
    pub boundary: Boundary,
    /// Initial state; its length is the window size.
    pub x0: Vec<f64>,
    #[serde(default)]
    pub input: InputSignal,
    pub dt: f64,
    pub t_end: f64,
    /// Store every `record_every`-th step (the last step is always stored).
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

impl OdeRun {
    /// Constant initial profile `x_star·𝟏` on `n` nodes of a ring, zero input.
    pub fn constant_profile(kind: NetworkKind, n: usize, x_star: f64, dt: f64, t_end: f64) -> Self {
        OdeRun {
            kind,
            boundary: Boundary::Periodic,
            x0: vec![x_star; n],
            input: InputSignal::default(),
            dt,
            t_end,
            record_every: default_record_every(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        self.input.validate()?;
        if self.x0.len() < 3 {
            return Err(Error::InvalidInput(format!("need at least 3 nodes, got {}", self.x0.len())));
        }
        if self.x0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput("initial state must be finite and >= 0".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidInput("dt must be positive and T finite and >= 0".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidInput("record_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
    /// `‖u‖∞` of the driving input.
    pub input_sup: f64,
    /// Time at which the sup norm passed the blow-up guard.
    pub escape_time: Option<f64>,
}

impl Trajectory {
    pub fn final_norm(&self) -> f64 {
        *self.norms.last().unwrap_or(&0.0)
    }

    pub fn initial_norm(&self) -> f64 {
        *self.norms.first().unwrap_or(&0.0)
    }
}

/// Integrates the run with RK4. A blow-up ends the run early and is
/// reported through `escape_time`.
pub fn simulate(run: &OdeRun) -> Result<Trajectory> {
    run.validate()?;
    let n = run.x0.len();
    let steps = libm::round(run.t_end / run.dt) as usize;
    let h = run.dt;
    let mut x = run.x0.clone();
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x.clone()],
        norms: vec![sup_norm(&x)],
        input_sup: run.input.sup(),
        escape_time: None,
    };
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for step in 0..steps {
        let t = step as f64 * h;
        let (u0, um, u1) = (run.input.at(t), run.input.at(t + 0.5 * h), run.input.at(t + h));
        run.kind.rhs(&x, u0, run.boundary, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        run.kind.rhs(&tmp, um, run.boundary, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        run.kind.rhs(&tmp, um, run.boundary, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        run.kind.rhs(&tmp, u1, run.boundary, &mut k4);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let norm = sup_norm(&x);
        let done = step + 1 == steps;
        let blown = !(norm < BLOW_UP);
        if done || blown || (step + 1) % run.record_every == 0 {
            traj.times.push((step + 1) as f64 * h);
            traj.states.push(x.clone());
            traj.norms.push(norm);
        }
        if blown {
            traj.escape_time = Some((step + 1) as f64 * h);
            break;
        }
    }
    Ok(traj)
}

/// Exact solution from the constant profile `x_star·𝟏` with zero input.
pub fn reference_profile(kind: &NetworkKind, x_star: f64, t: f64) -> Result<f64> {
    kind.validate()?;
    if !(x_star >= 0.0 && t >= 0.0) {
        return Err(Error::InvalidInput("reference needs x* >= 0 and t >= 0".into()));
    }
    match kind {
        NetworkKind::LinearInvariant { a, b } => Ok(x_star * math::exp((a + b - 1.0) * t)),
        NetworkKind::GenericBandedLinear { offsets, decay } => {
            Ok(x_star * math::exp((offsets.values().sum::<f64>() - decay) * t))
        }
        NetworkKind::CubicMax { a, b } => {
            let m = a.max(*b);
            if m > 1.0 {
                return Err(Error::UnsupportedReference(format!(
                    "max(a, b) = {m} > 1: the constant profile escapes in finite time"
                )));
            }
            Ok(x_star / math::sqrt(1.0 + 2.0 * (1.0 - m) * x_star * x_star * t))
        }
    }
}

/// `‖x(t)‖ ≤ β(‖x(0)‖, t) + γ(‖u‖∞)` fitted to a set of runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IssFit {
    pub beta: KlFunction,
    pub gamma: ComparisonFunction,
    /// Regressed decay rate and domination constant before inflation.
    pub lambda: f64,
    pub c: f64,
    /// Number of 5% inflations needed to cover every run.
    pub inflation_rounds: usize,
}

/// Slack allowed when validating a fitted envelope.
pub const FIT_SLACK: f64 = 1e-6;

/// Fits `β(r, t) = C·r·e^(−λt)` to the unforced runs and `γ` to the forced
/// runs started at zero, then inflates both until every run is covered.
///
/// Unforced runs give `λ` by least squares on `ln(‖x(t)‖/‖x(0)‖)` and `C` as
/// the smallest constant dominating them; forced runs give the points
/// `(‖u‖∞, sup_t ‖x(t)‖)` whose upper envelope is `γ`.
pub fn fit_iss_envelope(runs: &[Trajectory]) -> Result<IssFit> {
    if runs.is_empty() {
        return Err(Error::InvalidInput("no runs to fit".into()));
    }
    let decay: Vec<&Trajectory> = runs.iter().filter(|r| r.input_sup == 0.0 && r.initial_norm() > 0.0).collect();
    let (lambda, c) = if decay.is_empty() {
        (1.0, 0.0)
    } else {
        let mut pts = Vec::new();
        for r in &decay {
            let x0 = r.initial_norm();
            for (t, n) in r.times.iter().zip(&r.norms) {
                if *n > 0.0 {
                    pts.push((*t, math::ln(n / x0)));
                }
            }
        }
        let count = pts.len() as f64;
        let (mt, my) = (pts.iter().map(|p| p.0).sum::<f64>() / count, pts.iter().map(|p| p.1).sum::<f64>() / count);
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let lambda = if sxx > 0.0 { -sxy / sxx } else { 1.0 };
        if !(lambda > 0.0) {
            return Err(Error::InvalidInput(format!("unforced runs do not decay (fitted rate {lambda})")));
        }
        let c = decay
            .iter()
            .flat_map(|r| {
                let x0 = r.initial_norm();
                r.times.iter().zip(&r.norms).map(move |(t, n)| n / x0 * math::exp(lambda * t))
            })
            .fold(0.0, f64::max);
        (lambda, c)
    };
    let forced: Vec<(f64, f64)> = runs
        .iter()
        .filter(|r| r.initial_norm() == 0.0 && r.input_sup > 0.0)
        .map(|r| (r.input_sup, r.norms.iter().copied().fold(0.0, f64::max)))
        .collect();
    let gamma0 = upper_comparison(&forced);
    for round in 0..=20 {
        let k = math::powf(1.05, round as f64);
        let beta = KlFunction::exponential(c * k, lambda);
        let gamma = if round == 0 { gamma0.clone() } else { gamma0.clone().scaled(k) };
        if let Some(bad) = runs.iter().position(|r| !covers(r, &beta, &gamma)) {
            if round == 20 {
                return Err(Error::Budget(format!("run {bad} violates the fitted envelope after 20 inflations")));
            }
            continue;
        }
        return Ok(IssFit { beta, gamma, lambda, c, inflation_rounds: round });
    }
    unreachable!()
}

fn covers(run: &Trajectory, beta: &KlFunction, gamma: &ComparisonFunction) -> bool {
    let x0 = run.initial_norm();
    let g = gamma.value(run.input_sup);
    run.times
        .iter()
        .zip(&run.norms)
        .all(|(t, n)| *n <= beta.eval(x0, *t).unwrap_or(f64::INFINITY) + g + FIT_SLACK)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub a: f64,
    pub b: f64,
    /// `a + b` (linear) or `max{a, b}` (cubic).
    pub key: f64,
    pub initial_norm: f64,
    pub final_norm: f64,
    pub decays: bool,
    pub escape_time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub rows: Vec<ScanRow>,
    /// Largest key that decayed.
    pub last_decay: Option<f64>,
    /// Smallest key that did not.
    pub first_non_decay: Option<f64>,
    /// Every decaying key lies below every non-decaying one.
    pub monotone: bool,
}

/// Runs `template` for every `(a, b)` and classifies the run as decaying when
/// `‖x(T)‖ < 0.99·‖x(0)‖`.
pub fn threshold_scan(template: &OdeRun, grid: &[(f64, f64)]) -> Result<ThresholdTable> {
    let mut rows = Vec::with_capacity(grid.len());
    for &(a, b) in grid {
        let mut run = template.clone();
        run.kind = template.kind.with_pair(a, b)?;
        let traj = simulate(&run)?;
        let (x0, xt) = (traj.initial_norm(), traj.final_norm());
        rows.push(ScanRow {
            a,
            b,
            key: run.kind.threshold_key(),
            initial_norm: x0,
            final_norm: xt,
            decays: traj.escape_time.is_none() && xt < 0.99 * x0,
            escape_time: traj.escape_time,
        });
    }
    let last_decay = rows.iter().filter(|r| r.decays).map(|r| r.key).reduce(f64::max);
    let first_non_decay = rows.iter().filter(|r| !r.decays).map(|r| r.key).reduce(f64::min);
    let monotone = match (last_decay, first_non_decay) {
        (Some(d), Some(n)) => d < n,
        _ => true,
    };
    Ok(ThresholdTable { rows, last_decay, first_non_decay, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(a: f64, b: f64) -> NetworkKind {
        NetworkKind::LinearInvariant { a, b }
    }

    fn cubic(a: f64, b: f64) -> NetworkKind {
        NetworkKind::CubicMax { a, b }
    }

    #[test]
    fn linear_constant_profile() {
        let traj = simulate(&OdeRun::constant_profile(linear(0.4, 0.5), 64, 1.0, 1e-3, 10.0)).unwrap();
        assert!((traj.final_norm() - math::exp(-1.0)).abs() < 1e-4);
        assert!((*traj.times.last().unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_constant_profile() {
        let traj = simulate(&OdeRun::constant_profile(cubic(0.9, 0.5), 64, 1.0, 1e-3, 20.0)).unwrap();
        assert!((traj.final_norm() - 1.0 / math::sqrt(5.0)).abs() < 1e-4);
    }

    #[test]
    fn zero_is_an_equilibrium() {
        for kind in [linear(0.4, 0.5), cubic(0.9, 0.9), linear(2.0, 2.0)] {
            let traj = simulate(&OdeRun::constant_profile(kind, 8, 0.0, 1e-2, 5.0)).unwrap();
            assert!(traj.norms.iter().all(|&n| n == 0.0));
        }
    }

    #[test]
    fn reference_examples() {
        assert!((reference_profile(&linear(0.4, 0.5), 1.0, 10.0).unwrap() - 0.3678794).abs() < 1e-7);
        assert!((reference_profile(&cubic(0.9, 0.3), 1.0, 20.0).unwrap() - 0.4472136).abs() < 1e-7);
        assert_eq!(reference_profile(&cubic(1.0, 0.3), 2.0, 7.0).unwrap(), 2.0);
        for kind in [linear(0.3, 0.9), cubic(0.2, 0.4)] {
            assert_eq!(reference_profile(&kind, 1.7, 0.0).unwrap(), 1.7);
        }
        assert!(matches!(reference_profile(&cubic(1.1, 0.3), 1.0, 1.0), Err(Error::UnsupportedReference(_))));
    }

    #[test]
    fn blow_up_reports_escape_time() {
        let traj = simulate(&OdeRun::constant_profile(cubic(2.0, 2.0), 4, 1.0, 1e-3, 10.0)).unwrap();
        // ż = z³ from 1 escapes at t = 1/2.
        let t = traj.escape_time.unwrap();
        assert!((t - 0.5).abs() < 0.01, "{t}");
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |dt: f64| {
            let traj = simulate(&OdeRun::constant_profile(linear(0.4, 0.5), 8, 1.0, dt, 1.0)).unwrap();
            (traj.final_norm() - reference_profile(&linear(0.4, 0.5), 1.0, 1.0).unwrap()).abs()
        };
        assert!(err(0.1) / err(0.05) >= 8.0);
    }

    #[test]
    fn window_independence() {
        let small = simulate(&OdeRun::constant_profile(cubic(0.7, 0.4), 16, 1.3, 1e-2, 3.0)).unwrap();
        let large = simulate(&OdeRun::constant_profile(cubic(0.7, 0.4), 128, 1.3, 1e-2, 3.0)).unwrap();
        for (a, b) in small.norms.iter().zip(&large.norms) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn input_table_lookup() {
        let u = InputSignal::Table { steps: vec![(0.0, 1.0), (2.0, 0.5), (5.0, 0.0)] };
        assert_eq!((u.at(0.0), u.at(1.9), u.at(2.0), u.at(7.0)), (1.0, 1.0, 0.5, 0.0));
        assert_eq!(u.sup(), 1.0);
    }

    #[test]
    fn fit_linear_envelope() {
        let mut runs = Vec::new();
        for x in [0.5, 1.0, 2.0] {
            runs.push(simulate(&OdeRun::constant_profile(linear(0.4, 0.5), 8, x, 1e-2, 30.0)).unwrap());
        }
        let mut forced = OdeRun::constant_profile(linear(0.4, 0.5), 8, 0.0, 1e-2, 120.0);
        forced.input = InputSignal::Constant { value: 0.1 };
        let forced = simulate(&forced).unwrap();
        assert!((forced.final_norm() - 1.0).abs() < 0.01);
        runs.push(forced);
        let fit = fit_iss_envelope(&runs).unwrap();
        assert!((fit.lambda - 0.1).abs() < 0.01, "{}", fit.lambda);
        assert!(fit.c <= 1.05);
        assert!((fit.gamma.value(0.1) - 1.0).abs() < 0.01);
    }

    #[test]
    fn fit_all_zero_runs() {
        let runs = vec![simulate(&OdeRun::constant_profile(linear(0.4, 0.5), 4, 0.0, 1e-2, 1.0)).unwrap()];
        let fit = fit_iss_envelope(&runs).unwrap();
        assert_eq!(fit.beta, KlFunction::exponential(0.0, 1.0));
        assert_eq!(fit.gamma, ComparisonFunction::Zero);
    }

    #[test]
    fn threshold_examples() {
        let template = OdeRun::constant_profile(linear(0.0, 0.0), 8, 1.0, 1e-2, 10.0);
        let grid = [(0.4, 0.4), (0.45, 0.5), (0.5, 0.5), (0.5, 0.55), (0.0, 0.0)];
        let table = threshold_scan(&template, &grid).unwrap();
        let decays: Vec<bool> = table.rows.iter().map(|r| r.decays).collect();
        assert_eq!(decays, vec![true, true, false, false, true]);
        assert!(table.monotone);
        let template = OdeRun::constant_profile(cubic(0.0, 0.0), 8, 1.0, 1e-2, 20.0);
        let table = threshold_scan(&template, &[(0.9, 0.1), (1.0, 0.5), (1.1, 0.2), (0.0, 0.0)]).unwrap();
        let decays: Vec<bool> = table.rows.iter().map(|r| r.decays).collect();
        assert_eq!(decays, vec![true, false, false, true]);
        assert_eq!((table.last_decay, table.first_non_decay), (Some(0.9), Some(1.0)));
    }

    #[test]
    fn cubic_input_response_is_monotone() {
        let mut last = 0.0;
        for u in [0.05, 0.1, 0.2, 0.4] {
            let mut run = OdeRun::constant_profile(cubic(0.5, 0.3), 6, 0.0, 1e-2, 40.0);
            run.input = InputSignal::Constant { value: u };
            let n = simulate(&run).unwrap().final_norm();
            assert!(n > last);
            last = n;
        }
    }
}
