//! Small-gain hypothesis checks for a declared network and the resulting
//! stability gains.
//!
//! With linear gains the MBI and MLIM hypotheses reduce to the spectral
//! condition (cycle geometric means below 1 in max mode), which is decided
//! outright; otherwise they are probed and the verdict is evidence-grade.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::comparison::ComparisonFunction;
use crate::cone::{estimate_eta, expansive_vector, probe_mbi, DEFAULT_RADII};
use crate::discrete::{mlim_probe, MlimOptions, MlimReport};
use crate::network::{
    check_well_defined, AggregatedIssData, AggregationMode, Boundary, GainFamily, Transient, WellDefinednessReport,
};
use crate::operator::{BoundOperator, CycleReport, GainOperator, Layout, DEFAULT_K_MAX, DEFAULT_TOL};
use crate::{Error, Evidence, KlFunction, Result};

fn default_window() -> usize {
    201
}

/// Gain family, window for banded families, and declared subsystem data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub gains: GainFamily,
    /// Window size used to truncate banded families (odd, centered on 0).
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub boundary: Boundary,
    pub subsystems: AggregatedIssData,
}

impl NetworkSpec {
    /// Gain operator bound to its natural window or the truncation window.
    pub fn bind(&self) -> Result<BoundOperator> {
        let op = GainOperator::new(self.gains.clone())?;
        let layout = match op.natural_layout() {
            Some(layout) => layout,
            None => {
                if self.window == 0 || self.window.is_multiple_of(2) {
                    return Err(Error::InvalidInput(format!("window must be odd, got {}", self.window)));
                }
                Layout::centered(self.window / 2, self.boundary)
            }
        };
        op.bind(layout)
    }
}

/// `ẋᵢ = a·xᵢ₋₁ − xᵢ + b·xᵢ₊₁ + u` as a summation network with unit decay.
pub fn linear_chain_preset(a: f64, b: f64) -> NetworkSpec {
    let gains = GainFamily::banded(
        [(-1, ComparisonFunction::linear(a)), (1, ComparisonFunction::linear(b))],
        AggregationMode::Sum,
    );
    let transient = Transient::Kl { beta: KlFunction::exponential(1.0, 1.0) };
    NetworkSpec {
        gains,
        window: default_window(),
        boundary: Boundary::Periodic,
        subsystems: AggregatedIssData::uniform(transient, ComparisonFunction::identity()),
    }
}

/// `ẋᵢ = −xᵢ³ + max{a·xᵢ₋₁³, b·xᵢ₊₁³, u}` as a max network.
///
/// The Lyapunov estimate of each node gives the gains `((1+ε)a)^(1/3)` and
/// `((1+ε)b)^(1/3)` and the external gain `((1+ε)r)^(1/3)`.
pub fn cubic_max_preset(a: f64, b: f64, epsilon: f64) -> Result<NetworkSpec> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    let root = |v: f64| libm::cbrt((1.0 + epsilon) * v);
    let gains = GainFamily::banded(
        [(-1, ComparisonFunction::linear(root(a))), (1, ComparisonFunction::linear(root(b)))],
        AggregationMode::Max,
    );
    let transient = Transient::Uniform { sigma: ComparisonFunction::identity(), iss_declared: true };
    let external = ComparisonFunction::power(libm::cbrt(1.0 + epsilon), 1.0 / 3.0);
    Ok(NetworkSpec {
        gains,
        window: default_window(),
        boundary: Boundary::Periodic,
        subsystems: AggregatedIssData::uniform(transient, external),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub samples: usize,
    pub k_max: usize,
    pub seed: u64,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets { samples: 256, k_max: 100_000, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisChecks {
    pub well_defined: Evidence,
    pub envelopes: Evidence,
    pub mbi_evidence: Evidence,
    pub mlim_evidence: Evidence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conclusion {
    Iss,
    Ugs,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grade {
    /// Decided by the spectral criterion for linear gains.
    Criterion,
    /// Supported by sampling only.
    Evidence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallGainVerdict {
    pub checks: HypothesisChecks,
    pub conclusion: Conclusion,
    pub grade: Grade,
    /// Some hypothesis was falsified.
    pub counterevidence: bool,
    pub spectral_radius: Option<f64>,
    pub cycles: Option<CycleReport>,
    /// MBI gain used for synthesis.
    pub xi: Option<ComparisonFunction>,
    pub sigma: Option<ComparisonFunction>,
    pub gamma: Option<ComparisonFunction>,
    pub well_definedness: WellDefinednessReport,
    pub mlim: Option<MlimReport>,
}

/// `σ = ξ∘(2σ_max)` and `γ = ξ∘(2γ_max)`.
pub fn synthesize_ugs_gains(
    xi: &ComparisonFunction,
    sigma_max: &ComparisonFunction,
    gamma_max: &ComparisonFunction,
) -> (ComparisonFunction, ComparisonFunction) {
    let through = |f: &ComparisonFunction| {
        if f.is_zero() || xi.is_zero() {
            ComparisonFunction::Zero
        } else {
            xi.clone().after(f.clone().scaled(2.0))
        }
    };
    (through(sigma_max), through(gamma_max))
}

/// Spectral decision for linear gains: cycle means in finite max networks,
/// the Gelfand estimate otherwise.
fn linear_criterion(op: &BoundOperator) -> Result<(Evidence, f64, Option<CycleReport>)> {
    let est = op.spectral_radius(DEFAULT_TOL, DEFAULT_K_MAX)?;
    if op.mode() == AggregationMode::Max {
        match op.cycle_analysis() {
            Ok(report) => {
                let evidence = report.evidence.clone();
                return Ok((evidence, est.value, Some(report)));
            }
            Err(Error::UnsupportedStructure(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let evidence = if est.value < 1.0 {
        Evidence::Pass
    } else if est.lower_bound >= 1.0 - 1e-9 {
        Evidence::Falsified {
            witness: format!("spectral radius {} (lower bound {}) is not below 1", est.value, est.lower_bound),
        }
    } else {
        Evidence::Inconclusive {
            reason: format!("spectral radius bracket [{}, {}] straddles 1", est.lower_bound, est.value),
        }
    };
    Ok((evidence, est.value, None))
}

/// Checks the small-gain hypotheses and draws the UGS/ISS conclusion.
pub fn verify(spec: &NetworkSpec, budgets: &Budgets) -> Result<SmallGainVerdict> {
    let op = spec.bind()?;
    let well_definedness = check_well_defined(&spec.gains, &DEFAULT_RADII)?;
    let envelopes = spec.subsystems.check_domination(&DEFAULT_RADII)?;
    let w = alloc::vec![0.1; op.len()];
    let eps = [0.1, 0.01];
    let options = MlimOptions { initial: None, damped: 2, seed: budgets.seed };

    let (grade, mbi_evidence, mlim_evidence, spectral_radius, cycles, xi, mlim) = if op.is_linear() {
        let (criterion, r, cycles) = linear_criterion(&op)?;
        let mut xi = None;
        let mut mlim = None;
        if criterion.is_positive() {
            let bound = op.neumann_bound(budgets.k_max.max(1))?.bound;
            let f = ComparisonFunction::linear(bound);
            mlim = Some(mlim_probe(&op, &w, &f, &eps, budgets.k_max, &[], &options)?);
            xi = Some(f);
        }
        (Grade::Criterion, criterion.clone(), criterion, Some(r), cycles, xi, mlim)
    } else {
        let mbi = probe_mbi(&op, budgets.samples, budgets.seed)?;
        let eta = estimate_eta(&op, &DEFAULT_RADII, budgets.samples.max(op.len() + 2), budgets.seed)?;
        let mbi_evidence = if eta.evidence.is_falsified() { eta.evidence } else { mbi.evidence };
        let expansive: Vec<Vec<f64>> = expansive_vector(&op).into_iter().collect();
        let report = mlim_probe(&op, &w, &mbi.xi, &eps, budgets.k_max, &expansive, &options)?;
        let xi = mbi_evidence.is_positive().then_some(mbi.xi);
        (Grade::Evidence, mbi_evidence, report.evidence.clone(), None, None, xi, Some(report))
    };

    let checks = HypothesisChecks { well_defined: well_definedness.evidence.clone(), envelopes, mbi_evidence, mlim_evidence };
    let ugs = checks.well_defined.is_positive() && checks.envelopes.is_positive() && checks.mbi_evidence.is_positive();
    let conclusion = if ugs && checks.mlim_evidence.is_positive() && spec.subsystems.transient_max.is_iss() {
        Conclusion::Iss
    } else if ugs {
        Conclusion::Ugs
    } else {
        Conclusion::Inconclusive
    };
    let counterevidence = [&checks.well_defined, &checks.envelopes, &checks.mbi_evidence, &checks.mlim_evidence]
        .iter()
        .any(|e| e.is_falsified());
    let (sigma, gamma) = match (&xi, ugs) {
        (Some(xi), true) => {
            let (s, g) =
                synthesize_ugs_gains(xi, &spec.subsystems.transient_max.size(), &spec.subsystems.external_max);
            (Some(s), Some(g))
        }
        _ => (None, None),
    };
    Ok(SmallGainVerdict {
        checks,
        conclusion,
        grade,
        counterevidence,
        spectral_radius,
        cycles,
        xi,
        sigma,
        gamma,
        well_definedness,
        mlim,
    })
}

/// Short human-readable summary of a verdict.
pub fn describe(verdict: &SmallGainVerdict) -> String {
    let conclusion = match verdict.conclusion {
        Conclusion::Iss => "ISS",
        Conclusion::Ugs => "UGS",
        Conclusion::Inconclusive if verdict.counterevidence => "inconclusive (counterevidence)",
        Conclusion::Inconclusive => "inconclusive",
    };
    let grade = match verdict.grade {
        Grade::Criterion => "criterion",
        Grade::Evidence => "evidence",
    };
    format!("{conclusion} [{grade}-grade]")
}
