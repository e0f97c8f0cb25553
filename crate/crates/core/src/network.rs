//! Gain families and truncated state vectors.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::comparison::{ComparisonFunction, FnClass, KlFunction};
use crate::{Error, Evidence, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// Supremum over incoming gains.
    Max,
    /// Sum over incoming gains.
    Sum,
}

/// How a banded family looks up neighbors outside the window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Periodic,
    ZeroPad,
}

/// Square gain matrix; `entries[i][j]` is the gain from node `j` into node `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteGains {
    pub n: usize,
    pub entries: Vec<Vec<ComparisonFunction>>,
}

impl FiniteGains {
    /// Matrix of linear gains.
    pub fn linear(rows: &[&[f64]]) -> Self {
        let entries = rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&k| if k == 0.0 { ComparisonFunction::Zero } else { ComparisonFunction::linear(k) })
                    .collect()
            })
            .collect();
        FiniteGains { n: rows.len(), entries }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("finite gain matrix must have n >= 1".into()));
        }
        if self.entries.len() != self.n || self.entries.iter().any(|row| row.len() != self.n) {
            return Err(Error::InvalidInput(format!("finite gain matrix must be {0}x{0}", self.n)));
        }
        for (i, row) in self.entries.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                if i == j {
                    if !g.is_zero() {
                        return Err(Error::InvalidInput(format!("diagonal gain ({i}, {i}) must be zero")));
                    }
                    continue;
                }
                check_gain(g).map_err(|e| Error::InvalidInput(format!("gain ({i}, {j}): {e}")))?;
            }
        }
        Ok(())
    }
}

fn check_gain(g: &ComparisonFunction) -> Result<()> {
    g.validate()?;
    if g.class() == FnClass::Pd {
        return Err(Error::InvalidInput("gains must be class K or zero".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GainStructure {
    Finite(FiniteGains),
    /// Spatially invariant gains on ℤ: node `i` receives `offsets[d]` from node `i + d`.
    Banded { offsets: BTreeMap<i64, ComparisonFunction> },
    BlockDiagonal { blocks: Vec<FiniteGains> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainFamily {
    pub structure: GainStructure,
    pub mode: AggregationMode,
}

impl GainFamily {
    pub fn finite(gains: FiniteGains, mode: AggregationMode) -> Self {
        GainFamily { structure: GainStructure::Finite(gains), mode }
    }

    pub fn banded(offsets: impl IntoIterator<Item = (i64, ComparisonFunction)>, mode: AggregationMode) -> Self {
        GainFamily { structure: GainStructure::Banded { offsets: offsets.into_iter().collect() }, mode }
    }

    pub fn block_diagonal(blocks: Vec<FiniteGains>, mode: AggregationMode) -> Self {
        GainFamily { structure: GainStructure::BlockDiagonal { blocks }, mode }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.structure {
            GainStructure::Finite(f) => f.validate(),
            GainStructure::Banded { offsets } => {
                for (d, g) in offsets {
                    if *d == 0 {
                        return Err(Error::InvalidInput("offset 0 (self gain) is not allowed".into()));
                    }
                    check_gain(g).map_err(|e| Error::InvalidInput(format!("offset {d}: {e}")))?;
                }
                Ok(())
            }
            GainStructure::BlockDiagonal { blocks } => {
                if blocks.is_empty() {
                    return Err(Error::InvalidInput("block-diagonal family needs a block".into()));
                }
                blocks.iter().try_for_each(FiniteGains::validate)
            }
        }
    }

    /// Number of nodes for finite structures; `None` for banded families.
    pub fn natural_size(&self) -> Option<usize> {
        match &self.structure {
            GainStructure::Finite(f) => Some(f.n),
            GainStructure::Banded { .. } => None,
            GainStructure::BlockDiagonal { blocks } => Some(blocks.iter().map(|b| b.n).sum()),
        }
    }

    /// Distinct gain generators (off-diagonal entries, offsets).
    pub fn generators(&self) -> Vec<&ComparisonFunction> {
        let all: Vec<&ComparisonFunction> = match &self.structure {
            GainStructure::Finite(f) => f.entries.iter().flatten().collect(),
            GainStructure::Banded { offsets } => offsets.values().collect(),
            GainStructure::BlockDiagonal { blocks } => blocks.iter().flat_map(|b| b.entries.iter().flatten()).collect(),
        };
        let mut out: Vec<&ComparisonFunction> = Vec::new();
        for g in all {
            if !out.contains(&g) {
                out.push(g);
            }
        }
        out
    }

    /// Whether every gain is exactly linear.
    pub fn is_linear(&self) -> bool {
        self.generators().iter().all(|g| g.as_linear().is_some())
    }

    /// Largest aggregated row value at radius `r`: max over generators in max
    /// mode, max row sum in sum mode.
    fn aggregate_at(&self, r: f64) -> f64 {
        let row_sum = |row: &[ComparisonFunction]| row.iter().map(|g| g.value(r)).sum::<f64>();
        match (self.mode, &self.structure) {
            (AggregationMode::Max, _) => {
                self.generators().iter().map(|g| g.value(r)).fold(0.0, f64::max)
            }
            (AggregationMode::Sum, GainStructure::Finite(f)) => {
                f.entries.iter().map(|row| row_sum(row)).fold(0.0, f64::max)
            }
            (AggregationMode::Sum, GainStructure::Banded { offsets }) => {
                offsets.values().map(|g| g.value(r)).sum()
            }
            (AggregationMode::Sum, GainStructure::BlockDiagonal { blocks }) => blocks
                .iter()
                .flat_map(|b| b.entries.iter())
                .map(|row| row_sum(row))
                .fold(0.0, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WellDefinednessReport {
    pub mode: AggregationMode,
    pub radii: Vec<f64>,
    /// Max-mode sup over gains, or largest row sum in sum mode, per radius.
    pub values: Vec<f64>,
    pub evidence: Evidence,
}

/// Checks that the aggregated gains are finite on `radii`.
pub fn check_well_defined(family: &GainFamily, radii: &[f64]) -> Result<WellDefinednessReport> {
    family.validate()?;
    if radii.is_empty() {
        return Err(Error::InvalidInput("well-definedness check needs at least one radius".into()));
    }
    let values: Vec<f64> = radii.iter().map(|&r| family.aggregate_at(r)).collect();
    let evidence = match radii.iter().zip(&values).find(|(_, v)| !v.is_finite()) {
        Some((r, v)) => Evidence::Falsified { witness: format!("aggregated gain at r={r} is {v}") },
        None => Evidence::Supported { samples: radii.len() },
    };
    Ok(WellDefinednessReport { mode: family.mode, radii: radii.to_vec(), values, evidence })
}

/// Finite truncation of a nonnegative bounded sequence.
///
/// `window = (lo, hi)` is the inclusive index range; `values[k]` belongs to
/// index `lo + k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateVector {
    pub window: (i64, i64),
    #[serde(default)]
    pub boundary: Boundary,
    pub values: Vec<f64>,
}

impl StateVector {
    /// Vector on the window `[0, values.len())`.
    pub fn new(values: Vec<f64>) -> Self {
        let hi = values.len() as i64 - 1;
        StateVector { window: (0, hi), boundary: Boundary::Periodic, values }
    }

    pub fn constant(lo: i64, len: usize, value: f64, boundary: Boundary) -> Self {
        StateVector { window: (lo, lo + len as i64 - 1), boundary, values: alloc::vec![value; len] }
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        StateVector { window: self.window, boundary: self.boundary, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.window;
        if hi < lo || (hi - lo + 1) as usize != self.values.len() {
            return Err(Error::InvalidInput(format!(
                "window [{lo}, {hi}] does not match {} values",
                self.values.len()
            )));
        }
        if let Some((k, v)) = self.values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidInput(format!("component {} is {v}, must be finite and >= 0", lo + k as i64)));
        }
        Ok(())
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }
}

/// Max of the absolute values (0 for an empty slice).
pub fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Transient part of a subsystem estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Transient {
    /// ISS estimate `β(|x(0)|, t) + γ(‖u‖)`.
    Kl { beta: KlFunction },
    /// UGS estimate `σ(|x(0)|) + γ(‖u‖)`. `iss_declared` records that the
    /// subsystem is known to be ISS with an unspecified KL bound of size `σ`.
    Uniform {
        sigma: ComparisonFunction,
        #[serde(default)]
        iss_declared: bool,
    },
}

impl Transient {
    /// `r ↦ β(r, 0)` or `σ`.
    pub fn size(&self) -> ComparisonFunction {
        match self {
            Transient::Kl { beta: KlFunction::Exponential { c, .. } } => ComparisonFunction::linear(*c),
            Transient::Kl { beta: KlFunction::Product { g, .. } } => g.clone(),
            Transient::Uniform { sigma, .. } => sigma.clone(),
        }
    }

    /// Whether the estimate carries (or declares) KL decay.
    pub fn is_iss(&self) -> bool {
        match self {
            Transient::Kl { .. } => true,
            Transient::Uniform { iss_declared, .. } => *iss_declared,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Transient::Kl { beta } => beta.validate(),
            Transient::Uniform { sigma, .. } => sigma.validate(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemData {
    pub transient: Transient,
    pub external_gain: ComparisonFunction,
}

/// Subsystem estimates together with their uniform envelopes.
///
/// For banded families one entry describes every node; for finite families
/// there is either one shared entry or one per node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregatedIssData {
    pub subsystems: Vec<SubsystemData>,
    pub transient_max: Transient,
    pub external_max: ComparisonFunction,
}

impl AggregatedIssData {
    /// Every subsystem described by the envelopes themselves.
    pub fn uniform(transient: Transient, external_gain: ComparisonFunction) -> Self {
        AggregatedIssData {
            subsystems: alloc::vec![SubsystemData { transient: transient.clone(), external_gain: external_gain.clone() }],
            transient_max: transient,
            external_max: external_gain,
        }
    }

    /// Checks that the envelopes dominate every subsystem on `radii` (and on a
    /// few times for KL bounds).
    pub fn check_domination(&self, radii: &[f64]) -> Result<Evidence> {
        self.transient_max.validate()?;
        self.external_max.validate()?;
        let times = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0];
        let mut samples = 0;
        for (k, sub) in self.subsystems.iter().enumerate() {
            sub.transient.validate()?;
            sub.external_gain.validate()?;
            for &r in radii {
                let (g, g_max) = (sub.external_gain.value(r), self.external_max.value(r));
                samples += 1;
                if g > g_max * (1.0 + 1e-12) {
                    return Ok(Evidence::Falsified {
                        witness: format!("subsystem {k}: external gain {g} > envelope {g_max} at r={r}"),
                    });
                }
                match (&sub.transient, &self.transient_max) {
                    (Transient::Kl { beta }, Transient::Kl { beta: beta_max }) => {
                        for &t in &times {
                            let (b, b_max) = (beta.eval(r, t)?, beta_max.eval(r, t)?);
                            samples += 1;
                            if b > b_max * (1.0 + 1e-12) {
                                return Ok(Evidence::Falsified {
                                    witness: format!("subsystem {k}: beta({r}, {t}) = {b} > envelope {b_max}"),
                                });
                            }
                        }
                    }
                    (Transient::Uniform { sigma, .. }, Transient::Uniform { sigma: sigma_max, .. }) => {
                        let (s, s_max) = (sigma.value(r), sigma_max.value(r));
                        samples += 1;
                        if s > s_max * (1.0 + 1e-12) {
                            return Ok(Evidence::Falsified {
                                witness: format!("subsystem {k}: sigma({r}) = {s} > envelope {s_max}"),
                            });
                        }
                    }
                    _ => {
                        return Err(Error::InvalidInput(String::from(
                            "subsystem transients and envelope must both be KL or both uniform",
                        )))
                    }
                }
            }
        }
        Ok(Evidence::Supported { samples })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn two_by_two(mode: AggregationMode) -> GainFamily {
        GainFamily::finite(FiniteGains::linear(&[&[0.0, 0.5], &[0.25, 0.0]]), mode)
    }

    #[test]
    fn well_defined_banded_sum() {
        let family = GainFamily::banded(
            [(-1, ComparisonFunction::linear(0.4)), (1, ComparisonFunction::linear(0.5))],
            AggregationMode::Sum,
        );
        let report = check_well_defined(&family, &[1.0]).unwrap();
        assert!((report.values[0] - 0.9).abs() < 1e-15);
        assert!(report.evidence.is_positive());
    }

    #[test]
    fn well_defined_finite_max() {
        let report = check_well_defined(&two_by_two(AggregationMode::Max), &[2.0]).unwrap();
        assert_eq!(report.values, vec![1.0]);
        assert!(report.evidence.is_positive());
    }

    #[test]
    fn well_defined_zero_family() {
        let family = GainFamily::finite(FiniteGains::linear(&[&[0.0, 0.0], &[0.0, 0.0]]), AggregationMode::Max);
        let report = check_well_defined(&family, &[0.1, 1.0, 10.0]).unwrap();
        assert_eq!(report.values, vec![0.0; 3]);
        assert!(report.evidence.is_positive());
    }

    #[test]
    fn well_defined_flags_unbounded_inverse() {
        // The inverse of a saturating gain is infinite beyond the saturation level.
        let g = ComparisonFunction::inverse(ComparisonFunction::saturating(1.0, 1.0));
        let family = GainFamily::banded([(1, g)], AggregationMode::Max);
        let report = check_well_defined(&family, &[0.5, 2.0]).unwrap();
        assert!(report.evidence.is_falsified());
    }

    #[test]
    fn structural_checks() {
        let mut bad = FiniteGains::linear(&[&[0.0, 0.5], &[0.25, 0.0]]);
        bad.entries[0][0] = ComparisonFunction::linear(0.1);
        assert!(GainFamily::finite(bad, AggregationMode::Max).validate().is_err());
        let zero_offset = GainFamily::banded([(0, ComparisonFunction::linear(0.1))], AggregationMode::Sum);
        assert!(zero_offset.validate().is_err());
        let ragged = FiniteGains { n: 2, entries: vec![vec![ComparisonFunction::Zero]] };
        assert!(GainFamily::finite(ragged, AggregationMode::Sum).validate().is_err());
    }

    #[test]
    fn sup_norm_examples() {
        assert_eq!(StateVector::new(vec![1.0, 2.0, 0.5]).sup_norm(), 2.0);
        assert_eq!(StateVector::new(vec![0.0; 4]).sup_norm(), 0.0);
        assert_eq!(StateVector::constant(-100, 201, 1.0, Boundary::Periodic).sup_norm(), 1.0);
    }

    #[test]
    fn state_vector_validation() {
        assert!(StateVector::new(vec![1.0, -0.5]).validate().is_err());
        let mut v = StateVector::new(vec![1.0, 2.0]);
        v.window = (0, 5);
        assert!(v.validate().is_err());
    }

    #[test]
    fn domination_check() {
        let data = AggregatedIssData {
            subsystems: vec![SubsystemData {
                transient: Transient::Kl { beta: KlFunction::exponential(1.0, 1.0) },
                external_gain: ComparisonFunction::linear(0.5),
            }],
            transient_max: Transient::Kl { beta: KlFunction::exponential(1.0, 1.0) },
            external_max: ComparisonFunction::identity(),
        };
        assert!(data.check_domination(&[0.1, 1.0, 10.0]).unwrap().is_positive());
        let mut worse = data.clone();
        worse.subsystems[0].external_gain = ComparisonFunction::linear(2.0);
        assert!(worse.check_domination(&[1.0]).unwrap().is_falsified());
    }
}
