//! Comparison functions.
//!
//! A [`ComparisonFunction`] is an expression tree over a handful of parametric
//! leaves. Class membership (K, K∞, PD) is inferred structurally by
//! [`ComparisonFunction::class`] and can be checked by sampling with
//! [`ComparisonFunction::validate_class`]; it is never proven symbolically.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// Relative width at which inverse bisection stops.
const INVERSE_REL_TOL: f64 = 1e-12;
/// Upper limit for the doubling search of an inverse bracket.
const INVERSE_R_MAX: f64 = 1e300;
/// Points of the geometric grid used by the Lipschitz envelope.
const ENVELOPE_GRID: usize = 10_000;
/// Golden-section refinements after the grid search.
const ENVELOPE_GOLDEN_STEPS: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FnClass {
    /// The zero function.
    Zero,
    /// Continuous, zero at zero, positive elsewhere.
    Pd,
    /// PD and strictly increasing.
    K,
    /// K and unbounded.
    KInf,
}

impl FnClass {
    pub fn is_strictly_increasing(self) -> bool {
        matches!(self, FnClass::K | FnClass::KInf)
    }
}

/// Expression tree of a comparison function `[0, ∞) → [0, ∞)`.
///
/// The JSON form is internally tagged by `"kind"`, e.g.
/// `{"kind":"linear","k":0.5}` or
/// `{"kind":"compose","outer":{...},"inner":{...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComparisonFunction {
    Zero,
    Identity,
    /// `r ↦ k·r`
    Linear { k: f64 },
    /// `r ↦ c·r^p`
    Power { c: f64, p: f64 },
    /// `r ↦ c·r/(r + θ)`
    Saturating { c: f64, theta: f64 },
    /// Linear interpolation through the origin and `points`, extended past the
    /// last knot with the last slope. Knots must be strictly increasing in both
    /// coordinates.
    PiecewiseLinear { points: Vec<(f64, f64)> },
    /// `outer ∘ inner`
    Compose { outer: Box<ComparisonFunction>, inner: Box<ComparisonFunction> },
    Sum { terms: Vec<ComparisonFunction> },
    Max { terms: Vec<ComparisonFunction> },
    Min { terms: Vec<ComparisonFunction> },
    /// `r ↦ r − η(r)`; the caller asserts that this is K∞.
    IdMinus { eta: Box<ComparisonFunction> },
    /// Inverse of a strictly increasing function, by bisection.
    Inverse { of: Box<ComparisonFunction> },
    /// `r ↦ inf_{y ≥ 0} α(y) + L·|y − r|`
    LipschitzEnvelope { alpha: Box<ComparisonFunction>, l: f64 },
}

use ComparisonFunction as Cf;

impl ComparisonFunction {
    pub fn zero() -> Self {
        Cf::Zero
    }

    pub fn identity() -> Self {
        Cf::Identity
    }

    pub fn linear(k: f64) -> Self {
        Cf::Linear { k }
    }

    pub fn power(c: f64, p: f64) -> Self {
        Cf::Power { c, p }
    }

    pub fn saturating(c: f64, theta: f64) -> Self {
        Cf::Saturating { c, theta }
    }

    pub fn piecewise_linear(points: Vec<(f64, f64)>) -> Self {
        Cf::PiecewiseLinear { points }
    }

    pub fn compose(outer: Self, inner: Self) -> Self {
        Cf::Compose { outer: Box::new(outer), inner: Box::new(inner) }
    }

    pub fn sum(terms: Vec<Self>) -> Self {
        Cf::Sum { terms }
    }

    pub fn max(terms: Vec<Self>) -> Self {
        Cf::Max { terms }
    }

    pub fn min(terms: Vec<Self>) -> Self {
        Cf::Min { terms }
    }

    pub fn id_minus(eta: Self) -> Self {
        Cf::IdMinus { eta: Box::new(eta) }
    }

    pub fn inverse(of: Self) -> Self {
        Cf::Inverse { of: Box::new(of) }
    }

    /// `self ∘ inner`
    pub fn after(self, inner: Self) -> Self {
        Self::compose(self, inner)
    }

    /// `k·self`
    pub fn scaled(self, k: f64) -> Self {
        Self::compose(Cf::Linear { k }, self)
    }

    pub fn is_zero(&self) -> bool {
        self.class() == FnClass::Zero
    }

    /// Checks leaf parameters and node arities.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidInput(msg));
        match self {
            Cf::Zero | Cf::Identity => Ok(()),
            Cf::Linear { k } => {
                if !(k.is_finite() && *k >= 0.0) {
                    return bad(format!("linear gain k={k} must be finite and >= 0"));
                }
                Ok(())
            }
            Cf::Power { c, p } => {
                if !(c.is_finite() && *c >= 0.0 && p.is_finite() && *p > 0.0) {
                    return bad(format!("power leaf needs c >= 0 and p > 0, got c={c}, p={p}"));
                }
                Ok(())
            }
            Cf::Saturating { c, theta } => {
                if !(c.is_finite() && *c >= 0.0 && theta.is_finite() && *theta > 0.0) {
                    return bad(format!(
                        "saturating leaf needs c >= 0 and theta > 0, got c={c}, theta={theta}"
                    ));
                }
                Ok(())
            }
            Cf::PiecewiseLinear { points } => {
                if points.is_empty() {
                    return bad("piecewise_linear needs at least one knot".into());
                }
                let mut prev = (0.0, 0.0);
                for &(x, y) in points {
                    if !(x.is_finite() && y.is_finite() && x > prev.0 && y > prev.1) {
                        return bad(format!(
                            "piecewise_linear knots must be strictly increasing from the origin, got ({x}, {y}) after ({}, {})",
                            prev.0, prev.1
                        ));
                    }
                    prev = (x, y);
                }
                Ok(())
            }
            Cf::Compose { outer, inner } => {
                outer.validate()?;
                inner.validate()
            }
            Cf::Sum { terms } | Cf::Max { terms } | Cf::Min { terms } => {
                if terms.is_empty() {
                    return bad("sum/max/min node needs at least one term".into());
                }
                terms.iter().try_for_each(Self::validate)
            }
            Cf::IdMinus { eta } => {
                eta.validate()?;
                if eta.class() == FnClass::Pd {
                    return bad("id - eta needs eta in K or K-infinity".into());
                }
                Ok(())
            }
            Cf::Inverse { of } => {
                of.validate()?;
                if !of.class().is_strictly_increasing() {
                    return bad("inverse wraps only strictly increasing functions".into());
                }
                Ok(())
            }
            Cf::LipschitzEnvelope { alpha, l } => {
                alpha.validate()?;
                if !(l.is_finite() && *l > 0.0) {
                    return bad(format!("Lipschitz constant must be positive, got {l}"));
                }
                Ok(())
            }
        }
    }

    /// Structurally inferred class. `IdMinus` nodes are taken at their asserted
    /// class K∞.
    pub fn class(&self) -> FnClass {
        match self {
            Cf::Zero => FnClass::Zero,
            Cf::Identity | Cf::PiecewiseLinear { .. } => FnClass::KInf,
            Cf::Linear { k } => nonzero(*k, FnClass::KInf),
            Cf::Power { c, .. } => nonzero(*c, FnClass::KInf),
            Cf::Saturating { c, .. } => nonzero(*c, FnClass::K),
            Cf::Compose { outer, inner } => match (outer.class(), inner.class()) {
                (FnClass::Zero, _) | (_, FnClass::Zero) => FnClass::Zero,
                (FnClass::KInf, FnClass::KInf) => FnClass::KInf,
                (a, b) if a.is_strictly_increasing() && b.is_strictly_increasing() => FnClass::K,
                _ => FnClass::Pd,
            },
            Cf::Sum { terms } | Cf::Max { terms } => {
                let mut acc = FnClass::Zero;
                for c in terms.iter().map(Self::class) {
                    acc = match (acc, c) {
                        (a, FnClass::Zero) => a,
                        (FnClass::Zero, b) => b,
                        (FnClass::Pd, _) | (_, FnClass::Pd) => FnClass::Pd,
                        (FnClass::KInf, _) | (_, FnClass::KInf) => FnClass::KInf,
                        _ => FnClass::K,
                    };
                }
                acc
            }
            Cf::Min { terms } => {
                let mut classes = terms.iter().map(Self::class);
                let first = classes.next().unwrap_or(FnClass::Zero);
                classes.fold(first, |acc, c| match (acc, c) {
                    (FnClass::Zero, _) | (_, FnClass::Zero) => FnClass::Zero,
                    (FnClass::Pd, _) | (_, FnClass::Pd) => FnClass::Pd,
                    (FnClass::KInf, FnClass::KInf) => FnClass::KInf,
                    _ => FnClass::K,
                })
            }
            Cf::IdMinus { .. } => FnClass::KInf,
            Cf::Inverse { of } => match of.class() {
                FnClass::KInf => FnClass::KInf,
                FnClass::K => FnClass::K,
                _ => FnClass::Pd,
            },
            Cf::LipschitzEnvelope { alpha, .. } => alpha.class(),
        }
    }

    /// `Some(k)` when the tree is exactly `r ↦ k·r`.
    pub fn as_linear(&self) -> Option<f64> {
        match self {
            Cf::Zero => Some(0.0),
            Cf::Identity => Some(1.0),
            Cf::Linear { k } => Some(*k),
            Cf::Power { c, p } if *p == 1.0 || *c == 0.0 => Some(*c),
            Cf::Saturating { c, .. } if *c == 0.0 => Some(0.0),
            Cf::Compose { outer, inner } => Some(outer.as_linear()? * inner.as_linear()?),
            Cf::Sum { terms } => terms.iter().map(Self::as_linear).sum(),
            Cf::Max { terms } => {
                let ks = terms.iter().map(Self::as_linear).collect::<Option<Vec<_>>>()?;
                ks.into_iter().reduce(f64::max)
            }
            Cf::Min { terms } => {
                let ks = terms.iter().map(Self::as_linear).collect::<Option<Vec<_>>>()?;
                ks.into_iter().reduce(f64::min)
            }
            Cf::IdMinus { eta } => Some(1.0 - eta.as_linear()?),
            Cf::Inverse { of } => match of.as_linear()? {
                k if k > 0.0 => Some(1.0 / k),
                _ => None,
            },
            Cf::LipschitzEnvelope { alpha, l } => Some(alpha.as_linear()?.min(*l)),
            _ => None,
        }
    }

    /// Evaluates the tree at `r >= 0`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::InvalidInput(format!("comparison functions take r >= 0, got {r}")));
        }
        self.eval_unchecked(r)
    }

    /// Like [`eval`](Self::eval) but maps range errors to `+∞`.
    ///
    /// Operators use this so that an unbounded gain shows up as a non-finite
    /// component instead of aborting the evaluation.
    pub fn value(&self, r: f64) -> f64 {
        self.eval(r).unwrap_or(f64::INFINITY)
    }

    fn eval_unchecked(&self, r: f64) -> Result<f64> {
        Ok(match self {
            Cf::Zero => 0.0,
            Cf::Identity => r,
            Cf::Linear { k } => k * r,
            Cf::Power { c, p } => c * math::powf(r, *p),
            Cf::Saturating { c, theta } => c * r / (r + theta),
            Cf::PiecewiseLinear { points } => eval_piecewise(points, r),
            Cf::Compose { outer, inner } => outer.eval_unchecked(inner.eval_unchecked(r)?.max(0.0))?,
            Cf::Sum { terms } => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.eval_unchecked(r)?;
                }
                acc
            }
            Cf::Max { terms } => {
                let mut acc = f64::NEG_INFINITY;
                for t in terms {
                    acc = acc.max(t.eval_unchecked(r)?);
                }
                acc
            }
            Cf::Min { terms } => {
                let mut acc = f64::INFINITY;
                for t in terms {
                    acc = acc.min(t.eval_unchecked(r)?);
                }
                acc
            }
            Cf::IdMinus { eta } => r - eta.eval_unchecked(r)?,
            Cf::Inverse { of } => invert(of, r)?,
            Cf::LipschitzEnvelope { alpha, l } => lipschitz_envelope_at(alpha, *l, r)?,
        })
    }

    /// Sampled class check.
    ///
    /// `grid` lists the radii to sample (zero is always added); `witnesses`
    /// are `(R, B)` pairs that must satisfy `f(R) > B` for class K∞.
    pub fn validate_class(&self, class: FnClass, grid: &[f64], witnesses: &[(f64, f64)]) -> Result<()> {
        let mut radii: Vec<f64> = grid.iter().copied().filter(|r| *r > 0.0).collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        let f0 = self.eval(0.0)?;
        let fail = |msg: alloc::string::String| Err(Error::InvalidInput(msg));
        if class == FnClass::Zero {
            for &r in &radii {
                let v = self.eval(r)?;
                if v != 0.0 {
                    return fail(format!("expected zero function, f({r}) = {v}"));
                }
            }
            return Ok(());
        }
        if f0 != 0.0 {
            return fail(format!("f(0) = {f0}, expected 0"));
        }
        let mut prev = (0.0, 0.0);
        for &r in &radii {
            let v = self.eval(r)?;
            if !(v > 0.0) {
                return fail(format!("f({r}) = {v} is not positive"));
            }
            if class.is_strictly_increasing() && !(v > prev.1) {
                return fail(format!(
                    "not strictly increasing: f({}) = {} >= f({r}) = {v}",
                    prev.0, prev.1
                ));
            }
            prev = (r, v);
        }
        if class == FnClass::KInf {
            for &(big_r, bound) in witnesses {
                let v = self.eval(big_r)?;
                if !(v > bound) {
                    return fail(format!("growth witness failed: f({big_r}) = {v} <= {bound}"));
                }
            }
        }
        Ok(())
    }
}

fn nonzero(coef: f64, class: FnClass) -> FnClass {
    if coef > 0.0 {
        class
    } else {
        FnClass::Zero
    }
}

fn eval_piecewise(points: &[(f64, f64)], r: f64) -> f64 {
    let mut prev = (0.0, 0.0);
    for &(x, y) in points {
        if r <= x {
            return prev.1 + (y - prev.1) * (r - prev.0) / (x - prev.0);
        }
        prev = (x, y);
    }
    let n = points.len();
    let before = if n >= 2 { points[n - 2] } else { (0.0, 0.0) };
    let slope = (prev.1 - before.1) / (prev.0 - before.0);
    prev.1 + slope * (r - prev.0)
}

fn invert(f: &ComparisonFunction, target: f64) -> Result<f64> {
    if target == 0.0 {
        return Ok(0.0);
    }
    if let Some(k) = f.as_linear() {
        if k > 0.0 {
            return Ok(target / k);
        }
    }
    if let Cf::Power { c, p } = f {
        if *c > 0.0 {
            return Ok(math::powf(target / c, 1.0 / p));
        }
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while f.eval_unchecked(hi)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > INVERSE_R_MAX {
            return Err(Error::Range { target, searched_to: INVERSE_R_MAX });
        }
    }
    for _ in 0..4096 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= INVERSE_REL_TOL * hi {
            break;
        }
        if f.eval_unchecked(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Grid-plus-refinement evaluation of `inf_{y≥0} α(y) + L|y − r|`.
///
/// Minimizers lie in `[0, r + α(r)/L]`: beyond that the penalty alone exceeds
/// the value at `y = r`.
fn lipschitz_envelope_at(alpha: &ComparisonFunction, l: f64, r: f64) -> Result<f64> {
    if let Some(k) = alpha.as_linear() {
        return Ok(k.min(l) * r);
    }
    let alpha_r = alpha.eval_unchecked(r)?;
    if alpha_r <= 0.0 {
        return Ok(0.0);
    }
    let objective = |y: f64| -> Result<f64> { Ok(alpha.eval_unchecked(y)? + l * (y - r).abs()) };
    let y_max = r + alpha_r / l;
    let mut best = alpha_r.min(objective(0.0)?);
    let ratio = math::powf(1e12, 1.0 / (ENVELOPE_GRID - 1) as f64);
    let mut ys = Vec::with_capacity(ENVELOPE_GRID);
    let mut y = y_max * 1e-12;
    for _ in 0..ENVELOPE_GRID {
        ys.push(y.min(y_max));
        y *= ratio;
    }
    let mut best_idx = None;
    for (i, &y) in ys.iter().enumerate() {
        let v = objective(y)?;
        if v < best {
            best = v;
            best_idx = Some(i);
        }
    }
    if let Some(i) = best_idx {
        let mut a = if i > 0 { ys[i - 1] } else { 0.0 };
        let mut b = ys.get(i + 1).copied().unwrap_or(y_max);
        let phi = 0.5 * (math::sqrt(5.0) - 1.0);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (objective(c)?, objective(d)?);
        for _ in 0..ENVELOPE_GOLDEN_STEPS {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = objective(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = objective(d)?;
            }
        }
        best = best.min(fc).min(fd);
    }
    Ok(best.max(0.0))
}

/// Log grid on `[1e-6, 1e6]` used for sampled functional identities.
pub fn default_grid() -> Vec<f64> {
    math::log_grid(1e-6, 1e6, 241)
}

fn check_id_minus(eta: &ComparisonFunction) -> Result<()> {
    eta.validate()?;
    let id_minus = Cf::id_minus(eta.clone());
    let e0 = eta.eval(0.0)?;
    if e0 != 0.0 {
        return Err(Error::InvalidInput(format!("eta(0) = {e0}, expected 0")));
    }
    let mut prev = (0.0, 0.0);
    for r in default_grid() {
        let v = id_minus.eval(r)?;
        if !(v > prev.1) {
            return Err(Error::InvalidInput(format!(
                "id - eta is not strictly increasing: ({}, {}) then ({r}, {v})",
                prev.0, prev.1
            )));
        }
        prev = (r, v);
    }
    Ok(())
}

/// `ρ = η ∘ (id − η)⁻¹`, so that `(id + ρ) ∘ (id − η) = id`.
pub fn rho_from_eta(eta: &ComparisonFunction) -> Result<ComparisonFunction> {
    check_id_minus(eta)?;
    if eta.is_zero() {
        return Ok(Cf::Zero);
    }
    Ok(Cf::compose(eta.clone(), Cf::inverse(Cf::id_minus(eta.clone()))))
}

/// Splits `id − η = (id − η₁) ∘ (id − η₂)` with `η₂ = η/2` and
/// `η₁ = η₂ ∘ (id − η₂)⁻¹`.
pub fn split_id_minus_eta(eta: &ComparisonFunction) -> Result<(ComparisonFunction, ComparisonFunction)> {
    check_id_minus(eta)?;
    if eta.is_zero() {
        return Ok((Cf::Zero, Cf::Zero));
    }
    let eta2 = eta.clone().scaled(0.5);
    let eta1 = Cf::compose(eta2.clone(), Cf::inverse(Cf::id_minus(eta2.clone())));
    Ok((eta1, eta2))
}

/// Largest `L`-Lipschitz minorant of `α`.
pub fn lipschitz_lower_envelope(alpha: &ComparisonFunction, l: f64) -> Result<ComparisonFunction> {
    alpha.validate()?;
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::InvalidInput(format!("Lipschitz constant must be positive, got {l}")));
    }
    if alpha.is_zero() {
        return Ok(Cf::Zero);
    }
    Ok(Cf::LipschitzEnvelope { alpha: Box::new(alpha.clone()), l })
}

/// Class-KL function with exponential time dependence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KlFunction {
    /// `β(r, t) = c·r·e^(−λt)`
    Exponential { c: f64, lambda: f64 },
    /// `β(r, t) = g(r)·e^(−λt)`
    Product { g: ComparisonFunction, lambda: f64 },
}

impl KlFunction {
    pub fn exponential(c: f64, lambda: f64) -> Self {
        KlFunction::Exponential { c, lambda }
    }

    pub fn eval(&self, r: f64, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::InvalidInput(format!("KL functions take t >= 0, got {t}")));
        }
        match self {
            KlFunction::Exponential { c, lambda } => {
                if !(r >= 0.0) {
                    return Err(Error::InvalidInput(format!("KL functions take r >= 0, got {r}")));
                }
                Ok(c * r * math::exp(-lambda * t))
            }
            KlFunction::Product { g, lambda } => Ok(g.eval(r)? * math::exp(-lambda * t)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lambda = match self {
            KlFunction::Exponential { c, lambda } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(Error::InvalidInput(format!("KL constant c={c} must be >= 0")));
                }
                *lambda
            }
            KlFunction::Product { g, lambda } => {
                g.validate()?;
                *lambda
            }
        };
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidInput(format!("KL rate lambda={lambda} must be > 0")));
        }
        Ok(())
    }

    /// `k·β`
    pub fn scaled(&self, k: f64) -> Self {
        match self {
            KlFunction::Exponential { c, lambda } => KlFunction::Exponential { c: c * k, lambda: *lambda },
            KlFunction::Product { g, lambda } => KlFunction::Product { g: g.clone().scaled(k), lambda: *lambda },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn leaf_examples() {
        assert_eq!(Cf::linear(0.5).eval(2.0).unwrap(), 1.0);
        assert_eq!(Cf::power(1.0, 3.0).eval(0.5).unwrap(), 0.125);
        assert_eq!(Cf::inverse(Cf::linear(2.0)).eval(3.0).unwrap(), 1.5);
        assert_eq!(Cf::saturating(2.0, 1.0).eval(1.0).unwrap(), 1.0);
    }

    #[test]
    fn negative_argument_is_rejected() {
        assert!(matches!(Cf::identity().eval(-1.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn inverse_of_saturating_reports_range_error() {
        // sup of 2r/(r+1) is 2, so 3 has no preimage.
        let f = Cf::inverse(Cf::saturating(2.0, 1.0));
        assert!(matches!(f.eval(3.0), Err(Error::Range { .. })));
        assert_eq!(f.value(3.0), f64::INFINITY);
        let x = f.eval(1.5).unwrap();
        assert!(close(Cf::saturating(2.0, 1.0).eval(x).unwrap(), 1.5, 1e-10));
    }

    #[test]
    fn inverse_round_trip_nonlinear() {
        let f = Cf::sum(vec![Cf::power(0.3, 2.0), Cf::saturating(1.0, 2.0), Cf::linear(0.1)]);
        let inv = Cf::inverse(f.clone());
        for r in math::log_grid(1e-4, 1e4, 50) {
            let back = inv.eval(f.eval(r).unwrap()).unwrap();
            assert!(close(back, r, 1e-10), "r={r} back={back}");
        }
    }

    #[test]
    fn piecewise_linear_interpolates_and_extends() {
        let f = Cf::piecewise_linear(vec![(1.0, 2.0), (3.0, 3.0)]);
        f.validate().unwrap();
        assert_eq!(f.eval(0.5).unwrap(), 1.0);
        assert_eq!(f.eval(2.0).unwrap(), 2.5);
        assert_eq!(f.eval(5.0).unwrap(), 4.0);
        assert!(Cf::piecewise_linear(vec![(1.0, 2.0), (2.0, 2.0)]).validate().is_err());
    }

    #[test]
    fn class_inference() {
        assert_eq!(Cf::linear(0.0).class(), FnClass::Zero);
        assert_eq!(Cf::saturating(1.0, 1.0).class(), FnClass::K);
        assert_eq!(Cf::max(vec![Cf::saturating(1.0, 1.0), Cf::linear(0.1)]).class(), FnClass::KInf);
        assert_eq!(Cf::min(vec![Cf::saturating(1.0, 1.0), Cf::linear(0.1)]).class(), FnClass::K);
        assert_eq!(Cf::compose(Cf::power(1.0, 2.0), Cf::saturating(1.0, 1.0)).class(), FnClass::K);
        assert!(Cf::inverse(Cf::Zero).validate().is_err());
    }

    #[test]
    fn validate_class_catches_violations() {
        let grid = math::log_grid(1e-3, 1e3, 50);
        Cf::power(2.0, 0.5).validate_class(FnClass::KInf, &grid, &[(1e6, 100.0)]).unwrap();
        assert!(Cf::saturating(1.0, 1.0).validate_class(FnClass::KInf, &grid, &[(1e9, 2.0)]).is_err());
        // r - 2r is decreasing
        assert!(Cf::id_minus(Cf::linear(2.0)).validate_class(FnClass::K, &grid, &[]).is_err());
    }

    #[test]
    fn rho_from_eta_examples() {
        let rho = rho_from_eta(&Cf::linear(0.5)).unwrap();
        for r in [0.1, 1.0, 7.0] {
            assert!(close(rho.eval(r).unwrap(), r, 1e-15));
        }
        // (1 + c)(1 - 0.25) = 1  =>  c = 1/3
        let rho = rho_from_eta(&Cf::linear(0.25)).unwrap();
        assert!(close(rho.eval(3.0).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn rho_from_eta_rejects_non_monotone_id_minus() {
        assert!(matches!(rho_from_eta(&Cf::linear(1.5)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rho_identity_nonlinear() {
        // eta(r) = r^2/(1+r)/2 keeps id - eta strictly increasing.
        let eta = Cf::min(vec![Cf::saturating(0.5, 1.0), Cf::linear(0.4)]);
        let rho = rho_from_eta(&eta).unwrap();
        let id_plus_rho = Cf::sum(vec![Cf::identity(), rho]);
        let round_trip = Cf::compose(id_plus_rho, Cf::id_minus(eta));
        for r in default_grid() {
            let v = round_trip.eval(r).unwrap();
            assert!(close(v, r, 1e-9), "r={r} v={v}");
        }
    }

    #[test]
    fn split_examples() {
        // (1 - c)(1 - 0.25) = 0.5  =>  c = 1/3
        let (eta1, eta2) = split_id_minus_eta(&Cf::linear(0.5)).unwrap();
        assert_eq!(eta2.as_linear(), Some(0.25));
        assert!(close(eta1.eval(3.0).unwrap(), 1.0, 1e-15));
        let lhs = Cf::compose(Cf::id_minus(eta1), Cf::id_minus(eta2));
        for r in [0.1, 1.0, 10.0] {
            assert!((lhs.eval(r).unwrap() - 0.5 * r).abs() < 1e-9);
        }
        assert_eq!(split_id_minus_eta(&Cf::Zero).unwrap(), (Cf::Zero, Cf::Zero));
    }

    /// Dense-grid minimization over y ∈ [0, 4] with step 1e-5.
    fn envelope_oracle(alpha: impl Fn(f64) -> f64, l: f64, r: f64) -> f64 {
        (0..=400_000)
            .map(|k| k as f64 * 1e-5)
            .map(|y| alpha(y) + l * (y - r).abs())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn lipschitz_envelope_of_square() {
        let env = lipschitz_lower_envelope(&Cf::power(1.0, 2.0), 1.0).unwrap();
        let oracle_1 = envelope_oracle(|y| y * y, 1.0, 1.0);
        let oracle_q = envelope_oracle(|y| y * y, 1.0, 0.25);
        assert!((oracle_1 - 0.75).abs() < 1e-9);
        assert!((oracle_q - 0.0625).abs() < 1e-9);
        assert!((env.eval(1.0).unwrap() - 0.75).abs() < 1e-9);
        assert!((env.eval(0.25).unwrap() - 0.0625).abs() < 1e-9);
        assert_eq!(env.class(), FnClass::KInf);
    }

    #[test]
    fn lipschitz_envelope_inactive_for_flat_linear() {
        let env = lipschitz_lower_envelope(&Cf::linear(0.3), 1.0).unwrap();
        for r in [0.0, 0.5, 2.0, 100.0] {
            assert_eq!(env.eval(r).unwrap(), 0.3 * r);
        }
    }

    #[test]
    fn kl_function() {
        let beta = KlFunction::exponential(2.0, 0.5);
        assert!(close(beta.eval(3.0, 2.0).unwrap(), 6.0 * math::exp(-1.0), 1e-15));
        assert!(KlFunction::exponential(1.0, 0.0).validate().is_err());
        let beta = KlFunction::Product { g: Cf::power(1.0, 2.0), lambda: 1.0 };
        assert!(close(beta.eval(2.0, 0.0).unwrap(), 4.0, 1e-15));
    }
}
