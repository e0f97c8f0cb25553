//! Max- and sum-form gain operators on a finite window.
//!
//! A [`GainOperator`] wraps a validated [`GainFamily`]. Binding it to a
//! [`Layout`] resolves neighbor indices once and yields a [`BoundOperator`],
//! which every iterative routine works on.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::comparison::ComparisonFunction;
use crate::cycles::simple_cycles;
use crate::math;
use crate::network::{sup_norm, AggregationMode, Boundary, FiniteGains, GainFamily, GainStructure, StateVector};
use crate::{Error, Evidence, Result};

/// Default iteration cap for closures and spectral estimates.
pub const DEFAULT_K_MAX: usize = 10_000;
/// Default tolerance for closures and spectral estimates.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Iterates larger than this multiple of the start norm count as divergent.
pub const DIVERGENCE_FACTOR: f64 = 1e9;

/// Window of node indices an operator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub lo: i64,
    pub len: usize,
    pub boundary: Boundary,
}

impl Layout {
    pub fn of(v: &StateVector) -> Self {
        Layout { lo: v.window.0, len: v.len(), boundary: v.boundary }
    }

    /// `[0, len)` with periodic boundary.
    pub fn natural(len: usize) -> Self {
        Layout { lo: 0, len, boundary: Boundary::Periodic }
    }

    /// Window `[-half, half]`.
    pub fn centered(half: usize, boundary: Boundary) -> Self {
        Layout { lo: -(half as i64), len: 2 * half + 1, boundary }
    }

    pub fn vector(&self, values: Vec<f64>) -> StateVector {
        StateVector { window: (self.lo, self.lo + self.len as i64 - 1), boundary: self.boundary, values }
    }

    pub fn ones(&self) -> StateVector {
        self.vector(vec![1.0; self.len])
    }

    /// Window index of position `k`.
    pub fn index(&self, k: usize) -> i64 {
        self.lo + k as i64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GainOperator {
    family: GainFamily,
}

impl GainOperator {
    pub fn new(family: GainFamily) -> Result<Self> {
        family.validate()?;
        Ok(GainOperator { family })
    }

    pub fn family(&self) -> &GainFamily {
        &self.family
    }

    pub fn mode(&self) -> AggregationMode {
        self.family.mode
    }

    /// Layout of finite and block-diagonal families; `None` for banded ones.
    pub fn natural_layout(&self) -> Option<Layout> {
        self.family.natural_size().map(Layout::natural)
    }

    /// Natural layout, or the centered window `[-half, half]` for banded families.
    pub fn default_layout(&self, half: usize, boundary: Boundary) -> Layout {
        self.natural_layout().unwrap_or(Layout::centered(half, boundary))
    }

    pub fn bind(&self, layout: Layout) -> Result<BoundOperator> {
        BoundOperator::new(&self.family, layout)
    }

    /// One application on `s`, using the window of `s`.
    pub fn apply(&self, s: &StateVector) -> Result<StateVector> {
        s.validate()?;
        let bound = self.bind(Layout::of(s))?;
        Ok(s.with_values(bound.apply(&s.values)))
    }
}

/// Gain operator resolved on a window.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundOperator {
    mode: AggregationMode,
    layout: Layout,
    /// Incoming edges `(source position, gain index)` per node, sorted by source.
    rows: Vec<Vec<(usize, usize)>>,
    gains: Vec<ComparisonFunction>,
    /// Slopes of `gains` when all are linear.
    slopes: Option<Vec<f64>>,
    finite: bool,
    translation_invariant: bool,
}

impl BoundOperator {
    fn new(family: &GainFamily, layout: Layout) -> Result<Self> {
        family.validate()?;
        if layout.len == 0 {
            return Err(Error::InvalidInput("window must not be empty".into()));
        }
        let mut gains: Vec<ComparisonFunction> = Vec::new();
        let mut rows: Vec<Vec<(usize, usize)>> = vec![Vec::new(); layout.len];
        let (finite, translation_invariant) = match &family.structure {
            GainStructure::Finite(f) => {
                if f.n != layout.len {
                    return Err(Error::WindowMismatch { expected: f.n, found: layout.len });
                }
                push_block(&mut rows, &mut gains, f, 0);
                (true, false)
            }
            GainStructure::BlockDiagonal { blocks } => {
                let total: usize = blocks.iter().map(|b| b.n).sum();
                if total != layout.len {
                    return Err(Error::WindowMismatch { expected: total, found: layout.len });
                }
                let mut base = 0;
                for b in blocks {
                    push_block(&mut rows, &mut gains, b, base);
                    base += b.n;
                }
                (true, false)
            }
            GainStructure::Banded { offsets } => {
                let reach = offsets.keys().map(|d| d.unsigned_abs() as usize).max().unwrap_or(0);
                if layout.boundary == Boundary::Periodic && layout.len <= 2 * reach {
                    return Err(Error::InvalidInput(format!(
                        "periodic window of {} nodes is too small for offsets up to {reach}",
                        layout.len
                    )));
                }
                let n = layout.len as i64;
                let resolved: Vec<(i64, usize)> = offsets
                    .iter()
                    .filter(|(_, g)| !g.is_zero())
                    .map(|(d, g)| (*d, intern(&mut gains, g)))
                    .collect();
                for (i, row) in rows.iter_mut().enumerate() {
                    for &(d, k) in &resolved {
                        let j = i as i64 + d;
                        let j = match layout.boundary {
                            Boundary::Periodic => j.rem_euclid(n),
                            Boundary::ZeroPad if (0..n).contains(&j) => j,
                            Boundary::ZeroPad => continue,
                        };
                        row.push((j as usize, k));
                    }
                }
                (false, layout.boundary == Boundary::Periodic)
            }
        };
        for row in &mut rows {
            row.sort_unstable();
        }
        let slopes = gains.iter().map(ComparisonFunction::as_linear).collect();
        Ok(BoundOperator { mode: family.mode, layout, rows, gains, slopes, finite, translation_invariant })
    }

    pub fn len(&self) -> usize {
        self.layout.len
    }

    pub fn is_empty(&self) -> bool {
        self.layout.len == 0
    }

    pub fn mode(&self) -> AggregationMode {
        self.mode
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn is_linear(&self) -> bool {
        self.slopes.is_some()
    }

    /// Whether shifting the window is a symmetry (banded, periodic).
    pub fn is_translation_invariant(&self) -> bool {
        self.translation_invariant
    }

    /// Incoming `(source, gain)` pairs of node `i`.
    pub fn incoming(&self, i: usize) -> impl Iterator<Item = (usize, &ComparisonFunction)> + '_ {
        self.rows[i].iter().map(move |&(j, k)| (j, &self.gains[k]))
    }

    #[inline]
    fn gain(&self, k: usize, r: f64) -> f64 {
        match &self.slopes {
            Some(s) => s[k] * r,
            None => self.gains[k].value(r),
        }
    }

    pub fn apply(&self, s: &[f64]) -> Vec<f64> {
        self.apply_with_witness(s).0
    }

    /// Applies the operator; in max mode also returns, per node, the lowest
    /// source position attaining the supremum.
    pub fn apply_with_witness(&self, s: &[f64]) -> (Vec<f64>, Vec<Option<usize>>) {
        debug_assert_eq!(s.len(), self.len());
        let mut out = Vec::with_capacity(self.len());
        let mut witness = Vec::with_capacity(self.len());
        for row in &self.rows {
            match self.mode {
                AggregationMode::Max => {
                    let mut best = 0.0;
                    let mut arg = None;
                    for &(j, k) in row {
                        let v = self.gain(k, s[j]);
                        if arg.is_none() || v > best {
                            best = v;
                            arg = Some(j);
                        }
                    }
                    out.push(best);
                    witness.push(arg);
                }
                AggregationMode::Sum => {
                    out.push(row.iter().map(|&(j, k)| self.gain(k, s[j])).sum());
                    witness.push(None);
                }
            }
        }
        (out, witness)
    }

    /// `n`-fold iterated application.
    pub fn power_iterated(&self, s: &[f64], n: usize) -> Vec<f64> {
        let mut x = s.to_vec();
        for _ in 0..n {
            x = self.apply(&x);
        }
        x
    }

    /// `n`-th power in max mode as a supremum over index paths
    /// `i = j₀ → j₁ → … → jₙ` of `γ_{j₀j₁} ∘ … ∘ γ_{jₙ₋₁jₙ}(s_{jₙ})`,
    /// enumerated explicitly.
    pub fn power_pathform(&self, s: &[f64], n: usize) -> Result<Vec<f64>> {
        if self.mode != AggregationMode::Max {
            return Err(Error::UnsupportedMode("path form needs the max-form operator"));
        }
        if n == 0 {
            return Err(Error::InvalidInput("path form needs n >= 1".into()));
        }
        if s.len() != self.len() {
            return Err(Error::WindowMismatch { expected: self.len(), found: s.len() });
        }
        let mut budget: u64 = 50_000_000;
        let mut path = Vec::with_capacity(n);
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            out.push(self.path_sup(i, n, s, &mut path, &mut budget)?);
        }
        Ok(out)
    }

    fn path_sup(&self, node: usize, remaining: usize, s: &[f64], path: &mut Vec<usize>, budget: &mut u64) -> Result<f64> {
        if remaining == 0 {
            let mut v = s[node];
            for &k in path.iter().rev() {
                v = self.gain(k, v);
            }
            return Ok(v);
        }
        let mut best = 0.0_f64;
        for &(j, k) in &self.rows[node] {
            if *budget == 0 {
                return Err(Error::Budget("path enumeration exceeded 5e7 paths".into()));
            }
            *budget -= 1;
            path.push(k);
            best = best.max(self.path_sup(j, remaining - 1, s, path, budget)?);
            path.pop();
        }
        Ok(best)
    }

    /// Gelfand estimate of the spectral radius, iterating on the all-ones vector.
    pub fn spectral_radius(&self, tol: f64, n_max: usize) -> Result<SpectralEstimate> {
        if !self.is_linear() {
            return Err(Error::RequiresLinearGains);
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
        }
        Ok(gelfand_radius(self.len(), |x| self.apply(x), tol, n_max))
    }

    /// `a_k = ‖Γᵏ(𝟏)‖` for `k = 0..=n`, stopping early once `a_k` falls below
    /// `floor` or becomes non-finite.
    pub fn power_norms(&self, n: usize, floor: f64) -> Vec<f64> {
        let mut x = vec![1.0; self.len()];
        let mut norms = vec![1.0];
        for _ in 0..n {
            x = self.apply(&x);
            let a = sup_norm(&x);
            norms.push(a);
            if a < floor || !a.is_finite() {
                break;
            }
        }
        norms
    }

    /// Upper bound on `Σₖ ‖Γᵏ(𝟏)‖` for linear gains, from
    /// `Σ_{k<N} a_k / (1 − a_N)` minimized over `N` with `a_N < 1`.
    ///
    /// For any `v ≤ Γ(v) + w` this bounds `‖v‖ / ‖w‖`.
    pub fn neumann_bound(&self, n_max: usize) -> Result<NeumannBound> {
        if !self.is_linear() {
            return Err(Error::RequiresLinearGains);
        }
        let norms = self.power_norms(n_max, 1e-300);
        let mut partial = 0.0;
        let mut best: Option<NeumannBound> = None;
        for (n, &a) in norms.iter().enumerate() {
            if n > 0 && a < 1.0 {
                let bound = partial / (1.0 - a);
                if best.as_ref().is_none_or(|b| bound < b.bound) {
                    best = Some(NeumannBound { bound, terms: n });
                }
            }
            partial += a;
        }
        best.ok_or_else(|| {
            Error::Budget(format!("no power norm below 1 within {} steps; spectral radius presumably >= 1", n_max))
        })
    }

    /// Simple cycles with their gain compositions.
    pub fn cycle_analysis(&self) -> Result<CycleReport> {
        if !self.finite {
            return Err(Error::UnsupportedStructure("banded families have infinitely many cycles"));
        }
        let adj: Vec<Vec<usize>> = self.rows.iter().map(|row| row.iter().map(|&(j, _)| j).collect()).collect();
        let (cycles, complete) = simple_cycles(&adj, CYCLE_LIMIT);
        let grid = math::log_grid(1e-6, 1e6, 121);
        let mut report = CycleReport {
            cycles: Vec::with_capacity(cycles.len()),
            max_product: None,
            max_mean: None,
            complete,
            grid_points: if self.is_linear() { 0 } else { grid.len() },
            evidence: Evidence::Pass,
        };
        let mut violation: Option<String> = None;
        for nodes in cycles {
            let gains: Vec<usize> = (0..nodes.len())
                .map(|m| {
                    let (i, j) = (nodes[m], nodes[(m + 1) % nodes.len()]);
                    self.rows[i].iter().find(|e| e.0 == j).map(|e| e.1).expect("cycle edge exists")
                })
                .collect();
            let labels: Vec<i64> = nodes.iter().map(|&v| self.layout.index(v)).collect();
            let mut info = CycleInfo { nodes: labels, product: None, mean: None, expanding_at: None };
            if let Some(slopes) = &self.slopes {
                let product: f64 = gains.iter().map(|&k| slopes[k]).product();
                let mean = math::powf(product, 1.0 / nodes.len() as f64);
                info.product = Some(product);
                info.mean = Some(mean);
                report.max_product = Some(report.max_product.map_or(product, |m: f64| m.max(product)));
                report.max_mean = Some(report.max_mean.map_or(mean, |m: f64| m.max(mean)));
                if product >= 1.0 && violation.is_none() {
                    violation = Some(format!("cycle {} has gain product {product} >= 1", cycle_label(&info.nodes)));
                }
            } else {
                for &r in &grid {
                    let mut v = r;
                    for &k in gains.iter().rev() {
                        v = self.gains[k].value(v);
                    }
                    if v >= r {
                        info.expanding_at = Some(r);
                        if violation.is_none() {
                            violation = Some(format!(
                                "cycle {} maps r={r} to {v} >= r",
                                cycle_label(&info.nodes)
                            ));
                        }
                        break;
                    }
                }
            }
            report.cycles.push(info);
        }
        report.evidence = match violation {
            Some(witness) => Evidence::Falsified { witness },
            None if !complete => Evidence::Inconclusive { reason: format!("more than {CYCLE_LIMIT} cycles") },
            None if self.is_linear() => Evidence::Pass,
            None => Evidence::Supported { samples: report.cycles.len() * grid.len() },
        };
        Ok(report)
    }

    /// Componentwise supremum of the iterates `Γᵏ(s)`, `k ≥ 0`.
    pub fn kleene_star(&self, s: &[f64], tol: f64, k_max: usize) -> Result<KleeneStar> {
        if self.mode != AggregationMode::Max {
            return Err(Error::UnsupportedMode("Kleene star needs the max-form operator"));
        }
        if s.len() != self.len() {
            return Err(Error::WindowMismatch { expected: self.len(), found: s.len() });
        }
        Ok(kleene_with(|x| self.apply(x), s, tol, k_max))
    }

    /// Interior vector `s0 ≥ 𝟏` with `Γ(s0) ≤ λ·s0`, `λ = 1/(1+ε)`.
    ///
    /// Max mode: `s0 = sup_k (1+ε)ᵏ Γᵏ(𝟏)`. Sum mode: the partial Neumann
    /// sum `Σ_{k≤K} (1+ε)ᵏ Γᵏ(𝟏)` truncated once the next term is below
    /// `1e-6`, which keeps the residual negative.
    pub fn strict_decay_point(&self, epsilon: f64, tol: f64) -> Result<StrictDecayCertificate> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
        }
        let r = self.spectral_radius(DEFAULT_TOL, DEFAULT_K_MAX)?.value;
        if (1.0 + epsilon) * r >= 1.0 {
            return Err(Error::EpsilonTooLarge { epsilon, spectral_radius: r });
        }
        let scale = 1.0 + epsilon;
        let lambda = 1.0 / scale;
        let ones = vec![1.0; self.len()];
        let (s0, iterations) = match self.mode {
            AggregationMode::Max => {
                let star = kleene_with(|x| self.apply(x).into_iter().map(|v| v * scale).collect(), &ones, 0.0, DEFAULT_K_MAX);
                if !star.converged {
                    return Err(Error::Budget(format!(
                        "scaled closure did not settle within {DEFAULT_K_MAX} iterations"
                    )));
                }
                (star.q, star.iterations)
            }
            AggregationMode::Sum => {
                let mut sum = ones.clone();
                let mut term = ones;
                let mut k = 0;
                loop {
                    term = self.apply(&term).into_iter().map(|v| v * scale).collect();
                    k += 1;
                    if sup_norm(&term) <= 1e-6 {
                        break;
                    }
                    if k >= DEFAULT_K_MAX {
                        return Err(Error::Budget(format!(
                            "scaled Neumann series did not settle within {DEFAULT_K_MAX} terms"
                        )));
                    }
                    sum.iter_mut().zip(&term).for_each(|(a, b)| *a += b);
                }
                (sum, k)
            }
        };
        let image = self.apply(&s0);
        let residual = image.iter().zip(&s0).map(|(g, s)| g - lambda * s).fold(f64::NEG_INFINITY, f64::max);
        let cert = StrictDecayCertificate {
            s0: self.layout.vector(s0),
            lambda,
            epsilon,
            residual,
            iterations,
        };
        if residual > tol {
            return Err(Error::Budget(format!("strict decay residual {residual} exceeds tolerance {tol}")));
        }
        Ok(cert)
    }
}

const CYCLE_LIMIT: usize = 100_000;

fn intern(gains: &mut Vec<ComparisonFunction>, g: &ComparisonFunction) -> usize {
    match gains.iter().position(|h| h == g) {
        Some(k) => k,
        None => {
            gains.push(g.clone());
            gains.len() - 1
        }
    }
}

fn push_block(rows: &mut [Vec<(usize, usize)>], gains: &mut Vec<ComparisonFunction>, block: &FiniteGains, base: usize) {
    for (i, row) in block.entries.iter().enumerate() {
        for (j, g) in row.iter().enumerate() {
            if i != j && !g.is_zero() {
                let k = intern(gains, g);
                rows[base + i].push((base + j, k));
            }
        }
    }
}

fn cycle_label(nodes: &[i64]) -> String {
    let mut s = String::new();
    for v in nodes.iter().chain(nodes.first()) {
        if !s.is_empty() {
            s.push_str("->");
        }
        s.push_str(&format!("{v}"));
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    /// Smallest upper bound found (Gelfand quotient or Collatz–Wielandt bound).
    pub value: f64,
    /// Largest lower bound found (Collatz–Wielandt bound over recent powers).
    pub lower_bound: f64,
    pub iterations: usize,
    /// `true` when the bracket closed or the estimate stopped moving.
    pub converged: bool,
    /// Running estimate after each step; `value` is the last entry.
    pub history: Vec<f64>,
    /// Raw quotients `‖Γⁿ(𝟏)‖^(1/n)`.
    pub quotients: Vec<f64>,
}

/// Steps without improvement after which the estimate is accepted.
const PLATEAU_STEPS: usize = 64;
/// Powers compared when forming Collatz–Wielandt bounds.
const CW_DEPTH: usize = 12;

/// Spectral radius of a positively homogeneous monotone map on `ℝⁿ₊`.
///
/// Iterates on `𝟏` with renormalization and tracks three quantities: the
/// running infimum of `‖Aⁿ𝟏‖^(1/n)` (an upper bound by submultiplicativity),
/// and upper and lower Collatz–Wielandt bounds `max/min (Aᵖx)ᵢ/xᵢ` raised to
/// `1/p` for the last few iterates `x`. Stops when the bracket is narrower than
/// `tol`, when the estimate stalls for a while, or after `n_max` steps.
pub fn gelfand_radius(len: usize, mut map: impl FnMut(&[f64]) -> Vec<f64>, tol: f64, n_max: usize) -> SpectralEstimate {
    let mut x = vec![1.0; len];
    let mut log_scale = 0.0;
    // Recent normalized iterates with the log of their scale.
    let mut recent: Vec<(Vec<f64>, f64)> = Vec::with_capacity(CW_DEPTH);
    recent.push((x.clone(), 0.0));
    let mut est = SpectralEstimate {
        value: f64::INFINITY,
        lower_bound: 0.0,
        iterations: 0,
        converged: false,
        history: Vec::new(),
        quotients: Vec::new(),
    };
    let mut stalled = 0;
    for n in 1..=n_max.max(1) {
        est.iterations = n;
        let y = map(&x);
        let m = sup_norm(&y);
        if m == 0.0 {
            est.value = 0.0;
            est.lower_bound = 0.0;
            est.history.push(0.0);
            est.quotients.push(0.0);
            est.converged = true;
            return est;
        }
        if !m.is_finite() {
            est.value = f64::INFINITY;
            est.history.push(f64::INFINITY);
            return est;
        }
        log_scale += math::ln(m);
        let q = math::exp(log_scale / n as f64);
        est.quotients.push(q);
        x = y.into_iter().map(|v| v / m).collect();
        let prev = est.value;
        let mut upper = q;
        for (p, (old, old_scale)) in recent.iter().rev().enumerate() {
            let p = p + 1;
            let factor = math::exp((log_scale - old_scale) / p as f64);
            let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
            for (a, b) in x.iter().zip(old) {
                if *b > 0.0 {
                    let ratio = a / b;
                    lo = lo.min(ratio);
                    hi = hi.max(ratio);
                } else if *a > 0.0 {
                    hi = f64::INFINITY;
                }
            }
            if lo.is_finite() {
                est.lower_bound = est.lower_bound.max(math::powf(lo, 1.0 / p as f64) * factor);
            }
            upper = upper.min(math::powf(hi, 1.0 / p as f64) * factor);
        }
        est.value = est.value.min(upper);
        est.history.push(est.value);
        if recent.len() == CW_DEPTH {
            recent.remove(0);
        }
        recent.push((x.clone(), log_scale));
        if est.value - est.lower_bound <= tol {
            est.converged = true;
            break;
        }
        stalled = if (prev - est.value).abs() < tol { stalled + 1 } else { 0 };
        if stalled >= PLATEAU_STEPS {
            est.converged = true;
            break;
        }
    }
    est
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KleeneStar {
    pub q: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// The iterates exceeded `1e9·‖s‖`.
    pub diverged: bool,
}

/// Running supremum of `s, A(s), A²(s), …` for a sup-preserving monotone map.
///
/// Stops as soon as an iterate lies below the running supremum plus `tol`;
/// for `tol = 0` every later iterate then stays below as well.
pub fn kleene_with(mut map: impl FnMut(&[f64]) -> Vec<f64>, s: &[f64], tol: f64, k_max: usize) -> KleeneStar {
    let mut q = s.to_vec();
    let mut it = s.to_vec();
    let guard = DIVERGENCE_FACTOR * sup_norm(s).max(f64::MIN_POSITIVE);
    for k in 1..=k_max {
        it = map(&it);
        let norm = sup_norm(&it);
        if !(norm <= guard) {
            return KleeneStar { q, iterations: k, converged: false, diverged: true };
        }
        let mut grew = false;
        for (qi, &v) in q.iter_mut().zip(&it) {
            if v > *qi + tol {
                grew = true;
            }
            if v > *qi {
                *qi = v;
            }
        }
        if !grew || norm == 0.0 {
            return KleeneStar { q, iterations: k, converged: true, diverged: false };
        }
    }
    KleeneStar { q, iterations: k_max, converged: false, diverged: false }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeumannBound {
    pub bound: f64,
    /// Number of powers summed.
    pub terms: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleInfo {
    /// Window indices `i₁, …, iₖ`; the composition is `γ_{i₁i₂} ∘ … ∘ γ_{iₖi₁}`.
    pub nodes: Vec<i64>,
    pub product: Option<f64>,
    /// `product^(1/k)`.
    pub mean: Option<f64>,
    /// Smallest grid radius where the composition is not below the identity.
    pub expanding_at: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub cycles: Vec<CycleInfo>,
    pub max_product: Option<f64>,
    pub max_mean: Option<f64>,
    /// `false` when the enumeration hit its limit.
    pub complete: bool,
    /// Radii sampled per cycle for nonlinear gains.
    pub grid_points: usize,
    pub evidence: Evidence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrictDecayCertificate {
    pub s0: StateVector,
    pub lambda: f64,
    pub epsilon: f64,
    /// `max_i Γ(s0)_i − λ·s0_i`.
    pub residual: f64,
    pub iterations: usize,
}

impl StrictDecayCertificate {
    /// Recomputes the residual against `op`.
    pub fn residual_for(&self, op: &BoundOperator) -> f64 {
        op.apply(&self.s0.values)
            .iter()
            .zip(&self.s0.values)
            .map(|(g, s)| g - self.lambda * s)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::FiniteGains;
    use proptest::prelude::*;

    fn pair(a: f64, b: f64, mode: AggregationMode) -> BoundOperator {
        let family = GainFamily::finite(FiniteGains::linear(&[&[0.0, a], &[b, 0.0]]), mode);
        GainOperator::new(family).unwrap().bind(Layout::natural(2)).unwrap()
    }

    fn banded(a: f64, b: f64, mode: AggregationMode, layout: Layout) -> BoundOperator {
        let family = GainFamily::banded(
            [(-1, ComparisonFunction::linear(a)), (1, ComparisonFunction::linear(b))],
            mode,
        );
        GainOperator::new(family).unwrap().bind(layout).unwrap()
    }

    #[test]
    fn apply_examples() {
        assert_eq!(pair(0.5, 0.25, AggregationMode::Max).apply(&[1.0, 2.0]), vec![1.0, 0.25]);
        assert_eq!(pair(0.5, 0.25, AggregationMode::Sum).apply(&[1.0, 2.0]), vec![1.0, 0.25]);
        assert_eq!(pair(0.5, 0.25, AggregationMode::Max).apply(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn tie_witness_is_lowest_index() {
        let op = banded(0.5, 0.5, AggregationMode::Max, Layout::natural(5));
        let (v, w) = op.apply_with_witness(&[1.0; 5]);
        assert_eq!(v, vec![0.5; 5]);
        assert_eq!(w[2], Some(1));
        assert_eq!(w[0], Some(1));
    }

    #[test]
    fn pathform_examples() {
        let op = pair(0.5, 0.25, AggregationMode::Max);
        assert_eq!(op.power_pathform(&[1.0, 2.0], 2).unwrap(), vec![0.125, 0.25]);
        assert_eq!(op.power_pathform(&[1.0, 2.0], 1).unwrap(), op.apply(&[1.0, 2.0]));
        assert!(matches!(
            pair(0.5, 0.25, AggregationMode::Sum).power_pathform(&[1.0, 1.0], 2),
            Err(Error::UnsupportedMode(_))
        ));
    }

    #[test]
    fn spectral_examples() {
        let est = pair(0.5, 0.25, AggregationMode::Max).spectral_radius(1e-12, 10_000).unwrap();
        assert!((est.value - 0.125f64.sqrt()).abs() < 1e-6);
        assert_eq!(est.value, *est.history.last().unwrap());
        let est = banded(0.4, 0.5, AggregationMode::Sum, Layout::centered(100, Boundary::Periodic))
            .spectral_radius(1e-12, 10_000)
            .unwrap();
        assert!((est.value - 0.9).abs() < 1e-9);
        let est = pair(0.0, 0.0, AggregationMode::Sum).spectral_radius(1e-12, 100).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn spectral_requires_linear() {
        let family = GainFamily::banded([(1, ComparisonFunction::power(0.5, 2.0))], AggregationMode::Max);
        let op = GainOperator::new(family).unwrap().bind(Layout::natural(5)).unwrap();
        assert_eq!(op.spectral_radius(1e-9, 100), Err(Error::RequiresLinearGains));
    }

    #[test]
    fn spectral_sum_matches_perron_root() {
        // [[0, 1], [2, 0]] has Perron root sqrt(2) and is imprimitive.
        let est = pair(1.0, 2.0, AggregationMode::Sum).spectral_radius(1e-12, 10_000).unwrap();
        assert!((est.value - 2f64.sqrt()).abs() < 1e-9);
        // [[0, .3, .2], [.1, 0, .4], [.5, .2, 0]]: characteristic polynomial
        // λ³ − 0.21λ − 0.064, largest root from Newton's method.
        let family = GainFamily::finite(
            FiniteGains::linear(&[&[0.0, 0.3, 0.2], &[0.1, 0.0, 0.4], &[0.5, 0.2, 0.0]]),
            AggregationMode::Sum,
        );
        let op = GainOperator::new(family).unwrap().bind(Layout::natural(3)).unwrap();
        let mut root = 1.0_f64;
        for _ in 0..100 {
            root -= (root.powi(3) - 0.21 * root - 0.064) / (3.0 * root * root - 0.21);
        }
        let est = op.spectral_radius(1e-12, 10_000).unwrap();
        assert!((est.value - root).abs() < 1e-9, "{} vs {root}", est.value);
    }

    #[test]
    fn cycle_examples() {
        let report = pair(0.5, 0.25, AggregationMode::Max).cycle_analysis().unwrap();
        assert_eq!(report.cycles.len(), 1);
        assert_eq!(report.max_product, Some(0.125));
        assert_eq!(report.evidence, Evidence::Pass);
        let report = pair(2.0, 1.0, AggregationMode::Max).cycle_analysis().unwrap();
        assert_eq!(report.max_product, Some(2.0));
        match report.evidence {
            Evidence::Falsified { witness } => assert!(witness.contains("0->1->0")),
            other => panic!("expected a witness, got {other:?}"),
        }
        let single = GainFamily::finite(FiniteGains::linear(&[&[0.0]]), AggregationMode::Max);
        let op = GainOperator::new(single).unwrap().bind(Layout::natural(1)).unwrap();
        let report = op.cycle_analysis().unwrap();
        assert!(report.cycles.is_empty());
        assert_eq!(report.evidence, Evidence::Pass);
        let band = banded(0.4, 0.5, AggregationMode::Max, Layout::natural(5));
        assert!(matches!(band.cycle_analysis(), Err(Error::UnsupportedStructure(_))));
    }

    #[test]
    fn nonlinear_cycle_contraction() {
        let g = |c| ComparisonFunction::saturating(c, 1.0);
        let family = GainFamily::finite(
            FiniteGains { n: 2, entries: vec![vec![ComparisonFunction::Zero, g(1.0)], vec![g(1.0), ComparisonFunction::Zero]] },
            AggregationMode::Max,
        );
        let op = GainOperator::new(family).unwrap().bind(Layout::natural(2)).unwrap();
        assert!(matches!(op.cycle_analysis().unwrap().evidence, Evidence::Supported { .. }));
        let family = GainFamily::finite(
            FiniteGains { n: 2, entries: vec![vec![ComparisonFunction::Zero, g(3.0)], vec![g(3.0), ComparisonFunction::Zero]] },
            AggregationMode::Max,
        );
        let op = GainOperator::new(family).unwrap().bind(Layout::natural(2)).unwrap();
        assert!(op.cycle_analysis().unwrap().evidence.is_falsified());
    }

    #[test]
    fn kleene_examples() {
        let op = pair(0.5, 0.25, AggregationMode::Max);
        assert_eq!(op.kleene_star(&[1.0, 1.0], 1e-12, 10_000).unwrap().q, vec![1.0, 1.0]);
        assert_eq!(op.kleene_star(&[0.0, 1.0], 1e-12, 10_000).unwrap().q, vec![0.5, 1.0]);
        let star = pair(2.0, 1.0, AggregationMode::Max).kleene_star(&[1.0, 1.0], 1e-12, 10_000).unwrap();
        assert!(star.diverged);
    }

    #[test]
    fn strict_decay_examples() {
        let cert = pair(0.5, 0.25, AggregationMode::Max).strict_decay_point(0.5, 1e-12).unwrap();
        assert_eq!(cert.s0.values, vec![1.0, 1.0]);
        assert!((cert.lambda - 2.0 / 3.0).abs() < 1e-15);
        assert!(cert.residual <= 1e-12);
        let op = banded(0.4, 0.5, AggregationMode::Max, Layout::centered(50, Boundary::Periodic));
        let cert = op.strict_decay_point(0.05, 1e-12).unwrap();
        assert!(cert.s0.values.iter().all(|&v| v == 1.0));
        assert!((cert.lambda - 1.0 / 1.05).abs() < 1e-15);
        let cert = pair(0.0, 0.0, AggregationMode::Max).strict_decay_point(3.0, 1e-12).unwrap();
        assert_eq!(cert.s0.values, vec![1.0, 1.0]);
        assert!(matches!(
            pair(0.9, 0.9, AggregationMode::Max).strict_decay_point(0.5, 1e-12),
            Err(Error::EpsilonTooLarge { .. })
        ));
    }

    #[test]
    fn strict_decay_sum_mode() {
        let op = banded(0.4, 0.5, AggregationMode::Sum, Layout::natural(9));
        let cert = op.strict_decay_point(0.1, 1e-12).unwrap();
        assert!(cert.residual < 0.0);
        assert!(cert.s0.values.iter().all(|&v| v >= 1.0));
        assert_eq!(cert.residual_for(&op), cert.residual);
    }

    #[test]
    fn neumann_bound_of_banded_sum() {
        let op = banded(0.4, 0.5, AggregationMode::Sum, Layout::natural(11));
        let nb = op.neumann_bound(10_000).unwrap();
        assert!((nb.bound - 10.0).abs() < 1e-9);
        assert!(pair(1.0, 1.0, AggregationMode::Max).neumann_bound(100).is_err());
    }

    #[test]
    fn window_mismatch_is_reported() {
        let family = GainFamily::finite(FiniteGains::linear(&[&[0.0, 0.5], &[0.25, 0.0]]), AggregationMode::Max);
        let op = GainOperator::new(family).unwrap();
        assert_eq!(op.bind(Layout::natural(3)), Err(Error::WindowMismatch { expected: 2, found: 3 }));
        let family = GainFamily::banded([(2, ComparisonFunction::linear(0.5))], AggregationMode::Max);
        assert!(GainOperator::new(family).unwrap().bind(Layout::natural(4)).is_err());
    }

    #[test]
    fn banded_window_independence_on_constant_profiles() {
        for len in [5, 17, 201] {
            let op = banded(0.4, 0.5, AggregationMode::Sum, Layout::natural(len));
            assert!(op.apply(&vec![2.0; len]).iter().all(|&v| v == 0.4 * 2.0 + 0.5 * 2.0));
        }
    }

    fn random_linear(entries: &[f64], n: usize, mode: AggregationMode) -> BoundOperator {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { entries[i * n + j] }).collect())
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let family = GainFamily::finite(FiniteGains::linear(&refs), mode);
        GainOperator::new(family).unwrap().bind(Layout::natural(n)).unwrap()
    }

    proptest! {
        #[test]
        fn monotone(entries in prop::collection::vec(0.0f64..2.0, 16),
                    lo in prop::collection::vec(0.0f64..5.0, 4),
                    bump in prop::collection::vec(0.0f64..5.0, 4),
                    sum in any::<bool>()) {
            let mode = if sum { AggregationMode::Sum } else { AggregationMode::Max };
            let op = random_linear(&entries, 4, mode);
            let hi: Vec<f64> = lo.iter().zip(&bump).map(|(a, b)| a + b).collect();
            let (a, b) = (op.apply(&lo), op.apply(&hi));
            prop_assert!(a.iter().zip(&b).all(|(x, y)| x <= y));
        }

        #[test]
        fn homogeneous_and_subadditive(entries in prop::collection::vec(0.0f64..2.0, 9),
                                       s1 in prop::collection::vec(0.0f64..5.0, 3),
                                       s2 in prop::collection::vec(0.0f64..5.0, 3),
                                       c in 0.0f64..10.0,
                                       sum in any::<bool>()) {
            let mode = if sum { AggregationMode::Sum } else { AggregationMode::Max };
            let op = random_linear(&entries, 3, mode);
            let scaled: Vec<f64> = s1.iter().map(|v| c * v).collect();
            for (x, y) in op.apply(&scaled).iter().zip(op.apply(&s1)) {
                prop_assert!((x - c * y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
            let both: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| a + b).collect();
            let lhs = op.apply(&both);
            let (r1, r2) = (op.apply(&s1), op.apply(&s2));
            for i in 0..3 {
                prop_assert!(lhs[i] <= r1[i] + r2[i] + 1e-12);
            }
        }

        #[test]
        fn two_node_max_radius(a in 0.01f64..3.0, b in 0.01f64..3.0) {
            let est = pair(a, b, AggregationMode::Max).spectral_radius(1e-12, 10_000).unwrap();
            prop_assert!((est.value - (a * b).sqrt()).abs() < 1e-6);
        }

        #[test]
        fn pathform_matches_iteration(entries in prop::collection::vec(0.0f64..1.5, 16),
                                      powers in prop::collection::vec(0.5f64..2.0, 16),
                                      s in prop::collection::vec(0.0f64..3.0, 4),
                                      n in 1usize..=5) {
            let rows: Vec<Vec<ComparisonFunction>> = (0..4)
                .map(|i| (0..4).map(|j| if i == j { ComparisonFunction::Zero } else {
                    ComparisonFunction::power(entries[i * 4 + j], powers[i * 4 + j]) }).collect())
                .collect();
            let family = GainFamily::finite(FiniteGains { n: 4, entries: rows }, AggregationMode::Max);
            let op = GainOperator::new(family).unwrap().bind(Layout::natural(4)).unwrap();
            let a = op.power_pathform(&s, n).unwrap();
            let b = op.power_iterated(&s, n);
            for i in 0..4 {
                prop_assert!((a[i] - b[i]).abs() <= 1e-12 * b[i].abs().max(1.0));
            }
        }

        #[test]
        fn kleene_relations(entries in prop::collection::vec(0.0f64..0.9, 9),
                            s in prop::collection::vec(0.0f64..3.0, 3)) {
            let op = random_linear(&entries, 3, AggregationMode::Max);
            let star = op.kleene_star(&s, 0.0, 10_000).unwrap();
            prop_assert!(star.converged);
            let image = op.apply(&star.q);
            for i in 0..3 {
                prop_assert!(s[i] <= star.q[i]);
                prop_assert!(image[i] <= star.q[i] + 1e-12);
            }
        }
    }
}
