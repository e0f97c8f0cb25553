//! Cone geometry and the small-gain probes.
//!
//! Every probe here is one-sided: a witness refutes a condition for certain,
//! while the absence of one among finitely many samples only supports it.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::comparison::{default_grid, ComparisonFunction};
use crate::discrete::{mlim_probe, MlimOptions, MlimReport};
use crate::envelope::{isotonic_lower, upper_comparison};
use crate::network::sup_norm;
use crate::operator::{gelfand_radius, BoundOperator, DEFAULT_K_MAX, DEFAULT_TOL};
use crate::sampling;
use crate::{Error, Evidence, Result};

/// Radii probed when the caller gives none.
pub const DEFAULT_RADII: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

/// Ratio `‖v‖/‖w‖` above which the MBI probe reports unbounded growth.
pub const MBI_RATIO_LIMIT: f64 = 1e6;

/// Distance of `x` to the nonnegative orthant in the max norm.
pub fn dist_to_cone(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, &v| if v < 0.0 { m.max(-v) } else { m })
}

fn zero_tol(r: f64) -> f64 {
    1e-12 * r.max(1.0)
}

fn scaled(v: &[f64], norm: f64) -> Vec<f64> {
    let n = sup_norm(v);
    v.iter().map(|x| x * norm / n).collect()
}

fn unit(len: usize, i: usize, r: f64) -> Vec<f64> {
    let mut e = vec![0.0; len];
    e[i] = r;
    e
}

fn dominates(image: &[f64], x: &[f64]) -> bool {
    image.iter().zip(x).all(|(a, b)| a >= b)
}

/// Searches for `v ≥ 0`, `v ≠ 0` with `map(v) ≥ v` at one of the given norms.
///
/// Tries `𝟏` and the unit vectors, then runs the normalized iteration
/// `z ← z + map(z)`, which drifts toward a dominant direction; components
/// that die out are also tried at zero.
pub fn find_expansive(len: usize, mut map: impl FnMut(&[f64]) -> Vec<f64>, norms: &[f64]) -> Option<Vec<f64>> {
    fn check(map: &mut impl FnMut(&[f64]) -> Vec<f64>, z: &[f64], norms: &[f64]) -> Option<Vec<f64>> {
        if sup_norm(z) == 0.0 {
            return None;
        }
        norms.iter().find_map(|&r| {
            let v = scaled(z, r);
            dominates(&map(&v), &v).then_some(v)
        })
    }
    let ones = vec![1.0; len];
    if let Some(v) = check(&mut map, &ones, norms) {
        return Some(v);
    }
    for i in 0..len {
        if let Some(v) = check(&mut map, &unit(len, i, 1.0), norms) {
            return Some(v);
        }
    }
    let mut z = ones;
    for _ in 0..200 {
        let image = map(&z);
        let mut next: Vec<f64> = z.iter().zip(&image).map(|(a, b)| a + b).collect();
        let m = sup_norm(&next);
        if !(m > 0.0 && m.is_finite()) {
            return None;
        }
        next.iter_mut().for_each(|v| *v /= m);
        if let Some(v) = check(&mut map, &next, norms) {
            return Some(v);
        }
        let pruned: Vec<f64> = next.iter().map(|&v| if v < 1e-9 { 0.0 } else { v }).collect();
        if pruned != next {
            if let Some(v) = check(&mut map, &pruned, norms) {
                return Some(v);
            }
        }
        z = next;
    }
    None
}

/// Expansive vector of the operator itself, if one is found.
pub fn expansive_vector(op: &BoundOperator) -> Option<Vec<f64>> {
    find_expansive(op.len(), |x| op.apply(x), &DEFAULT_RADII)
}

/// Minimizes `objective` over the nonnegative max-norm sphere of radius `r`.
///
/// The sample set holds `canonical` points, uniform sphere points up to
/// `samples` in total, and a compass search around the best of them.
fn sphere_minimum(
    len: usize,
    r: f64,
    canonical: Vec<Vec<f64>>,
    samples: usize,
    rng: &mut sampling::StreamRng,
    mut objective: impl FnMut(&[f64]) -> f64,
) -> (f64, Vec<f64>, usize) {
    let mut best = (f64::INFINITY, vec![r; len]);
    let mut count = 0;
    let mut consider = |x: Vec<f64>, best: &mut (f64, Vec<f64>)| {
        let t = objective(&x);
        if t < best.0 {
            *best = (t, x);
        }
    };
    let random = samples.saturating_sub(canonical.len());
    for x in canonical {
        consider(x, &mut best);
        count += 1;
    }
    for _ in 0..random {
        consider(sampling::sphere_point(rng, len, r), &mut best);
        count += 1;
    }
    if len <= 64 {
        let mut step = 0.25 * r;
        let mut passes = 0;
        while step > 1e-7 * r && best.0 > 0.0 {
            let mut improved = false;
            passes += 1;
            for i in 0..len {
                for sign in [1.0, -1.0] {
                    let mut x = best.1.clone();
                    x[i] = (x[i] + sign * step).clamp(0.0, r);
                    let m = sup_norm(&x);
                    if m == 0.0 {
                        continue;
                    }
                    let x = scaled(&x, r);
                    let before = best.0;
                    consider(x, &mut best);
                    count += 1;
                    improved |= best.0 < before - 1e-12 * before;
                }
            }
            // Stay at one step size for a bounded number of passes.
            if !improved || passes >= 32 {
                step *= 0.5;
                passes = 0;
            }
        }
    }
    (best.0, best.1, count)
}

/// Sampled lower margin of the operator below the identity, per radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaEnvelope {
    pub radii: Vec<f64>,
    /// Sampled infimum per radius.
    pub eta_values: Vec<f64>,
    /// Nondecreasing lower envelope of `eta_values`.
    pub envelope: Vec<f64>,
    /// Direction used for the margin; `None` means the cone distance.
    pub direction: Option<Vec<f64>>,
    /// Minimizer per radius.
    pub minimizers: Vec<Vec<f64>>,
    pub sample_count: usize,
    pub seed: u64,
    pub evidence: Evidence,
}

/// Estimates `η(r) = inf_{‖x‖=r} dist(A(x) − x, cone)`.
pub fn estimate_eta(op: &BoundOperator, radii: &[f64], samples_per_radius: usize, seed: u64) -> Result<EtaEnvelope> {
    eta_probe(op, None, radii, samples_per_radius, seed)
}

/// Estimates the largest `η(r)` with `A(x) ≱ x − η(‖x‖)z` on the sphere of
/// radius `r`, for an interior direction `z > 0`.
pub fn estimate_eta_along(
    op: &BoundOperator,
    z: &[f64],
    radii: &[f64],
    samples_per_radius: usize,
    seed: u64,
) -> Result<EtaEnvelope> {
    if z.len() != op.len() {
        return Err(Error::WindowMismatch { expected: op.len(), found: z.len() });
    }
    if z.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("direction must be strictly positive".into()));
    }
    eta_probe(op, Some(z), radii, samples_per_radius, seed)
}

fn eta_probe(
    op: &BoundOperator,
    z: Option<&[f64]>,
    radii: &[f64],
    samples_per_radius: usize,
    seed: u64,
) -> Result<EtaEnvelope> {
    let n = op.len();
    if samples_per_radius < n + 2 {
        return Err(Error::InvalidInput(format!(
            "need at least {} samples per radius, got {samples_per_radius}",
            n + 2
        )));
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidInput("radii must be positive and finite".into()));
    }
    let expansive = expansive_vector(op);
    let margin = |x: &[f64]| -> f64 {
        let image = op.apply(x);
        match z {
            None => {
                let diff: Vec<f64> = image.iter().zip(x).map(|(a, b)| a - b).collect();
                dist_to_cone(&diff)
            }
            Some(z) => x.iter().zip(&image).zip(z).map(|((x, a), z)| (x - a) / z).fold(0.0, f64::max),
        }
    };
    let mut out = EtaEnvelope {
        radii: radii.to_vec(),
        eta_values: Vec::with_capacity(radii.len()),
        envelope: Vec::new(),
        direction: z.map(<[f64]>::to_vec),
        minimizers: Vec::with_capacity(radii.len()),
        sample_count: 0,
        seed,
        evidence: Evidence::Pass,
    };
    let mut witness = None;
    for (k, &r) in radii.iter().enumerate() {
        let mut canonical: Vec<Vec<f64>> = (0..n).map(|i| unit(n, i, r)).collect();
        canonical.push(vec![r; n]);
        if let Some(v) = &expansive {
            canonical.push(scaled(v, r));
        }
        let mut rng = sampling::stream(seed, k as u64);
        let (eta, x, count) = sphere_minimum(n, r, canonical, samples_per_radius, &mut rng, margin);
        out.sample_count += count;
        if eta < zero_tol(r) && witness.is_none() {
            witness = Some(format!("x = {x:?} on radius {r} gives margin {eta:e}"));
        }
        out.eta_values.push(eta);
        out.minimizers.push(x);
    }
    out.envelope = isotonic_lower(&out.eta_values);
    out.evidence = match witness {
        Some(witness) => Evidence::Falsified { witness },
        None => Evidence::Supported { samples: out.sample_count },
    };
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MbiEnvelope {
    /// Observations `(‖w‖, ‖v‖)` with `w = (v − A(v))⁺`.
    pub pairs: Vec<(f64, f64)>,
    pub xi: ComparisonFunction,
    pub max_ratio: f64,
    pub sample_count: usize,
    pub seed: u64,
    pub witness: Option<Vec<f64>>,
    pub evidence: Evidence,
}

/// `(w, ‖w‖, ‖v‖)` for the smallest admissible `w = (v − A(v))⁺`.
pub fn mbi_observation(op: &BoundOperator, v: &[f64]) -> (Vec<f64>, f64, f64) {
    let w: Vec<f64> = v.iter().zip(op.apply(v)).map(|(v, a)| (v - a).max(0.0)).collect();
    let norm = sup_norm(&w);
    (w, norm, sup_norm(v))
}

/// Samples `v ≥ 0` and fits the upper envelope `ξ` of `‖v‖` against `‖w‖`.
pub fn probe_mbi(op: &BoundOperator, sample_count: usize, seed: u64) -> Result<MbiEnvelope> {
    let n = op.len();
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    let expansive = expansive_vector(op);
    for m in [1e-3, 1.0, 1e3] {
        candidates.push(vec![m; n]);
        candidates.extend((0..n).map(|i| unit(n, i, m)));
        if let Some(v) = &expansive {
            candidates.push(scaled(v, m));
        }
    }
    let mut rng = sampling::stream(seed, 0);
    while candidates.len() < sample_count {
        let m = sampling::log_uniform(&mut rng, 1e-3, 1e3);
        candidates.push(sampling::sphere_point(&mut rng, n, m));
    }
    let mut out = MbiEnvelope {
        pairs: Vec::with_capacity(candidates.len()),
        xi: ComparisonFunction::Zero,
        max_ratio: 0.0,
        sample_count: candidates.len(),
        seed,
        witness: None,
        evidence: Evidence::Pass,
    };
    for v in candidates {
        let (_, w, norm) = mbi_observation(op, &v);
        let ratio = if w > 0.0 { norm / w } else { f64::INFINITY };
        out.max_ratio = out.max_ratio.max(ratio);
        if out.witness.is_none() && ratio > MBI_RATIO_LIMIT {
            out.evidence = Evidence::Falsified {
                witness: format!("v = {v:?} has ||v|| = {norm:e} but ||(v - A(v))+|| = {w:e}"),
            };
            out.witness = Some(v);
        }
        out.pairs.push((w, norm));
    }
    out.xi = upper_comparison(&out.pairs);
    if out.witness.is_none() {
        out.evidence = Evidence::Supported { samples: out.sample_count };
    }
    Ok(out)
}

/// A point violating a small-gain condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgcWitness {
    /// Perturbed pair `(i, j)` for the robust condition.
    pub pair: Option<(usize, usize)>,
    pub x: Vec<f64>,
    /// The image dominating `x` componentwise.
    pub image: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgcReport {
    pub samples: usize,
    /// Spectral radius of `(id + ρ)∘A` when both are linear.
    pub spectral_radius: Option<f64>,
    pub witness: Option<SgcWitness>,
    pub evidence: Evidence,
}

fn require_k_inf(f: &ComparisonFunction, name: &str) -> Result<()> {
    f.validate()?;
    if f.is_zero() {
        return Err(Error::InvalidInput(format!("{name} must be of class K-infinity")));
    }
    Ok(())
}

/// Sample points for the strong condition: canonical directions at every
/// radius plus random sphere points.
fn sgc_candidates(
    len: usize,
    extra: &[Vec<f64>],
    axes: &[usize],
    random: usize,
    rng: &mut sampling::StreamRng,
) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for &r in &DEFAULT_RADII {
        out.push(vec![r; len]);
        out.extend(axes.iter().map(|&i| unit(len, i, r)));
        out.extend(extra.iter().map(|v| scaled(v, r)));
    }
    for k in 0..random {
        let r = DEFAULT_RADII[k % DEFAULT_RADII.len()];
        out.push(sampling::sphere_point(rng, len, r));
    }
    out
}

fn boosted(rho: &ComparisonFunction, image: Vec<f64>) -> Vec<f64> {
    image.into_iter().map(|a| a + rho.value(a)).collect()
}

/// Searches for `x ≠ 0` with `(id + ρ)(A(x)) ≥ x` componentwise.
pub fn check_strong_sgc(op: &BoundOperator, rho: &ComparisonFunction, samples: usize, seed: u64) -> Result<SgcReport> {
    require_k_inf(rho, "rho")?;
    let n = op.len();
    let map = |x: &[f64]| boosted(rho, op.apply(x));
    let mut extra = Vec::new();
    let found = find_expansive(n, map, &DEFAULT_RADII);
    if let Some(v) = &found {
        extra.push(v.clone());
    }
    let axes: Vec<usize> = (0..n).collect();
    let mut rng = sampling::stream(seed, 0);
    let candidates = sgc_candidates(n, &extra, &axes, samples, &mut rng);
    let spectral_radius = match (op.is_linear(), rho.as_linear()) {
        (true, Some(_)) => Some(gelfand_radius(n, map, DEFAULT_TOL, DEFAULT_K_MAX).value),
        _ => None,
    };
    let mut report = SgcReport { samples: 0, spectral_radius, witness: None, evidence: Evidence::Pass };
    for x in candidates {
        report.samples += 1;
        let image = map(&x);
        if sup_norm(&x) > 0.0 && dominates(&image, &x) {
            report.evidence = Evidence::Falsified { witness: format!("(id + rho)(A(x)) >= x at x = {x:?}") };
            report.witness = Some(SgcWitness { pair: None, x, image });
            return Ok(report);
        }
    }
    report.evidence = Evidence::Supported { samples: report.samples };
    Ok(report)
}

/// Searches for `(i, j, x)` with `(id + ρ)(A(x) + ω(x_j)eᵢ) ≥ x`.
///
/// Translation-invariant operators only need `i = 0`.
pub fn check_robust_strong_sgc(
    op: &BoundOperator,
    rho: &ComparisonFunction,
    omega: &ComparisonFunction,
    samples: usize,
    seed: u64,
) -> Result<SgcReport> {
    require_k_inf(rho, "rho")?;
    require_k_inf(omega, "omega")?;
    if let Some(r) = default_grid().into_iter().find(|&r| omega.value(r) >= r) {
        return Err(Error::InvalidInput(format!("omega must stay below the identity, fails at r={r}")));
    }
    let n = op.len();
    let rows: Vec<usize> = if op.is_translation_invariant() { vec![0] } else { (0..n).collect() };
    let pairs: Vec<(usize, usize)> = rows.iter().flat_map(|&i| (0..n).map(move |j| (i, j))).collect();
    let per_pair = (samples / pairs.len()).max(4);
    let base = expansive_vector(op);
    let mut report = SgcReport { samples: 0, spectral_radius: None, witness: None, evidence: Evidence::Pass };
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let map = |x: &[f64]| {
            let mut image = op.apply(x);
            image[i] += omega.value(x[j]);
            boosted(rho, image)
        };
        let mut extra: Vec<Vec<f64>> = base.iter().cloned().collect();
        let mut pair_vec = unit(n, i, 1.0);
        pair_vec[j] = 1.0;
        extra.push(pair_vec);
        if n <= 16 {
            extra.extend(find_expansive(n, map, &DEFAULT_RADII));
        }
        let axes = if n <= 16 { (0..n).collect() } else { vec![i, j] };
        let mut rng = sampling::stream(seed, k as u64);
        for x in sgc_candidates(n, &extra, &axes, per_pair, &mut rng) {
            report.samples += 1;
            let image = map(&x);
            if sup_norm(&x) > 0.0 && dominates(&image, &x) {
                report.evidence = Evidence::Falsified {
                    witness: format!("perturbation at (i, j) = ({i}, {j}) dominates x = {x:?}"),
                };
                report.witness = Some(SgcWitness { pair: Some((i, j)), x, image });
                return Ok(report);
            }
        }
    }
    report.evidence = Evidence::Supported { samples: report.samples };
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    /// Random samples per probe.
    pub samples: usize,
    pub seed: u64,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig { samples: 256, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeVerdict {
    pub probe: String,
    pub evidence: Evidence,
    /// Slope of the linear `ρ` (and `ω`) that settled an adaptive probe.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub probes: Vec<ProbeVerdict>,
    /// All probes positive, or all falsified.
    pub consistent: bool,
    pub spectral_radius: Option<f64>,
    pub eta: EtaEnvelope,
    pub unit_vector: EtaEnvelope,
    pub mbi: MbiEnvelope,
    pub mlim: MlimReport,
    pub diagnostics: Vec<String>,
}

impl BatteryReport {
    pub fn all_positive(&self) -> bool {
        self.probes.iter().all(|p| p.evidence.is_positive())
    }

    pub fn all_falsified(&self) -> bool {
        self.probes.iter().all(|p| p.evidence.is_falsified())
    }
}

/// Slopes tried, largest first, for the adaptive strong and robust probes.
const ADAPTIVE_WEIGHTS: [f64; 5] = [0.1, 0.01, 1e-3, 1e-4, 1e-6];

/// Runs the six equivalent finite-dimensional conditions side by side.
///
/// The strong and robust probes need some `ρ` (and `ω`); they try linear ones
/// of decreasing slope and pass as soon as one passes.
pub fn finite_dim_battery(op: &BoundOperator, config: &BatteryConfig) -> Result<BatteryReport> {
    let n = op.len();
    let seed = config.seed;
    let samples = config.samples.max(n + 2);
    let spectral_radius = if op.is_linear() {
        Some(op.spectral_radius(DEFAULT_TOL, DEFAULT_K_MAX)?.value)
    } else {
        None
    };
    let eta = estimate_eta(op, &DEFAULT_RADII, samples, seed)?;
    let unit_vector = estimate_eta_along(op, &vec![1.0; n], &DEFAULT_RADII, samples, seed.wrapping_add(1))?;
    let mbi = probe_mbi(op, samples, seed.wrapping_add(2))?;

    let xi = match op.neumann_bound(1_000_000) {
        Ok(b) if spectral_radius.is_some_and(|r| r < 1.0) => ComparisonFunction::linear(b.bound),
        _ if mbi.evidence.is_positive() => mbi.xi.clone(),
        _ => ComparisonFunction::identity(),
    };
    let expansive: Vec<Vec<f64>> = expansive_vector(op).into_iter().collect();
    let w = vec![0.1; n];
    let mlim = mlim_probe(
        op,
        &w,
        &xi,
        &[0.1, 1e-3],
        100_000,
        &expansive,
        &MlimOptions { initial: None, damped: 4, seed: seed.wrapping_add(3) },
    )?;

    let mut strong = (Evidence::Pass, None);
    for (k, &wt) in ADAPTIVE_WEIGHTS.iter().enumerate() {
        let report = check_strong_sgc(op, &ComparisonFunction::linear(wt), samples, seed.wrapping_add(10 + k as u64))?;
        strong = (report.evidence, Some(wt));
        if strong.0.is_positive() {
            break;
        }
    }
    let mut robust = (Evidence::Pass, None);
    for (k, &wt) in ADAPTIVE_WEIGHTS.iter().enumerate() {
        let f = ComparisonFunction::linear(wt);
        let report = check_robust_strong_sgc(op, &f, &f, samples, seed.wrapping_add(20 + k as u64))?;
        robust = (report.evidence, Some(wt));
        if robust.0.is_positive() {
            break;
        }
    }

    let probes = vec![
        ProbeVerdict { probe: "mlim".into(), evidence: mlim.evidence.clone(), weight: None },
        ProbeVerdict { probe: "mbi".into(), evidence: mbi.evidence.clone(), weight: None },
        ProbeVerdict { probe: "uniform_sgc".into(), evidence: eta.evidence.clone(), weight: None },
        ProbeVerdict { probe: "unit_vector".into(), evidence: unit_vector.evidence.clone(), weight: None },
        ProbeVerdict { probe: "strong_sgc".into(), evidence: strong.0, weight: strong.1 },
        ProbeVerdict { probe: "robust_strong_sgc".into(), evidence: robust.0, weight: robust.1 },
    ];
    let positive = probes.iter().filter(|p| p.evidence.is_positive()).count();
    let falsified = probes.iter().filter(|p| p.evidence.is_falsified()).count();
    let consistent = positive == probes.len() || falsified == probes.len();
    let mut diagnostics = Vec::new();
    if !consistent {
        for p in &probes {
            diagnostics.push(format!("{}: {:?}", p.probe, p.evidence));
        }
        if let Some(r) = spectral_radius {
            diagnostics.push(format!("spectral radius estimate {r}"));
        }
    }
    Ok(BatteryReport { probes, consistent, spectral_radius, eta, unit_vector, mbi, mlim, diagnostics })
}
