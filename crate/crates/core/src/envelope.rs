//! Monotone envelopes of sampled data.
//!
//! Pool-adjacent-violators gives the least-squares nondecreasing fit; the
//! envelopes shift that fit until it lies above (or below) every sample.

use alloc::vec::Vec;

use crate::comparison::ComparisonFunction;

/// Least-squares nondecreasing fit of `values` (equal weights).
pub fn pava(values: &[f64]) -> Vec<f64> {
    // Each block stores (sum, count).
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (s2, c2) = blocks[blocks.len() - 1];
            let (s1, c1) = blocks[blocks.len() - 2];
            if s1 / c1 as f64 <= s2 / c2 as f64 {
                break;
            }
            blocks.pop();
            let last = blocks.len() - 1;
            blocks[last] = (s1 + s2, c1 + c2);
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (s, c) in blocks {
        out.extend(core::iter::repeat_n(s / c as f64, c));
    }
    out
}

/// Nondecreasing sequence lying on or above `values`.
pub fn isotonic_upper(values: &[f64]) -> Vec<f64> {
    let fit = pava(values);
    let lift = fit.iter().zip(values).map(|(f, v)| v - f).fold(0.0, f64::max);
    fit.into_iter().map(|f| f + lift).collect()
}

/// Nondecreasing sequence lying on or below `values`, clipped at zero.
pub fn isotonic_lower(values: &[f64]) -> Vec<f64> {
    let fit = pava(values);
    let drop = fit.iter().zip(values).map(|(f, v)| f - v).fold(0.0, f64::max);
    fit.into_iter().map(|f| (f - drop).max(0.0)).collect()
}

/// Strictly increasing piecewise-linear function through the origin that
/// dominates every `(x, y)` sample with `x > 0`.
///
/// Returns `Zero` when every sample has `y = 0`. Samples at `x = 0` cannot be
/// dominated by a function vanishing at zero and are ignored; callers treat
/// them separately.
pub fn upper_comparison(samples: &[(f64, f64)]) -> ComparisonFunction {
    let mut pts: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|(x, y)| *x > 0.0 && x.is_finite() && y.is_finite())
        .collect();
    if pts.iter().all(|p| p.1 <= 0.0) {
        return ComparisonFunction::Zero;
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Merge equal abscissae, keeping the largest ordinate.
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for (x, y) in pts {
        match merged.last_mut() {
            Some(last) if last.0 == x => last.1 = last.1.max(y),
            _ => merged.push((x, y)),
        }
    }
    let ys: Vec<f64> = merged.iter().map(|p| p.1).collect();
    let env = isotonic_upper(&ys);
    let mut knots = Vec::with_capacity(merged.len());
    let mut prev = 0.0_f64;
    for ((x, _), e) in merged.iter().zip(env) {
        // A tiny slope makes the envelope strictly increasing.
        let mut y = (e + 1e-9 * x).max(f64::MIN_POSITIVE);
        if y <= prev {
            y = prev + prev.abs() * 1e-12 + f64::MIN_POSITIVE;
        }
        knots.push((*x, y));
        prev = y;
    }
    ComparisonFunction::PiecewiseLinear { points: knots }
}
