//! Random gain matrices and independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sgnet_core::network::FiniteGains;
use sgnet_core::operator::{BoundOperator, GainOperator, Layout};
use sgnet_core::{AggregationMode, GainFamily};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nonnegative matrix with zero diagonal; about a quarter of the entries are zero.
pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j || rng.gen::<f64>() < 0.25 { 0.0 } else { rng.gen_range(0.05..1.0) })
                .collect()
        })
        .collect()
}

/// Largest cycle geometric mean, by brute force over all index sequences
/// without repeats.
pub fn max_cycle_mean(m: &[Vec<f64>]) -> f64 {
    fn extend(m: &[Vec<f64>], path: &mut Vec<usize>, product: f64, best: &mut f64) {
        let last = *path.last().unwrap();
        let first = path[0];
        if path.len() >= 2 && m[last][first] > 0.0 {
            let p = product * m[last][first];
            *best = best.max(p.powf(1.0 / path.len() as f64));
        }
        for next in 0..m.len() {
            if !path.contains(&next) && m[last][next] > 0.0 {
                path.push(next);
                extend(m, path, product * m[last][next], best);
                path.pop();
            }
        }
    }
    let mut best = 0.0;
    for start in 0..m.len() {
        extend(m, &mut vec![start], 1.0, &mut best);
    }
    best
}

fn det3(m: &[Vec<f64>]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Perron root of a nonnegative 3×3 matrix: largest real root of the
/// characteristic polynomial, by bisection.
pub fn perron_root3(m: &[Vec<f64>]) -> f64 {
    let charpoly = |l: f64| {
        let shifted: Vec<Vec<f64>> =
            (0..3).map(|i| (0..3).map(|j| if i == j { l - m[i][j] } else { -m[i][j] }).collect()).collect();
        det3(&shifted)
    };
    let mut hi = 1.0 + m.iter().flatten().sum::<f64>();
    let mut lo = 0.0;
    // p(λ) > 0 beyond the largest root; scan down for a sign change.
    let steps = 20_000;
    for k in (0..steps).rev() {
        let l = hi * k as f64 / steps as f64;
        if charpoly(l) <= 0.0 {
            lo = l;
            hi = hi * (k + 1) as f64 / steps as f64;
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if charpoly(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `I − M` has positive leading principal minors, i.e. `r(M) < 1` for 3×3.
pub fn sum_oracle_stable(m: &[Vec<f64>]) -> bool {
    let i_m: Vec<Vec<f64>> =
        (0..3).map(|i| (0..3).map(|j| if i == j { 1.0 - m[i][j] } else { -m[i][j] }).collect()).collect();
    let d1 = i_m[0][0];
    let d2 = i_m[0][0] * i_m[1][1] - i_m[0][1] * i_m[1][0];
    d1 > 0.0 && d2 > 0.0 && det3(&i_m) > 0.0
}

pub fn scale(m: &[Vec<f64>], k: f64) -> Vec<Vec<f64>> {
    m.iter().map(|row| row.iter().map(|v| v * k).collect()).collect()
}

pub fn bind(m: &[Vec<f64>], mode: AggregationMode) -> BoundOperator {
    let rows: Vec<&[f64]> = m.iter().map(|r| r.as_slice()).collect();
    let family = GainFamily::finite(FiniteGains::linear(&rows), mode);
    GainOperator::new(family).unwrap().bind(Layout::natural(m.len())).unwrap()
}

/// Max-mode matrix whose largest cycle mean equals `target`.
pub fn max_family_with_mean(rng: &mut ChaCha8Rng, n: usize, target: f64) -> Vec<Vec<f64>> {
    loop {
        let m = random_matrix(rng, n);
        let mean = max_cycle_mean(&m);
        if mean > 0.0 {
            return scale(&m, target / mean);
        }
    }
}

/// 3×3 sum-mode matrix with Perron root `target`.
pub fn sum_family_with_root(rng: &mut ChaCha8Rng, target: f64) -> Vec<Vec<f64>> {
    loop {
        let m = random_matrix(rng, 3);
        let r = perron_root3(&m);
        if r > 1e-3 {
            return scale(&m, target / r);
        }
    }
}
