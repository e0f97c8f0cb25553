//! Deterministic random streams.
//!
//! Every sample stream is a pure function of `(seed, stream)`; the sample index
//! is the position in the stream. Probes use one stream per radius or per
//! trajectory so that the same seed reproduces the same report regardless of
//! evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::ChaCha8Rng as StreamRng;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform point on the max-norm sphere of radius `r` in the nonnegative orthant:
/// every coordinate uniform in `[0, r]`, then the largest one is set to `r`.
pub fn sphere_point<R: Rng>(rng: &mut R, n: usize, r: f64) -> alloc::vec::Vec<f64> {
    let mut x: alloc::vec::Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * r).collect();
    if let Some((imax, _)) = x
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(core::cmp::Ordering::Equal))
    {
        x[imax] = r;
    }
    x
}

/// Log-uniform scalar on `[lo, hi]`.
pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let (a, b) = (crate::math::ln(lo), crate::math::ln(hi));
    crate::math::exp(a + (b - a) * rng.gen::<f64>())
}
