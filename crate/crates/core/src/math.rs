// Float helpers that `core` does not provide without std.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn powf(x: f64, p: f64) -> f64 {
    libm::pow(x, p)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// Logarithmically spaced grid with `n >= 2` points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> alloc::vec::Vec<f64> {
    let (a, b) = (ln(lo), ln(hi));
    (0..n)
        .map(|k| {
            if k + 1 == n {
                hi
            } else {
                exp(a + (b - a) * k as f64 / (n - 1) as f64)
            }
        })
        .collect()
}
