//! Shared inputs for the benchmarks.

use scalesi_core::{MultiscaleCounts, ScaleGrid, SitewiseLogLik};

/// Deterministic site-wise log-likelihoods with `k` trees of similar fit.
pub fn synthetic_matrix(n: usize, k: usize) -> SitewiseLogLik {
    let mut values = Vec::with_capacity(n * k);
    for s in 0..n {
        let base = -1.0 - (s % 17) as f64 * 0.3;
        for t in 0..k {
            let wiggle = (((s * 31 + t * 17) % 101) as f64 / 101.0 - 0.5) * 0.4;
            values.push(base + wiggle);
        }
    }
    SitewiseLogLik::new(n, k, values).expect("valid matrix")
}

/// Counts following `psi = beta0 + beta1 sigma^2` exactly, rounded to integers.
pub fn linear_counts(beta0: f64, beta1: f64, b: u64) -> MultiscaleCounts {
    let scales = ScaleGrid::Wide13.sigma_squared();
    let hits = scales
        .iter()
        .map(|&s| {
            let z = (beta0 + beta1 * s) / s.sqrt();
            let p = scalesi_core::normal_theory::upper_tail(z);
            (p * b as f64).round() as u64
        })
        .collect();
    MultiscaleCounts::new("bench", scales.clone(), vec![b; scales.len()], hits).expect("valid counts")
}
