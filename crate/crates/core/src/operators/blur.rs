use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

use super::ForwardOperator;

/// First column of the banded symmetric Toeplitz factor:
/// `t_k = exp(−k²/(2σ²)) / (σ√(2π))` for `k < band`.
pub fn toeplitz_blur_kernel(band: usize, sigma: f64) -> Vec<f64> {
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    (0..band)
        .map(|k| {
            let k = k as f64;
            norm * (-(k * k) / (2.0 * sigma * sigma)).exp()
        })
        .collect()
}

/// Separable Gaussian blur `A = T ⊗ T` on a `grid_n × grid_n` image stored
/// row-major, so that `A x = vec(T X Tᵀ)`.
pub fn gaussian_blur_operator(grid_n: usize, band: usize, sigma: f64) -> Result<ForwardOperator> {
    if grid_n == 0 || band == 0 || band >= grid_n {
        return Err(Error::InvalidArgument(format!(
            "blur band must satisfy 0 < band < grid_n (band = {band}, grid_n = {grid_n})"
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "blur sigma must be positive, got {sigma}"
        )));
    }
    let t = toeplitz_blur_kernel(band, sigma);
    let tap = |i: usize, j: usize| -> f64 {
        let k = i.abs_diff(j);
        if k < band {
            t[k]
        } else {
            0.0
        }
    };

    let n = grid_n;
    let lo = |i: usize| i.saturating_sub(band - 1);
    let hi = |i: usize| (i + band).min(n);
    let mut trip = Vec::with_capacity(n * n * (2 * band - 1).pow(2));
    for r in 0..n {
        for c in 0..n {
            let row = r * n + c;
            for rr in lo(r)..hi(r) {
                let tr = tap(r, rr);
                for cc in lo(c)..hi(c) {
                    trip.push((row, rr * n + cc, tr * tap(c, cc)));
                }
            }
        }
    }
    Ok(ForwardOperator::Sparse(SparseMatrix::from_triplets(
        n * n,
        n * n,
        &trip,
    )?))
}
