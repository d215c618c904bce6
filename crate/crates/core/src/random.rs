//! Seeded random generators shared by problem builders, tests and benches.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard-normal vector.
pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded_rng(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Dense matrix with standard-normal entries.
pub fn random_dense(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seeded_rng(seed);
    // column-major fill order, fixed by nalgebra
    DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
}

/// Symmetric positive definite matrix `BᵀB/n + shift·I`.
pub fn random_spd(n: usize, shift: f64, seed: u64) -> DMatrix<f64> {
    let b = random_dense(n, n, seed);
    let mut a = b.transpose() * &b / n as f64;
    for i in 0..n {
        a[(i, i)] += shift;
    }
    a
}
