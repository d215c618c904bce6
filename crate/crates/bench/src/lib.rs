//! Problem builders shared by the benchmarks.

use std::sync::Arc;

use wadmm_core::operators::{blur_truth, gaussian_blur_operator, quadrant_rows, tomo_ray_operator};
use wadmm_core::{ForwardOperator, NoiseCov, PriorSpec, Subproblem};

/// Four-quadrant deblurring problem on a `grid_n × grid_n` image, noiseless.
pub fn deblur_quadrants(grid_n: usize) -> Vec<Subproblem> {
    let a = gaussian_blur_operator(grid_n, 3, 0.7).expect("valid blur");
    let truth = blur_truth(grid_n).expect("valid grid").pixels;
    let y = a.apply(&truth).expect("length matches");
    let prior = Arc::new(PriorSpec::smallness(grid_n * grid_n, 1e-2).expect("positive alpha"));
    quadrant_rows(grid_n, grid_n)
        .expect("even grid")
        .into_iter()
        .map(|rows| {
            let yj: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
            let op = a.select_rows(&rows).expect("rows in range");
            Subproblem::new(Arc::new(op), yj, NoiseCov::identity(rows.len()), prior.clone()).expect("consistent sizes")
        })
        .collect()
}

/// Parallel-beam projector with `grid_n` angles and detectors.
pub fn tomo(grid_n: usize) -> ForwardOperator {
    tomo_ray_operator(grid_n, grid_n, grid_n).expect("valid geometry")
}
