//! Parallel-beam ray geometry and Siddon traversal on a unit-cell grid.
//!
//! The grid covers `[0, n] × [0, n]`; pixel `(row, col)` is the cell
//! `[col, col+1] × [row, row+1]` and is stored at index `row·n + col`.

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

use super::ForwardOperator;

/// A line `point + t·direction` with unit `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayGeometry {
    pub point: [f64; 2],
    pub direction: [f64; 2],
}

impl RayGeometry {
    /// Ray at angle `theta` whose signed offset from the grid centre along
    /// the normal `(−sin θ, cos θ)` is `offset`.
    pub fn parallel_beam(grid_n: usize, theta: f64, offset: f64) -> Self {
        let c = grid_n as f64 / 2.0;
        let (s, co) = theta.sin_cos();
        Self {
            point: [c - offset * s, c + offset * co],
            direction: [co, s],
        }
    }
}

/// Ray set for `n_angles` angles uniform in `[0, π)` and `n_detectors`
/// detectors spread over the grid diagonal. Row order: angle-major.
pub fn ray_geometries(grid_n: usize, n_angles: usize, n_detectors: usize) -> Vec<RayGeometry> {
    let span = grid_n as f64 * std::f64::consts::SQRT_2;
    let spacing = span / n_detectors as f64;
    let mut rays = Vec::with_capacity(n_angles * n_detectors);
    for a in 0..n_angles {
        let theta = a as f64 * std::f64::consts::PI / n_angles as f64;
        for k in 0..n_detectors {
            let offset = (k as f64 + 0.5 - n_detectors as f64 / 2.0) * spacing;
            rays.push(RayGeometry::parallel_beam(grid_n, theta, offset));
        }
    }
    rays
}

/// Intersection lengths of `ray` with every cell it crosses, as
/// `(pixel index, length)` in traversal order.
pub fn trace_ray(grid_n: usize, ray: &RayGeometry) -> Vec<(usize, f64)> {
    let n = grid_n as f64;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for axis in 0..2 {
        let (p, d) = (ray.point[axis], ray.direction[axis]);
        if d.abs() < 1e-15 {
            if p <= 0.0 || p >= n {
                return Vec::new();
            }
            continue;
        }
        let a0 = (0.0 - p) / d;
        let a1 = (n - p) / d;
        lo = lo.max(a0.min(a1));
        hi = hi.min(a0.max(a1));
    }
    if !(hi > lo) {
        return Vec::new();
    }

    let mut alphas = vec![lo, hi];
    for axis in 0..2 {
        let (p, d) = (ray.point[axis], ray.direction[axis]);
        if d.abs() < 1e-15 {
            continue;
        }
        for plane in 0..=grid_n {
            let a = (plane as f64 - p) / d;
            if a > lo && a < hi {
                alphas.push(a);
            }
        }
    }
    alphas.sort_by(f64::total_cmp);

    let mut out: Vec<(usize, f64)> = Vec::new();
    for w in alphas.windows(2) {
        let len = w[1] - w[0];
        if len <= 1e-13 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let x = ray.point[0] + mid * ray.direction[0];
        let y = ray.point[1] + mid * ray.direction[1];
        let col = (x.floor().max(0.0) as usize).min(grid_n - 1);
        let row = (y.floor().max(0.0) as usize).min(grid_n - 1);
        let idx = row * grid_n + col;
        match out.last_mut() {
            Some((last, l)) if *last == idx => *l += len,
            _ => out.push((idx, len)),
        }
    }
    out
}

/// Sparse parallel-beam projection matrix of ray–cell intersection lengths.
pub fn tomo_ray_operator(grid_n: usize, n_angles: usize, n_detectors: usize) -> Result<ForwardOperator> {
    if grid_n < 4 {
        return Err(Error::InvalidArgument(format!(
            "tomography grid must be at least 4, got {grid_n}"
        )));
    }
    if n_angles == 0 || n_detectors == 0 {
        return Err(Error::InvalidArgument(
            "tomography needs at least one angle and detector".into(),
        ));
    }
    let rays = ray_geometries(grid_n, n_angles, n_detectors);
    let mut trip = Vec::new();
    for (i, ray) in rays.iter().enumerate() {
        trip.extend(trace_ray(grid_n, ray).into_iter().map(|(c, l)| (i, c, l)));
    }
    Ok(ForwardOperator::Sparse(SparseMatrix::from_triplets(
        rays.len(),
        grid_n * grid_n,
        &trip,
    )?))
}

/// Geometric chord length of each ray through the grid square, by
/// intersecting the line with the four edges.
pub fn chord_lengths(grid_n: usize, rays: &[RayGeometry]) -> Vec<f64> {
    let n = grid_n as f64;
    let corners = [[0.0, 0.0], [n, 0.0], [n, n], [0.0, n]];
    rays.iter()
        .map(|ray| {
            let mut hits: Vec<[f64; 2]> = Vec::new();
            for e in 0..4 {
                let a = corners[e];
                let b = corners[(e + 1) % 4];
                let edge = [b[0] - a[0], b[1] - a[1]];
                let d = ray.direction;
                let denom = d[0] * edge[1] - d[1] * edge[0];
                if denom.abs() < 1e-15 {
                    continue;
                }
                let ap = [a[0] - ray.point[0], a[1] - ray.point[1]];
                // parameter along the edge, in [0, 1] for a hit
                let s = (ap[0] * d[1] - ap[1] * d[0]) / denom;
                if (-1e-12..=1.0 + 1e-12).contains(&s) {
                    hits.push([a[0] + s * edge[0], a[1] + s * edge[1]]);
                }
            }
            let mut best: f64 = 0.0;
            for i in 0..hits.len() {
                for j in i + 1..hits.len() {
                    let dx = hits[i][0] - hits[j][0];
                    let dy = hits[i][1] - hits[j][1];
                    best = best.max((dx * dx + dy * dy).sqrt());
                }
            }
            best
        })
        .collect()
}
