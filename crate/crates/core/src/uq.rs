//! Uncertainty weights: a low-rank approximation of the prior-conditioned
//! misfit Hessian yields the posterior variance diagonal, whose inverse
//! becomes the consensus weight of each subproblem.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm};
use crate::problem::{DiagonalWeight, PriorSpec, Subproblem, W_CAP, W_FLOOR};
use crate::random::seeded_rng;

/// Extra Lanczos steps beyond the requested rank.
pub const OVERSAMPLE: usize = 5;
/// Posterior variances are clamped to at least this before inversion.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Dominant eigenpairs, eigenvalues descending and nonnegative.
#[derive(Debug, Clone)]
pub struct LowRankEig {
    pub eigenvalues: Vec<f64>,
    /// `n × r`, orthonormal columns.
    pub vectors: DMatrix<f64>,
    /// Every eigenvalue of the approximation, including those beyond `r`, descending.
    pub ritz_values: Vec<f64>,
}

impl LowRankEig {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The leading `r` pairs.
    pub fn truncate(&self, r: usize) -> Self {
        let r = r.min(self.rank());
        Self {
            eigenvalues: self.eigenvalues[..r].to_vec(),
            vectors: self.vectors.columns(0, r).into_owned(),
            ritz_values: self.ritz_values.clone(),
        }
    }
}

/// `Jᵀ Γ_noise⁻¹ J v` with `J` linearized at `x_lin`.
pub fn misfit_hessian_apply(sub: &Subproblem, x_lin: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    sub.misfit_hessian_apply(x_lin, v)
}

/// `Γ_prior^{1/2} H Γ_prior^{1/2} v` with the diagonal prior square root.
pub fn prior_conditioned_apply(sub: &Subproblem, x_lin: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_len("prior-conditioned argument", sub.dim(), v.len())?;
    let s = sub.prior.sqrt_cov_diag();
    let sv: Vec<f64> = s.iter().zip(v).map(|(s, v)| s * v).collect();
    let h = sub.misfit_hessian_apply(x_lin, &sv)?;
    Ok(s.iter().zip(h).map(|(s, h)| s * h).collect())
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    // two passes of classical Gram–Schmidt
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= c * qi;
            }
        }
    }
}

/// Lanczos tridiagonalization with full reorthogonalization, `r + OVERSAMPLE`
/// steps (at most `n`), from a seeded random start.
///
/// When the recurrence breaks down on an invariant subspace it restarts from
/// a fresh random vector orthogonal to the basis, so repeated eigenvalues are
/// still resolved. It stops early, with a reduced rank, once the operator
/// vanishes on the unexplored complement or the space is exhausted.
///
/// Eigenpairs come from the Nyström approximation on the Krylov basis rather
/// than from Ritz pairs, so an unconverged final block cannot overstate the
/// variance reduction.
pub fn lanczos_low_rank<F>(mut apply: F, n: usize, r: usize, seed: u64) -> Result<LowRankEig>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if r > n {
        return Err(Error::InvalidArgument(format!("rank {r} exceeds dimension {n}")));
    }
    if r == 0 {
        return Ok(LowRankEig {
            eigenvalues: Vec::new(),
            vectors: DMatrix::zeros(n, 0),
            ritz_values: Vec::new(),
        });
    }
    let steps = (r + OVERSAMPLE).min(n);
    let mut rng = seeded_rng(seed);
    let mut fresh = |basis: &[Vec<f64>]| -> Option<Vec<f64>> {
        // a random vector orthogonal to the basis, if any direction remains
        for _ in 0..3 {
            let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let before = norm(&v);
            orthogonalize(&mut v, basis);
            let after = norm(&v);
            if after > 1e-8 * before {
                v.iter_mut().for_each(|x| *x /= after);
                return Some(v);
            }
        }
        None
    };

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut scale = 0.0_f64;
    let mut q = fresh(&basis).ok_or_else(|| Error::InvalidArgument("empty operator".into()))?;
    let mut restarted = true;
    loop {
        let w = apply(&q)?;
        check_len("Lanczos operator output", n, w.len())?;
        let wn = norm(&w);
        scale = scale.max(wn);
        if restarted && !basis.is_empty() && wn <= 1e-12 * scale {
            // operator vanishes on the complement of the explored subspace
            break;
        }
        basis.push(q);
        images.push(w.clone());
        if restarted && basis.len() == 1 && wn == 0.0 {
            break;
        }
        restarted = false;
        if basis.len() == steps {
            break;
        }
        // the three-term recurrence is implied by full reorthogonalization
        let mut r = w;
        orthogonalize(&mut r, &basis);
        let b = norm(&r);
        if b > 1e-10 * scale {
            q = r.into_iter().map(|x| x / b).collect();
        } else {
            match fresh(&basis) {
                Some(v) => {
                    q = v;
                    restarted = true;
                }
                None => break,
            }
        }
    }
    Ok(nystrom(&basis, &images, n, r))
}

/// Eigenpairs of `Y M⁺ Yᵀ` with `Y = A Q`, `M = Qᵀ A Q`. This never exceeds
/// `A` in the Loewner order and equals it when `Q` spans an invariant subspace
/// containing the range of `A`.
fn nystrom(basis: &[Vec<f64>], images: &[Vec<f64>], n: usize, r: usize) -> LowRankEig {
    let k = basis.len();
    let q = DMatrix::from_fn(n, k, |i, j| basis[j][i]);
    let y = DMatrix::from_fn(n, k, |i, j| images[j][i]);
    let m = q.transpose() * &y;
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let theta_max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let kept: Vec<usize> = (0..k).filter(|&i| eig.eigenvalues[i] > 1e-12 * theta_max).collect();
    if kept.is_empty() {
        return LowRankEig {
            eigenvalues: Vec::new(),
            vectors: DMatrix::zeros(n, 0),
            ritz_values: Vec::new(),
        };
    }
    let mut z = DMatrix::<f64>::zeros(n, kept.len());
    for (c, &i) in kept.iter().enumerate() {
        let col = &y * eig.eigenvectors.column(i) / eig.eigenvalues[i].sqrt();
        z.set_column(c, &col);
    }
    let svd = z.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i].powi(2)).collect();
    let keep = r.min(values.len());
    let vectors = DMatrix::from_fn(n, keep, |i, j| u[(i, order[j])]);
    LowRankEig {
        eigenvalues: values[..keep].to_vec(),
        vectors,
        ritz_values: values,
    }
}

/// `diag(Γ^{1/2} (I − V D Vᵀ) Γ^{1/2})` with `D = diag(λ/(λ+1))`, floored at
/// [`VARIANCE_FLOOR`].
pub fn posterior_diag(prior: &PriorSpec, eig: &LowRankEig) -> Result<Vec<f64>> {
    check_len("eigenvector rows", prior.dim(), eig.vectors.nrows())?;
    let p = prior.sqrt_cov_diag();
    let d: Vec<f64> = eig.eigenvalues.iter().map(|l| l / (l + 1.0)).collect();
    Ok(p.iter()
        .enumerate()
        .map(|(i, pi)| {
            let reduction: f64 = d
                .iter()
                .enumerate()
                .map(|(k, dk)| dk * eig.vectors[(i, k)].powi(2))
                .sum();
            (pi * (1.0 - reduction) * pi).max(VARIANCE_FLOOR)
        })
        .collect())
}

/// Weights and diagnostics for one set of subproblems.
#[derive(Debug, Clone)]
pub struct WeightReport {
    pub weights: Vec<DiagonalWeight>,
    pub requested_rank: usize,
    /// Rank actually retained per subproblem (lower after an early breakdown).
    pub ranks: Vec<usize>,
    /// `Σ_{i>r} λ_i/(λ_i+1)` per subproblem, known only when the whole
    /// spectrum was computed (`r = n`).
    pub truncation: Vec<Option<f64>>,
    pub seed: u64,
    pub wall_time_s: f64,
}

impl WeightReport {
    /// Metadata lines starting with `#`, then one row of `n` weights per subproblem.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let ranks: Vec<String> = self.ranks.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "# rank={}", self.requested_rank);
        let _ = writeln!(out, "# retained_ranks={}", ranks.join(" "));
        let _ = writeln!(out, "# seed={}", self.seed);
        let _ = writeln!(out, "# w_floor={W_FLOOR:e}");
        let _ = writeln!(out, "# w_cap={W_CAP:e}");
        for w in &self.weights {
            let row: Vec<String> = w.as_slice().iter().map(f64::to_string).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Parses the rows of a weight file written by [`WeightReport::to_csv`].
pub fn parse_weights_csv(text: &str, path: &Path) -> Result<Vec<DiagonalWeight>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|_| err(format!("cannot parse '{f}'"))))
            .collect::<Result<Vec<f64>>>()?;
        out.push(DiagonalWeight::new(row).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}

/// Posterior diagonal of one subproblem from a rank-`r` approximation at `x_lin`.
pub fn subproblem_posterior_diag(
    sub: &Subproblem,
    x_lin: &[f64],
    r: usize,
    seed: u64,
) -> Result<(Vec<f64>, LowRankEig)> {
    check_len("linearization point", sub.dim(), x_lin.len())?;
    if sub.prior.inv_cov_diag().iter().any(|p| !(*p > 0.0)) {
        return Err(Error::InvalidArgument(
            "uncertainty weights need a positive prior precision".into(),
        ));
    }
    let eig = lanczos_low_rank(|v| prior_conditioned_apply(sub, x_lin, v), sub.dim(), r, seed)?;
    Ok((posterior_diag(&sub.prior, &eig)?, eig))
}

/// `W_j = clamp(1 / posterior_diag_j)` for every subproblem, each from its
/// own rank-`r` Lanczos run with the same seed.
pub fn compute_weights(subproblems: &[Subproblem], x_lin: &[f64], r: usize, seed: u64) -> Result<WeightReport> {
    let start = Instant::now();
    let results = subproblems
        .par_iter()
        .map(|sub| subproblem_posterior_diag(sub, x_lin, r, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut weights = Vec::with_capacity(results.len());
    let mut ranks = Vec::with_capacity(results.len());
    let mut truncation = Vec::with_capacity(results.len());
    for (sub, (post, eig)) in subproblems.iter().zip(results) {
        weights.push(DiagonalWeight::from_posterior_diag(&post));
        ranks.push(eig.rank());
        truncation.push((r == sub.dim()).then(|| eig.ritz_values[eig.rank()..].iter().map(|l| l / (l + 1.0)).sum()));
    }
    Ok(WeightReport {
        weights,
        requested_rank: r,
        ranks,
        truncation,
        seed,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::relative_error;
    use crate::operators::{identity_partition, ForwardOperator};
    use crate::oracle::{dense_posterior_covariance, dense_posterior_diag};
    use crate::problem::NoiseCov;
    use crate::random::{random_dense, random_spd, random_vec};
    use nalgebra::DVector;
    use std::sync::Arc;

    fn dense_sub(a: DMatrix<f64>, noise: NoiseCov, prior: PriorSpec) -> Subproblem {
        let m = a.nrows();
        Subproblem::new(
            Arc::new(ForwardOperator::Dense(a)),
            vec![0.0; m],
            noise,
            Arc::new(prior),
        )
        .unwrap()
    }

    fn dense_apply(a: &DMatrix<f64>) -> impl FnMut(&[f64]) -> Result<Vec<f64>> + '_ {
        move |v| Ok((a * DVector::from_column_slice(v)).as_slice().to_vec())
    }

    #[test]
    fn misfit_hessian_matches_assembled_normal_matrix() {
        let a = random_dense(6, 4, 1);
        let noise = NoiseCov::new(vec![0.5, 1.0, 2.0, 4.0, 0.25, 1.5]).unwrap();
        let sub = dense_sub(a.clone(), noise.clone(), PriorSpec::smallness(4, 1.0).unwrap());
        let g = DMatrix::from_diagonal(&DVector::from_vec(noise.precision()));
        let h = a.transpose() * g * &a;
        let v = random_vec(4, 2);
        let want = &h * DVector::from_column_slice(&v);
        let got = misfit_hessian_apply(&sub, &[0.0; 4], &v).unwrap();
        assert!(relative_error(&got, want.as_slice()) <= 1e-12);
        assert_eq!(misfit_hessian_apply(&sub, &[0.0; 4], &[0.0; 4]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn prior_conditioning_on_diagonal_problem() {
        // A = diag(1, 2, 3), Γ_noise = I, Γ_prior = diag(1/α) with α = 4
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let sub = dense_sub(a, NoiseCov::identity(3), PriorSpec::smallness(3, 4.0).unwrap());
        let got = prior_conditioned_apply(&sub, &[0.0; 3], &[1.0, 1.0, 1.0]).unwrap();
        let want = [1.0 / 4.0, 4.0 / 4.0, 9.0 / 4.0];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= 1e-15);
        }
        let ident = dense_sub(
            random_dense(5, 3, 3),
            NoiseCov::identity(5),
            PriorSpec::smallness(3, 1.0).unwrap(),
        );
        let v = random_vec(3, 4);
        assert_eq!(
            prior_conditioned_apply(&ident, &[0.0; 3], &v).unwrap(),
            misfit_hessian_apply(&ident, &[0.0; 3], &v).unwrap()
        );
    }

    #[test]
    fn prior_conditioned_operator_is_symmetric() {
        let sub = dense_sub(
            random_dense(9, 7, 5),
            NoiseCov::identity(9),
            PriorSpec::diffusion(7, 1, 0.3).unwrap(),
        );
        let u = random_vec(7, 6);
        let v = random_vec(7, 7);
        let hu = prior_conditioned_apply(&sub, &[0.0; 7], &u).unwrap();
        let hv = prior_conditioned_apply(&sub, &[0.0; 7], &v).unwrap();
        assert!((dot(&hu, &v) - dot(&u, &hv)).abs() <= 1e-12 * dot(&hu, &v).abs().max(1.0));
    }

    #[test]
    fn lanczos_on_small_diagonal() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 3.0, 2.0, 1.0]));
        let eig = lanczos_low_rank(dense_apply(&d), 4, 2, 9).unwrap();
        assert!((eig.eigenvalues[0] - 4.0).abs() <= 1e-8);
        assert!((eig.eigenvalues[1] - 3.0).abs() <= 1e-8);
        assert!((eig.vectors[(0, 0)].abs() - 1.0).abs() <= 1e-8);
        assert!((eig.vectors[(1, 1)].abs() - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn lanczos_full_rank_matches_dense_eigenvalues() {
        let a = random_spd(30, 0.1, 13);
        let eig = lanczos_low_rank(dense_apply(&a), 30, 30, 1).unwrap();
        let mut want: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.as_slice().to_vec();
        want.sort_by(|x, y| y.total_cmp(x));
        assert_eq!(eig.rank(), 30);
        for (g, w) in eig.eigenvalues.iter().zip(&want) {
            assert!((g - w).abs() / w <= 1e-6, "{g} vs {w}");
        }
        let vtv = eig.vectors.transpose() * &eig.vectors;
        assert!((vtv - DMatrix::identity(30, 30)).abs().max() <= 1e-8);
    }

    #[test]
    fn lanczos_resolves_repeated_eigenvalues() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0, 2.0, 0.5, 0.5]));
        let eig = lanczos_low_rank(dense_apply(&a), 5, 5, 3).unwrap();
        assert_eq!(eig.rank(), 5);
        let want = [2.0, 2.0, 2.0, 0.5, 0.5];
        for (g, w) in eig.eigenvalues.iter().zip(want) {
            assert!((g - w).abs() <= 1e-10);
        }
    }

    #[test]
    fn zero_operator_breaks_down_with_reduced_rank() {
        let eig = lanczos_low_rank(|v| Ok(vec![0.0; v.len()]), 8, 4, 0).unwrap();
        assert!(eig.rank() < 4);
        assert!(eig.eigenvalues.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn lanczos_rejects_rank_above_dimension() {
        assert!(lanczos_low_rank(|v| Ok(v.to_vec()), 3, 4, 0).is_err());
    }

    #[test]
    fn zero_rank_gives_prior_variance() {
        let prior = PriorSpec::smallness(5, 0.25).unwrap();
        let eig = lanczos_low_rank(|v| Ok(v.to_vec()), 5, 0, 0).unwrap();
        assert_eq!(posterior_diag(&prior, &eig).unwrap(), vec![4.0; 5]);
    }

    #[test]
    fn fully_informed_direction_has_vanishing_variance() {
        let mut vectors = DMatrix::zeros(3, 1);
        vectors[(0, 0)] = 1.0;
        let eig = LowRankEig {
            eigenvalues: vec![1e15],
            vectors,
            ritz_values: vec![1e15],
        };
        let post = posterior_diag(&PriorSpec::smallness(3, 1.0).unwrap(), &eig).unwrap();
        assert!(post[0] < 1e-12 * 10.0);
        assert_eq!(&post[1..], &[1.0, 1.0]);
    }

    #[test]
    fn full_rank_posterior_matches_dense_oracle() {
        let cases = [
            dense_sub(
                random_dense(30, 20, 21),
                NoiseCov::isotropic(30, 0.3).unwrap(),
                PriorSpec::smallness(20, 0.5).unwrap(),
            ),
            dense_sub(
                random_dense(12, 20, 22),
                NoiseCov::identity(12),
                PriorSpec::diffusion(5, 4, 0.2).unwrap(),
            ),
            dense_sub(
                DMatrix::identity(10, 10),
                NoiseCov::identity(10),
                PriorSpec::smallness(10, 1.0).unwrap(),
            ),
        ];
        for sub in &cases {
            let (post, _) = subproblem_posterior_diag(sub, &vec![0.0; sub.dim()], sub.dim(), 5).unwrap();
            let want = dense_posterior_diag(sub).unwrap();
            assert!(relative_error(&post, &want) <= 1e-6, "{}", relative_error(&post, &want));
        }
    }

    #[test]
    fn posterior_bounded_by_prior_and_monotone_in_rank() {
        let sub = dense_sub(
            random_dense(25, 20, 31),
            NoiseCov::identity(25),
            PriorSpec::smallness(20, 0.1).unwrap(),
        );
        let (post_full, eig) = subproblem_posterior_diag(&sub, &[0.0; 20], 12, 8).unwrap();
        let prior_var: Vec<f64> = sub.prior.sqrt_cov_diag().iter().map(|p| p * p).collect();
        let exact = dense_posterior_diag(&sub).unwrap();
        for (p, pv) in post_full.iter().zip(&prior_var) {
            assert!(*p <= pv + 1e-12);
        }
        let mut prev = prior_var.clone();
        for r in 0..=12 {
            let post = posterior_diag(&sub.prior, &eig.truncate(r)).unwrap();
            for ((now, before), ex) in post.iter().zip(&prev).zip(&exact) {
                assert!(*now <= before + 1e-10);
                assert!(*now >= ex - 1e-10);
            }
            prev = post;
        }
    }

    #[test]
    fn truncated_rank_never_undercuts_exact_variance() {
        let (w, h) = (8, 8);
        let mut cases: Vec<Subproblem> = identity_partition(w, h, 4)
            .unwrap()
            .into_iter()
            .map(|(op, _)| {
                let m = op.n_out();
                Subproblem::new(
                    Arc::new(op),
                    vec![0.0; m],
                    NoiseCov::identity(m),
                    Arc::new(PriorSpec::smallness(w * h, 1e-2).unwrap()),
                )
                .unwrap()
            })
            .collect();
        cases.push(dense_sub(
            random_dense(30, 64, 3),
            NoiseCov::identity(30),
            PriorSpec::diffusion(8, 8, 0.5).unwrap(),
        ));
        for sub in &cases {
            let exact = dense_posterior_diag(sub).unwrap();
            for r in [1, 3, 10, 40, 63] {
                let (post, _) = subproblem_posterior_diag(sub, &[0.0; 64], r, 11).unwrap();
                for (p, e) in post.iter().zip(&exact) {
                    assert!(*p >= e - 1e-10, "r = {r}: {p} < {e}");
                }
            }
        }
    }

    #[test]
    fn identity_problem_gives_weight_two() {
        let sub = dense_sub(
            DMatrix::identity(16, 16),
            NoiseCov::identity(16),
            PriorSpec::smallness(16, 1.0).unwrap(),
        );
        let rep = compute_weights(&[sub], &[0.0; 16], 16, 42).unwrap();
        for w in rep.weights[0].as_slice() {
            assert!((w - 2.0).abs() <= 1e-10, "{w}");
        }
        assert_eq!(rep.truncation[0], Some(0.0));
    }

    #[test]
    fn quadrant_weights_favor_own_quadrant() {
        let (w, h) = (16, 16);
        let prior = Arc::new(PriorSpec::smallness(w * h, 1e-2).unwrap());
        let subs: Vec<Subproblem> = identity_partition(w, h, 4)
            .unwrap()
            .into_iter()
            .map(|(op, _)| {
                let m = op.n_out();
                Subproblem::new(Arc::new(op), vec![0.0; m], NoiseCov::identity(m), prior.clone()).unwrap()
            })
            .collect();
        let rep = compute_weights(&subs, &vec![0.0; w * h], 10, 1).unwrap();
        for (j, (_, rows)) in identity_partition(w, h, 4).unwrap().into_iter().enumerate() {
            let own: std::collections::HashSet<usize> = rows.into_iter().collect();
            let wj = rep.weights[j].as_slice();
            let min_own = own.iter().map(|&i| wj[i]).fold(f64::INFINITY, f64::min);
            let max_other = (0..w * h)
                .filter(|i| !own.contains(i))
                .map(|i| wj[i])
                .fold(0.0, f64::max);
            assert!(min_own > max_other, "subproblem {j}: {min_own} vs {max_other}");
        }
    }

    #[test]
    fn identical_subproblems_get_identical_weights() {
        let sub = dense_sub(
            random_dense(10, 8, 3),
            NoiseCov::identity(10),
            PriorSpec::smallness(8, 0.5).unwrap(),
        );
        let rep = compute_weights(&[sub.clone(), sub.clone(), sub], &[0.0; 8], 4, 77).unwrap();
        assert_eq!(rep.weights[0], rep.weights[1]);
        assert_eq!(rep.weights[1], rep.weights[2]);
        assert!(rep.truncation.iter().all(Option::is_none));
    }

    #[test]
    fn weight_csv_round_trip() {
        let sub = dense_sub(
            random_dense(10, 6, 3),
            NoiseCov::identity(10),
            PriorSpec::smallness(6, 0.5).unwrap(),
        );
        let rep = compute_weights(&[sub.clone(), sub], &[0.0; 6], 3, 5).unwrap();
        let csv = rep.to_csv();
        assert!(csv.starts_with("# rank=3\n"));
        assert!(csv.contains("# seed=5\n"));
        let back = parse_weights_csv(&csv, Path::new("w.csv")).unwrap();
        assert_eq!(back, rep.weights);
    }

    #[test]
    fn dense_covariance_is_reachable_from_eig() {
        // exact SMW reconstruction of the full covariance on a tiny case
        let a = random_dense(4, 3, 40);
        let sub = dense_sub(a.clone(), NoiseCov::identity(4), PriorSpec::smallness(3, 2.0).unwrap());
        let (_, eig) = subproblem_posterior_diag(&sub, &[0.0; 3], 3, 2).unwrap();
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            3,
            eig.eigenvalues.iter().map(|l| l / (l + 1.0)),
        ));
        let cov = (DMatrix::identity(3, 3) - &eig.vectors * d * eig.vectors.transpose()) / 2.0;
        let want = dense_posterior_covariance(&a, &NoiseCov::identity(4), &sub.prior).unwrap();
        assert!((cov - want).abs().max() <= 1e-10);
    }
}
