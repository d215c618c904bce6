//! Domain types for weighted consensus problems, plus misfit and
//! regularizer evaluation.

use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, sub};
use crate::operators::ForwardOperator;

/// Model parameters `x`, the global variable `z`, or duals `u_j`.
pub type ModelVector = Vec<f64>;

/// Lower clamp applied to every uncertainty weight.
pub const W_FLOOR: f64 = 1e-6;
/// Upper clamp applied to every uncertainty weight.
pub const W_CAP: f64 = 1e6;

/// Diagonal noise covariance `Γ_noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCov {
    diag: Vec<f64>,
}

impl NoiseCov {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if let Some(bad) = diag.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "noise variances must be positive and finite, got {bad}"
            )));
        }
        Ok(Self { diag })
    }

    pub fn identity(m: usize) -> Self {
        Self { diag: vec![1.0; m] }
    }

    pub fn isotropic(m: usize, variance: f64) -> Result<Self> {
        Self::new(vec![variance; m])
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `Γ⁻¹ r`.
    pub fn whiten(&self, r: &[f64]) -> Vec<f64> {
        r.iter().zip(&self.diag).map(|(a, v)| a / v).collect()
    }

    /// Diagonal of `Γ⁻¹`.
    pub fn precision(&self) -> Vec<f64> {
        self.diag.iter().map(|v| 1.0 / v).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    /// `R(x) = (α/2)‖x − x_ref‖²`
    Smallness,
    /// `R(x) = (α/2)‖L(x − x_ref)‖²` with `L` the forward-difference
    /// gradient on a `width × height` grid.
    Diffusion { width: usize, height: usize },
}

/// Gaussian prior with precision `αI` (smallness) or `αLᵀL` (diffusion).
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    kind: PriorKind,
    alpha: f64,
    x_ref: ModelVector,
    inv_cov_diag: Vec<f64>,
}

/// Added to `diag(αLᵀL)` so the diffusion surrogate stays invertible.
const DIFFUSION_DIAG_SHIFT: f64 = 1e-8;

impl PriorSpec {
    pub fn smallness(n: usize, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            kind: PriorKind::Smallness,
            alpha,
            x_ref: vec![0.0; n],
            inv_cov_diag: vec![alpha; n],
        })
    }

    pub fn diffusion(width: usize, height: usize, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("diffusion prior needs a nonempty grid".into()));
        }
        let inv_cov_diag = stencil_degree(width, height)
            .into_iter()
            .map(|d| alpha * d + DIFFUSION_DIAG_SHIFT)
            .collect();
        Ok(Self {
            kind: PriorKind::Diffusion { width, height },
            alpha,
            x_ref: vec![0.0; width * height],
            inv_cov_diag,
        })
    }

    /// Replaces the default zero reference model.
    pub fn with_reference(mut self, x_ref: ModelVector) -> Result<Self> {
        check_len("prior reference model", self.x_ref.len(), x_ref.len())?;
        self.x_ref = x_ref;
        Ok(self)
    }

    pub fn kind(&self) -> PriorKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.x_ref.len()
    }

    pub fn x_ref(&self) -> &[f64] {
        &self.x_ref
    }

    /// Diagonal precision used wherever `Γ_prior^{±1/2}` is needed; exact for
    /// smallness, `diag(αLᵀL) + 1e-8` for diffusion.
    pub fn inv_cov_diag(&self) -> &[f64] {
        &self.inv_cov_diag
    }

    /// Diagonal of `Γ_prior^{1/2}` under the diagonal surrogate.
    pub fn sqrt_cov_diag(&self) -> Vec<f64> {
        self.inv_cov_diag.iter().map(|p| 1.0 / p.sqrt()).collect()
    }

    /// `∇²R v`.
    pub fn hessian_apply(&self, v: &[f64]) -> Vec<f64> {
        match self.kind {
            PriorKind::Smallness => v.iter().map(|x| self.alpha * x).collect(),
            PriorKind::Diffusion { width, height } => {
                let lv = stencil_apply(width, height, v);
                stencil_transpose_apply(width, height, &lv)
                    .into_iter()
                    .map(|x| self.alpha * x)
                    .collect()
            }
        }
    }

    /// Exact diagonal of `∇²R`.
    pub fn hessian_diag(&self) -> Vec<f64> {
        match self.kind {
            PriorKind::Smallness => vec![self.alpha; self.dim()],
            PriorKind::Diffusion { width, height } => stencil_degree(width, height)
                .into_iter()
                .map(|d| self.alpha * d)
                .collect(),
        }
    }

    /// `R(x)` and `∇R(x)`.
    pub fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len("regularizer argument", self.dim(), x.len())?;
        let d = sub(x, &self.x_ref);
        match self.kind {
            PriorKind::Smallness => {
                let value = 0.5 * self.alpha * dot(&d, &d);
                Ok((value, d.iter().map(|v| self.alpha * v).collect()))
            }
            PriorKind::Diffusion { width, height } => {
                let ld = stencil_apply(width, height, &d);
                let value = 0.5 * self.alpha * dot(&ld, &ld);
                let grad = stencil_transpose_apply(width, height, &ld)
                    .into_iter()
                    .map(|v| self.alpha * v)
                    .collect();
                Ok((value, grad))
            }
        }
    }

    /// Dense `∇²R` for oracles.
    pub fn hessian_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut h = nalgebra::DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for c in 0..n {
            e[c] = 1.0;
            for (r, v) in self.hessian_apply(&e).into_iter().enumerate() {
                h[(r, c)] = v;
            }
            e[c] = 0.0;
        }
        h
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "alpha must be nonnegative, got {alpha}"
        )))
    }
}

/// Forward differences `[Dx; Dy]` on a row-major grid: horizontal
/// differences first, then vertical.
pub fn stencil_apply(width: usize, height: usize, x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity((width - 1) * height + width * (height - 1));
    for r in 0..height {
        for c in 0..width - 1 {
            out.push(x[r * width + c + 1] - x[r * width + c]);
        }
    }
    for r in 0..height - 1 {
        for c in 0..width {
            out.push(x[(r + 1) * width + c] - x[r * width + c]);
        }
    }
    out
}

pub fn stencil_transpose_apply(width: usize, height: usize, g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; width * height];
    let mut k = 0;
    for r in 0..height {
        for c in 0..width - 1 {
            out[r * width + c + 1] += g[k];
            out[r * width + c] -= g[k];
            k += 1;
        }
    }
    for r in 0..height - 1 {
        for c in 0..width {
            out[(r + 1) * width + c] += g[k];
            out[r * width + c] -= g[k];
            k += 1;
        }
    }
    out
}

/// `diag(LᵀL)`: the number of grid neighbours of each pixel.
fn stencil_degree(width: usize, height: usize) -> Vec<f64> {
    let mut deg = vec![0.0; width * height];
    for r in 0..height {
        for c in 0..width {
            let mut d = 0.0;
            if c > 0 {
                d += 1.0;
            }
            if c + 1 < width {
                d += 1.0;
            }
            if r > 0 {
                d += 1.0;
            }
            if r + 1 < height {
                d += 1.0;
            }
            deg[r * width + c] = d;
        }
    }
    deg
}

/// Positive diagonal consensus weight `W_j`, clamped to `[W_FLOOR, W_CAP]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalWeight {
    diag: Vec<f64>,
}

impl DiagonalWeight {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if let Some(bad) = diag.iter().find(|w| !(W_FLOOR..=W_CAP).contains(*w)) {
            return Err(Error::InvalidArgument(format!(
                "weight {bad} outside [{W_FLOOR}, {W_CAP}]"
            )));
        }
        Ok(Self { diag })
    }

    /// The unweighted consensus choice `W = I`.
    pub fn ones(n: usize) -> Self {
        Self { diag: vec![1.0; n] }
    }

    /// `clamp(1 / posterior_diag)`.
    pub fn from_posterior_diag(post: &[f64]) -> Self {
        Self {
            diag: post
                .iter()
                .map(|p| {
                    let w = 1.0 / p;
                    if w.is_nan() {
                        W_CAP
                    } else {
                        w.clamp(W_FLOOR, W_CAP)
                    }
                })
                .collect(),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.diag
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `W v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.diag).map(|(a, w)| a * w).collect()
    }
}

/// One consensus term: forward model, data, noise, prior and weight.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub operator: Arc<ForwardOperator>,
    pub y: Vec<f64>,
    pub noise: NoiseCov,
    pub prior: Arc<PriorSpec>,
    pub weight: DiagonalWeight,
}

impl Subproblem {
    /// Builds a term with unit weights.
    pub fn new(operator: Arc<ForwardOperator>, y: Vec<f64>, noise: NoiseCov, prior: Arc<PriorSpec>) -> Result<Self> {
        check_len("data length", operator.n_out(), y.len())?;
        check_len("noise covariance length", operator.n_out(), noise.len())?;
        check_len("prior dimension", operator.n_in(), prior.dim())?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("data must be finite".into()));
        }
        let n = operator.n_in();
        Ok(Self {
            operator,
            y,
            noise,
            prior,
            weight: DiagonalWeight::ones(n),
        })
    }

    pub fn with_weight(mut self, weight: DiagonalWeight) -> Result<Self> {
        check_len("weight length", self.dim(), weight.len())?;
        self.weight = weight;
        Ok(self)
    }

    /// Model dimension `n`.
    pub fn dim(&self) -> usize {
        self.operator.n_in()
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(sub(&self.operator.apply(x)?, &self.y))
    }

    /// `Φ_j(x) = ½ ‖F_j(x) − y_j‖²_{Γ⁻¹}`.
    pub fn misfit(&self, x: &[f64]) -> Result<f64> {
        let r = self.residual(x)?;
        Ok(0.5 * dot(&r, &self.noise.whiten(&r)))
    }

    /// `∇Φ_j(x) = J(x)ᵀ Γ⁻¹ (F_j(x) − y_j)`.
    pub fn misfit_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = self.residual(x)?;
        self.operator.jacobian_transpose_apply(x, &self.noise.whiten(&r))
    }

    /// `Jᵀ Γ⁻¹ J v` at `x`.
    pub fn misfit_hessian_apply(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let jv = self.operator.jacobian_apply(x, v)?;
        self.operator.jacobian_transpose_apply(x, &self.noise.whiten(&jv))
    }

    /// Diagonal of `Jᵀ Γ⁻¹ J` at `x`.
    pub fn misfit_hessian_diag(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.operator.normal_diag(x, &self.noise.precision())
    }
}

pub fn misfit(sub: &Subproblem, x: &[f64]) -> Result<f64> {
    sub.misfit(x)
}

pub fn misfit_gradient(sub: &Subproblem, x: &[f64]) -> Result<Vec<f64>> {
    sub.misfit_gradient(x)
}

pub fn regularizer(prior: &PriorSpec, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    prior.value_and_gradient(x)
}

/// Coordinator-owned iterate of a consensus run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusState {
    pub z: ModelVector,
    pub x: Vec<ModelVector>,
    pub u: Vec<ModelVector>,
    pub rho: f64,
    pub iter: usize,
    pub staleness: Vec<usize>,
}

impl ConsensusState {
    /// `x_j = z = x0`, `u_j = 0`.
    pub fn new(parts: usize, x0: ModelVector, rho: f64) -> Self {
        let n = x0.len();
        Self {
            x: vec![x0.clone(); parts],
            u: vec![vec![0.0; n]; parts],
            z: x0,
            rho,
            iter: 0,
            staleness: vec![0; parts],
        }
    }
}
