use crate::error::{check_len, Error, Result};
use crate::linalg::dot;

#[derive(Debug, Clone, PartialEq)]
pub enum LinesearchOutcome {
    Accepted {
        gamma: f64,
        value: f64,
        x: Vec<f64>,
    },
    /// No step `2^-k`, `k ≤ max_halvings`, gave sufficient decrease.
    Exhausted,
}

/// Backtracking from `γ = 1` by halving until
/// `f(x + γp) ≤ f(x) + c γ ∇f(x)ᵀp`. Non-finite trial values count as
/// rejections. Errors if `p` is not a descent direction.
pub fn armijo_linesearch<F>(
    mut f: F,
    x: &[f64],
    fx: f64,
    p: &[f64],
    g: &[f64],
    c: f64,
    max_halvings: usize,
) -> Result<LinesearchOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    check_len("linesearch direction", x.len(), p.len())?;
    check_len("linesearch gradient", x.len(), g.len())?;
    let slope = dot(g, p);
    if !(slope < 0.0) {
        return Err(Error::NonDescent { slope });
    }
    let mut gamma = 1.0;
    let mut trial = vec![0.0; x.len()];
    for _ in 0..=max_halvings {
        for ((t, xi), pi) in trial.iter_mut().zip(x).zip(p) {
            *t = xi + gamma * pi;
        }
        let value = f(&trial)?;
        if value.is_finite() && value <= fx + c * gamma * slope {
            return Ok(LinesearchOutcome::Accepted { gamma, value, x: trial });
        }
        gamma *= 0.5;
    }
    Ok(LinesearchOutcome::Exhausted)
}
