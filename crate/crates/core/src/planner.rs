//! Sample-size planning and error budgets from Hoeffding and Bernstein bounds.

use serde::Serialize;

use crate::design::RunLog;
use crate::error::{Error, Result};

/// Safety inflation applied when B is inferred from observed responses.
pub const BOUND_INFLATION: f64 = 1.1;

/// Inputs shared by the planners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorBudget {
    pub bound: f64,
    pub eps: f64,
    pub delta: f64,
}

impl ErrorBudget {
    pub fn new(bound: f64, eps: f64, delta: f64) -> Result<Self> {
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "B = {bound} must be positive"
            )));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ε = {eps} must be positive"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "δ = {delta} must lie in (0, 1)"
            )));
        }
        Ok(Self { bound, eps, delta })
    }

    fn scale(&self) -> f64 {
        2.0 * self.bound * self.bound / (self.eps * self.eps)
    }
}

/// n = ⌈2B²ε⁻² ln(2/δ)⌉ runs per cell for |mean error| ≤ ε with probability 1 − δ.
pub fn hoeffding_cell_n(bound: f64, eps: f64, delta: f64) -> Result<usize> {
    let b = ErrorBudget::new(bound, eps, delta)?;
    Ok((b.scale() * (2.0 / delta).ln()).ceil() as usize)
}

/// n = ⌈2B²ε⁻² ln(2 L_j L_k / δ)⌉, uniform over all cells of one pair.
pub fn uniform_cells_n(bound: f64, eps: f64, delta: f64, lj: usize, lk: usize) -> Result<usize> {
    let b = ErrorBudget::new(bound, eps, delta)?;
    if lj == 0 || lk == 0 {
        return Err(Error::InvalidParameter(
            "level counts must be positive".into(),
        ));
    }
    Ok((b.scale() * (2.0 * (lj * lk) as f64 / delta).ln()).ceil() as usize)
}

/// √(2σ̂² ln(3/δ)/n) + 3B ln(3/δ)/n.
pub fn bernstein_halfwidth(sigma: f64, bound: f64, n: usize, delta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(sigma >= 0.0) || !(bound > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(
            "need σ ≥ 0, B > 0 and δ in (0, 1)".into(),
        ));
    }
    let log = (3.0 / delta).ln();
    let n = n as f64;
    Ok((2.0 * sigma * sigma * log / n).sqrt() + 3.0 * bound * log / n)
}

/// Hoeffding half-width B√(2 ln(2/δ)/n) of one cell mean.
pub fn hoeffding_halfwidth(bound: f64, n: usize, delta: f64) -> f64 {
    bound * (2.0 * (2.0 / delta).ln() / n as f64).sqrt()
}

/// Uniform effect errors (mains, pairs) = (ε₁ + ε₀, 3ε₁ + ε₀) from cell error ε₁
/// and baseline error ε₀.
pub fn effect_error_budget(eps0: f64, eps1: f64) -> Result<(f64, f64)> {
    if !(eps0 >= 0.0) || !(eps1 >= 0.0) {
        return Err(Error::InvalidParameter(
            "error budgets must be nonnegative".into(),
        ));
    }
    Ok((eps1 + eps0, 3.0 * eps1 + eps0))
}

/// B inferred as 1.1·max|response|.
pub fn infer_bound(log: &RunLog) -> Result<f64> {
    let b = BOUND_INFLATION * log.max_abs_response();
    if b > 0.0 {
        Ok(b)
    } else {
        Err(Error::InvalidParameter(
            "all responses are zero; supply B explicitly".into(),
        ))
    }
}
