//! Effect tables and the cell-mean estimation path.

mod cm;
mod table;

pub(crate) use cm::apply_shrinkage;
pub use cm::{
    bootstrap_cis, conditional_mean, estimate_effects_cm, level_means, pair_conditional_mean,
    quantile, shrinkage_risk, weighted_baseline, MIN_BOOTSTRAP_REPLICATES,
};
pub use table::{EffectIntervals, EffectTable, Interval, Provenance};

use crate::design::FactorSpace;
use crate::error::{Error, Result};

pub const DEFAULT_TAU: f64 = 1.0;

/// Pseudo-counts τ_j (per factor) and τ_jk (per pair, in `FactorSpace::pairs` order).
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageSpec {
    tau_main: Vec<f64>,
    tau_pair: Vec<f64>,
}

impl ShrinkageSpec {
    pub fn new(tau_main: Vec<f64>, tau_pair: Vec<f64>) -> Result<Self> {
        if tau_main
            .iter()
            .chain(&tau_pair)
            .any(|&t| !(t > 0.0) || !t.is_finite())
        {
            return Err(Error::InvalidParameter(
                "shrinkage strengths must be positive".into(),
            ));
        }
        Ok(Self { tau_main, tau_pair })
    }

    pub fn shared(space: &FactorSpace, tau: f64) -> Result<Self> {
        Self::new(vec![tau; space.dim()], vec![tau; space.pair_count()])
    }

    pub fn default_for(space: &FactorSpace) -> Self {
        Self::shared(space, DEFAULT_TAU).expect("default tau is positive")
    }

    /// The τ → 0 limit: η is exactly 1 for every supported cell.
    pub fn vanishing(space: &FactorSpace) -> Self {
        Self::shared(space, f64::MIN_POSITIVE).expect("positive")
    }

    pub fn eta_main(&self, j: usize, n: usize) -> f64 {
        eta(n, self.tau_main[j])
    }

    pub fn eta_pair(&self, p: usize, n: usize) -> f64 {
        eta(n, self.tau_pair[p])
    }
}

fn eta(n: usize, tau: f64) -> f64 {
    let n = n as f64;
    n / (n + tau)
}
