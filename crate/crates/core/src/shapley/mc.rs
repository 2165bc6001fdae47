use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;

use super::oracle::{CoalitionCache, ValueOracle};
use crate::design::Config;
use crate::error::{Error, Result};
use crate::rng;

/// Sampling scheme for marginal contributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingScheme {
    /// Uniform random permutations; every factor is scored on every sample.
    #[default]
    Permutation,
    /// Per factor, a uniform coalition size then a uniform subset of that size.
    Subset,
}

/// Monte Carlo Shapley attribution at one evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyEstimate {
    pub point: Config,
    pub phi: Vec<f64>,
    /// Sample variance of the marginal contributions per factor.
    pub variance: Vec<f64>,
    pub samples: usize,
    /// f(x) = v(N).
    pub value: f64,
    /// v(∅), the background mean.
    pub baseline: f64,
    /// Largest |Δ_j| over all samples.
    pub max_abs_contribution: f64,
    /// Largest per-permutation |Σ_j Δ_j − (f(x) − v(∅))|; `None` in subset mode.
    pub max_efficiency_residual: Option<f64>,
}

/// Mean of `m` permutation marginal contributions per factor.
pub fn mc_shapley(
    oracle: &ValueOracle,
    x: &Config,
    m: usize,
    seed: u64,
) -> Result<ShapleyEstimate> {
    mc_shapley_keyed(oracle, x, m, seed, 0, SamplingScheme::Permutation)
}

/// As [`mc_shapley`] with an explicit stream key and sampling scheme.
pub fn mc_shapley_keyed(
    oracle: &ValueOracle,
    x: &Config,
    m: usize,
    seed: u64,
    key: u64,
    scheme: SamplingScheme,
) -> Result<ShapleyEstimate> {
    if m == 0 {
        return Err(Error::InvalidParameter("M must be at least 1".into()));
    }
    let d = oracle.space().dim();
    if d > 63 {
        return Err(Error::InvalidParameter(format!(
            "{d} factors exceed the coalition mask width"
        )));
    }
    oracle.space().check(x)?;
    let full = (1u64 << d) - 1;
    let mut cache = CoalitionCache::new(oracle, x);
    let value = cache.get(full)?;
    let baseline = cache.get(0)?;
    let mut stats = vec![Welford::default(); d];
    let mut max_abs = 0.0f64;
    let mut residual = 0.0f64;
    let mut rng = rng::stream(seed, &[key]);
    let mut order: Vec<usize> = (0..d).collect();
    for _ in 0..m {
        match scheme {
            SamplingScheme::Permutation => {
                order.shuffle(&mut rng);
                let mut mask = 0u64;
                let mut prev = baseline;
                let mut total = 0.0;
                for &j in &order {
                    mask |= 1 << j;
                    let next = cache.get(mask)?;
                    let delta = next - prev;
                    stats[j].push(delta);
                    max_abs = max_abs.max(delta.abs());
                    total += delta;
                    prev = next;
                }
                residual = residual.max((total - (value - baseline)).abs());
            }
            SamplingScheme::Subset => {
                for (j, stat) in stats.iter_mut().enumerate() {
                    let others: Vec<usize> = (0..d).filter(|&k| k != j).collect();
                    let size = rng.random_range(0..d);
                    let mask = others
                        .choose_multiple(&mut rng, size)
                        .fold(0u64, |acc, &k| acc | (1 << k));
                    let delta = cache.get(mask | (1 << j))? - cache.get(mask)?;
                    stat.push(delta);
                    max_abs = max_abs.max(delta.abs());
                }
            }
        }
    }
    Ok(ShapleyEstimate {
        point: x.clone(),
        phi: stats.iter().map(|s| s.mean).collect(),
        variance: stats.iter().map(Welford::variance).collect(),
        samples: m,
        value,
        baseline,
        max_abs_contribution: max_abs,
        max_efficiency_residual: (scheme == SamplingScheme::Permutation).then_some(residual),
    })
}

/// Estimates for every point in parallel; point i draws from stream (seed, i).
pub fn mc_shapley_batch(
    oracle: &ValueOracle,
    points: &[Config],
    m: usize,
    seed: u64,
    scheme: SamplingScheme,
) -> Result<Vec<ShapleyEstimate>> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, x)| mc_shapley_keyed(oracle, x, m, seed, i as u64, scheme))
        .collect()
}

/// Hoeffding sample size M = ⌈8B²ε⁻² ln(2/δ)⌉. With `union = Some(n)` the
/// log argument becomes 2n/δ, covering n = d|𝓔| simultaneous estimates.
pub fn mc_sample_size(bound: f64, eps: f64, delta: f64, union: Option<usize>) -> Result<usize> {
    if !(bound > 0.0) || !bound.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "B = {bound} must be positive"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need ε, δ in (0, 1); got {eps}, {delta}"
        )));
    }
    let multiplicity = match union {
        Some(0) => {
            return Err(Error::InvalidParameter(
                "union size must be positive".into(),
            ))
        }
        Some(n) => n as f64,
        None => 1.0,
    };
    Ok((8.0 * bound * bound / (eps * eps) * (2.0 * multiplicity / delta).ln()).ceil() as usize)
}

/// Half-width 2B√(2 ln(2/δ)/M) that |φ̂_j − φ_j| stays within with probability 1 − δ.
pub fn hoeffding_halfwidth(bound: f64, m: usize, delta: f64) -> f64 {
    2.0 * bound * (2.0 * (2.0 / delta).ln() / m as f64).sqrt()
}

#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}
