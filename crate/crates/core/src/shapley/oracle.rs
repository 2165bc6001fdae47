use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;

use crate::design::{Config, FactorSpace, ReferenceDistribution, RunLog};
use crate::effects::weighted_baseline;
use crate::error::{Error, Result};
use crate::rng;

/// Complement grids up to this size are summed exactly.
pub const EXACT_COMPLEMENT_CAP: u128 = 1_000_000;
/// Background draws used when the complement grid is too large to sum.
pub const DEFAULT_BACKGROUND_DRAWS: usize = 20_000;

pub type ResponseFn = dyn Fn(&Config) -> f64 + Send + Sync;

enum Source {
    Function(Arc<ResponseFn>),
    CellMeans {
        means: HashMap<Config, f64>,
        fallback: f64,
    },
}

/// How coalition values treat the background.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackgroundMode {
    /// Independent product background; required for the second-order identity.
    Product,
    /// Joint background: absent factors are filled from whole background
    /// configurations. Only meaningful for empirical references.
    Joint,
}

/// Response oracle plus background distribution defining
/// v(T) = E[f(x_T, X_{−T})].
pub struct ValueOracle {
    space: FactorSpace,
    source: Source,
    background: ReferenceDistribution,
    mode: BackgroundMode,
    bound: f64,
    unobserved: usize,
    background_draws: usize,
}

/// Coalition value with the number of background draws used (`None` when exact).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoalitionValue {
    pub value: f64,
    pub draws: Option<usize>,
}

impl ValueOracle {
    /// Oracle over a callable response with a recorded bound B ≥ |f|.
    pub fn from_fn(
        space: &FactorSpace,
        f: Arc<ResponseFn>,
        background: ReferenceDistribution,
        bound: f64,
    ) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bound {bound} must be positive"
            )));
        }
        Ok(Self {
            space: space.clone(),
            source: Source::Function(f),
            background,
            mode: BackgroundMode::Product,
            bound,
            unobserved: 0,
            background_draws: DEFAULT_BACKGROUND_DRAWS,
        })
    }

    /// Oracle over the observed cell means of a log. Configurations never
    /// observed evaluate to the weighted baseline μ̂.
    pub fn from_log(
        space: &FactorSpace,
        log: &RunLog,
        background: ReferenceDistribution,
    ) -> Result<Self> {
        let mut sums: HashMap<Config, (f64, f64)> = HashMap::new();
        for r in log.records() {
            if r.weight > 0.0 {
                let e = sums.entry(r.config.clone()).or_default();
                e.0 += r.weight * r.response;
                e.1 += r.weight;
            }
        }
        let means: HashMap<Config, f64> = sums.into_iter().map(|(c, (s, w))| (c, s / w)).collect();
        let fallback = weighted_baseline(log)?;
        let bound = means
            .values()
            .fold(fallback.abs(), |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let unobserved = (space.grid_size() as usize).saturating_sub(means.len());
        Ok(Self {
            space: space.clone(),
            source: Source::CellMeans { means, fallback },
            background,
            mode: BackgroundMode::Product,
            bound,
            unobserved,
            background_draws: DEFAULT_BACKGROUND_DRAWS,
        })
    }

    /// Switches to joint-background coalition values (see [`BackgroundMode::Joint`]).
    pub fn with_joint_background(mut self) -> Self {
        self.mode = BackgroundMode::Joint;
        self
    }

    pub fn with_background_draws(mut self, draws: usize) -> Self {
        self.background_draws = draws.max(1);
        self
    }

    pub fn space(&self) -> &FactorSpace {
        &self.space
    }

    pub fn background(&self) -> &ReferenceDistribution {
        &self.background
    }

    pub fn mode(&self) -> BackgroundMode {
        self.mode
    }

    /// B with |f| ≤ B.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Grid configurations a log-backed oracle has never observed.
    pub fn unobserved_cells(&self) -> usize {
        self.unobserved
    }

    pub fn eval(&self, x: &Config) -> f64 {
        match &self.source {
            Source::Function(f) => f(x),
            Source::CellMeans { means, fallback } => means.get(x).copied().unwrap_or(*fallback),
        }
    }

    /// v(T) for the coalition encoded by `mask` (bit j set ⇔ factor j fixed at x_j).
    pub fn coalition_value(&self, x: &Config, mask: u64) -> Result<CoalitionValue> {
        self.space.check(x)?;
        let d = self.space.dim();
        let free: Vec<usize> = (0..d).filter(|&j| mask & (1 << j) == 0).collect();
        if free.is_empty() {
            return Ok(CoalitionValue {
                value: self.eval(x),
                draws: None,
            });
        }
        match (self.background.is_product(), self.mode) {
            (true, _) => {
                let complement: u128 = free.iter().map(|&j| self.space.levels(j) as u128).product();
                if complement <= EXACT_COMPLEMENT_CAP {
                    Ok(CoalitionValue {
                        value: self.exact_product(x, &free),
                        draws: None,
                    })
                } else {
                    Ok(self.sampled_product(x, &free, mask))
                }
            }
            (false, BackgroundMode::Joint) => {
                let anchor = self.eval(x);
                let mut z = x.clone();
                let (mut shift, mut mass) = (0.0, 0.0);
                for (b, p) in self.background.support() {
                    for &j in &free {
                        z.0[j] = b[j];
                    }
                    shift += p * (self.eval(&z) - anchor);
                    mass += p;
                }
                Ok(CoalitionValue {
                    value: anchor + shift / mass,
                    draws: None,
                })
            }
            (false, BackgroundMode::Product) => Err(Error::NonProductBackground),
        }
    }

    // Sums are taken relative to f(x), so constant responses are reproduced exactly.
    fn exact_product(&self, x: &Config, free: &[usize]) -> f64 {
        let anchor = self.eval(x);
        let mut z = x.clone();
        for &j in free {
            z.0[j] = 0;
        }
        let (mut shift, mut mass) = (0.0, 0.0);
        loop {
            let w: f64 = free
                .iter()
                .map(|&j| self.background.marginal(j)[z[j]])
                .product();
            if w > 0.0 {
                shift += w * (self.eval(&z) - anchor);
                mass += w;
            }
            // odometer over the free coordinates
            let mut carry = true;
            for &j in free.iter().rev() {
                z.0[j] += 1;
                if z[j] < self.space.levels(j) {
                    carry = false;
                    break;
                }
                z.0[j] = 0;
            }
            if carry {
                return anchor + shift / mass;
            }
        }
    }

    fn sampled_product(&self, x: &Config, free: &[usize], mask: u64) -> CoalitionValue {
        let mut r = rng::stream(self.space.rank(x) as u64, &[mask]);
        let anchor = self.eval(x);
        let mut z = x.clone();
        let mut shift = 0.0;
        for _ in 0..self.background_draws {
            for &j in free {
                let u: f64 = r.random();
                let pi = self.background.marginal(j);
                let mut acc = 0.0;
                z.0[j] = pi.len() - 1;
                for (l, p) in pi.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        z.0[j] = l;
                        break;
                    }
                }
            }
            shift += self.eval(&z) - anchor;
        }
        CoalitionValue {
            value: anchor + shift / self.background_draws as f64,
            draws: Some(self.background_draws),
        }
    }
}

/// Memoized coalition values at one evaluation point.
pub(crate) struct CoalitionCache<'a> {
    oracle: &'a ValueOracle,
    x: &'a Config,
    values: HashMap<u64, f64>,
}

impl<'a> CoalitionCache<'a> {
    pub fn new(oracle: &'a ValueOracle, x: &'a Config) -> Self {
        Self {
            oracle,
            x,
            values: HashMap::new(),
        }
    }

    pub fn get(&mut self, mask: u64) -> Result<f64> {
        if let Some(&v) = self.values.get(&mask) {
            return Ok(v);
        }
        let v = self.oracle.coalition_value(self.x, mask)?.value;
        self.values.insert(mask, v);
        Ok(v)
    }
}
