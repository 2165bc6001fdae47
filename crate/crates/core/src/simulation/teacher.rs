use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::design::{Config, FactorSpace, ReferenceDistribution};
use crate::effects::{EffectTable, Provenance};
use crate::error::{Error, Result};
use crate::rng;

/// Random-draw scales for a synthetic teacher function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeacherSpec {
    pub levels: Vec<usize>,
    /// Standard deviation of raw main-effect draws.
    pub main_scale: f64,
    /// Standard deviation of raw interaction draws.
    pub pair_scale: f64,
    /// Standard deviation of the raw three-factor residual draws.
    pub residual_scale: f64,
    /// Standard deviation of additive Gaussian observation noise per seed.
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for TeacherSpec {
    fn default() -> Self {
        Self {
            levels: vec![2, 3, 2, 3, 2, 3],
            main_scale: 1.0,
            pair_scale: 0.5,
            residual_scale: 0.1,
            noise_sd: 0.1,
            seed: 0,
        }
    }
}

impl TeacherSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("main_scale", self.main_scale),
            ("pair_scale", self.pair_scale),
            ("residual_scale", self.residual_scale),
            ("noise_sd", self.noise_sd),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be ≥ 0")));
            }
        }
        FactorSpace::with_level_counts(&self.levels).map(|_| ())
    }
}

/// A fully centered three-factor term r(x_a, x_b, x_c).
#[derive(Debug, Clone, PartialEq)]
struct Residual {
    factors: [usize; 3],
    dims: [usize; 3],
    values: Vec<f64>,
}

impl Residual {
    fn at(&self, x: &Config) -> f64 {
        let [a, b, c] = self.factors;
        let [_, db, dc] = self.dims;
        self.values[(x[a] * db + x[b]) * dc + x[c]]
    }
}

/// Ground-truth response f(x) = μ + Σ g_j + Σ g_jk + r(x).
#[derive(Debug, Clone, PartialEq)]
pub struct Teacher {
    pub truth: EffectTable,
    pub noise_sd: f64,
    residual: Option<Residual>,
}

impl Teacher {
    pub fn space(&self) -> &FactorSpace {
        self.truth.space()
    }

    /// Noise-free response including the higher-order residual.
    pub fn value(&self, x: &Config) -> f64 {
        self.truth.predict(x) + self.residual(x)
    }

    /// The second-order part μ + Σ g_j + Σ g_jk.
    pub fn second_order(&self, x: &Config) -> f64 {
        self.truth.predict(x)
    }

    pub fn residual(&self, x: &Config) -> f64 {
        self.residual.as_ref().map_or(0.0, |r| r.at(x))
    }

    /// Factors of the three-factor residual, if any.
    pub fn residual_factors(&self) -> Option<[usize; 3]> {
        self.residual.as_ref().map(|r| r.factors)
    }
}

/// Draws Gaussian effects, double-centers them under the uniform reference and
/// attaches a centered random three-factor residual.
pub fn gen_teacher(spec: &TeacherSpec) -> Result<Teacher> {
    spec.validate()?;
    let space = FactorSpace::with_level_counts(&spec.levels)?;
    let mut r = rng::stream(spec.seed, &[]);
    let mut normal = |scale: f64| scale * r.sample::<f64, _>(StandardNormal);
    let mut truth = EffectTable::zeros(&space, Provenance::Truth);
    for g in truth.mains.iter_mut().flatten() {
        *g = normal(spec.main_scale);
    }
    for p in &mut truth.pairs {
        for v in p.as_mut_slice() {
            *v = normal(spec.pair_scale);
        }
    }
    truth.center(&ReferenceDistribution::uniform(&space));
    let residual = if space.dim() >= 3 && spec.residual_scale > 0.0 {
        let mut r = rng::stream(spec.seed, &[1]);
        let mut picked = index::sample(&mut r, space.dim(), 3).into_vec();
        picked.sort_unstable();
        let factors = [picked[0], picked[1], picked[2]];
        let dims = factors.map(|j| space.levels(j));
        let mut values: Vec<f64> = (0..dims.iter().product())
            .map(|_| spec.residual_scale * r.sample::<f64, _>(StandardNormal))
            .collect();
        center_tensor(&mut values, dims);
        Some(Residual {
            factors,
            dims,
            values,
        })
    } else {
        None
    };
    Ok(Teacher {
        truth,
        noise_sd: spec.noise_sd,
        residual,
    })
}

// Removing the mean along each axis in turn leaves the pure three-way component.
fn center_tensor(values: &mut [f64], dims: [usize; 3]) {
    let [da, db, dc] = dims;
    let idx = |a: usize, b: usize, c: usize| (a * db + b) * dc + c;
    for axis in 0..3 {
        let len = dims[axis];
        let (o1, o2) = match axis {
            0 => (db, dc),
            1 => (da, dc),
            _ => (da, db),
        };
        for u in 0..o1 {
            for v in 0..o2 {
                let at = |t: usize| match axis {
                    0 => idx(t, u, v),
                    1 => idx(u, t, v),
                    _ => idx(u, v, t),
                };
                let mean = (0..len).map(|t| values[at(t)]).sum::<f64>() / len as f64;
                for t in 0..len {
                    values[at(t)] -= mean;
                }
            }
        }
    }
}
