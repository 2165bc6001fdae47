use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::design::{Config, FactorSpace};
use crate::error::{Error, Result};
use crate::rng;

/// How design points are drawn from the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "plan", rename_all = "snake_case")]
pub enum DesignPlan {
    /// Every grid point once, in lexicographic order.
    Full,
    /// `n` distinct points whose per-factor level counts differ by at most one.
    Balanced { n: usize },
    /// `n` points drawn with replacement, level 0 of each factor weighted by `bias`
    /// against unit weight for every other level.
    Skewed { n: usize, bias: f64 },
}

const REPAIR_ROUNDS: usize = 200_000;
const RESTARTS: u64 = 20;

pub fn sample_design(space: &FactorSpace, plan: DesignPlan, seed: u64) -> Result<Vec<Config>> {
    match plan {
        DesignPlan::Full => space.enumerate(),
        DesignPlan::Balanced { n } => balanced(space, n, seed),
        DesignPlan::Skewed { n, bias } => skewed(space, n, bias, seed),
    }
}

fn balanced(space: &FactorSpace, n: usize, seed: u64) -> Result<Vec<Config>> {
    let grid = space.grid_size();
    if n == 0 || n as u128 > grid {
        return Err(Error::InfeasibleDesign(format!(
            "balanced({n}) on a grid of {grid}"
        )));
    }
    if n as u128 == grid {
        return space.enumerate();
    }
    if 2 * n as u128 > grid {
        // The full grid is exactly balanced, so the complement of a balanced
        // (grid − n)-subset is balanced as well.
        let excluded: HashSet<Config> = balanced(space, grid as usize - n, seed)?
            .into_iter()
            .collect();
        return Ok(space
            .enumerate()?
            .into_iter()
            .filter(|c| !excluded.contains(c))
            .collect());
    }
    for attempt in 0..RESTARTS {
        let mut rng = rng::stream(seed, &[attempt]);
        // per-factor balanced level columns, independently shuffled
        let columns: Vec<Vec<usize>> = (0..space.dim())
            .map(|j| {
                let l = space.levels(j);
                let mut col: Vec<usize> = (0..n).map(|i| i % l).collect();
                col.shuffle(&mut rng);
                col
            })
            .collect();
        let mut rows: Vec<Vec<usize>> = (0..n)
            .map(|i| columns.iter().map(|c| c[i]).collect())
            .collect();
        if repair_duplicates(&mut rows, space.dim(), &mut rng) {
            return Ok(rows.into_iter().map(Config).collect());
        }
    }
    Err(Error::InfeasibleDesign(format!(
        "could not find {n} distinct balanced points"
    )))
}

/// Swaps single-factor entries between rows until all rows are distinct.
/// Column swaps preserve every per-factor level count.
fn repair_duplicates(rows: &mut [Vec<usize>], dim: usize, rng: &mut impl Rng) -> bool {
    let n = rows.len();
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::with_capacity(n);
    for r in rows.iter() {
        *counts.entry(r.clone()).or_default() += 1;
    }
    let mut cursor = 0;
    for _ in 0..REPAIR_ROUNDS {
        let Some(offset) = (0..n).find(|o| counts[&rows[(cursor + o) % n]] > 1) else {
            return true;
        };
        let i = (cursor + offset) % n;
        cursor = i;
        let other = rng.random_range(0..n);
        let j = rng.random_range(0..dim);
        if other == i || rows[i][j] == rows[other][j] {
            continue;
        }
        for idx in [i, other] {
            let e = counts.get_mut(&rows[idx]).expect("tracked row");
            *e -= 1;
            if *e == 0 {
                counts.remove(&rows[idx]);
            }
        }
        let tmp = rows[i][j];
        rows[i][j] = rows[other][j];
        rows[other][j] = tmp;
        for idx in [i, other] {
            *counts.entry(rows[idx].clone()).or_default() += 1;
        }
    }
    false
}

fn skewed(space: &FactorSpace, n: usize, bias: f64, seed: u64) -> Result<Vec<Config>> {
    if n == 0 {
        return Err(Error::InfeasibleDesign("skewed design needs n >= 1".into()));
    }
    if !(bias > 0.0) || !bias.is_finite() {
        return Err(Error::InfeasibleDesign(format!(
            "bias {bias} must be positive"
        )));
    }
    let mut rng = rng::stream(seed, &[]);
    let cumulative: Vec<Vec<f64>> = (0..space.dim())
        .map(|j| {
            let l = space.levels(j);
            let total = bias + (l - 1) as f64;
            let mut acc = 0.0;
            (0..l)
                .map(|v| {
                    acc += if v == 0 { bias } else { 1.0 } / total;
                    acc
                })
                .collect()
        })
        .collect();
    Ok((0..n)
        .map(|_| {
            Config(
                cumulative
                    .iter()
                    .map(|cdf| {
                        let u: f64 = rng.random();
                        cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
                    })
                    .collect(),
            )
        })
        .collect())
}
