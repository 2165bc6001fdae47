//! Cell-mean estimation of effect tables.

use rand::Rng;
use rayon::prelude::*;

use crate::cells::CellMatrix;
use crate::design::{FactorSpace, Record, ReferenceDistribution, RunLog, SupportCounts};
use crate::effects::table::{EffectIntervals, EffectTable, Interval, Provenance};
use crate::effects::ShrinkageSpec;
use crate::error::{Error, Result};
use crate::rng;

pub const MIN_BOOTSTRAP_REPLICATES: usize = 100;

/// Running weighted mean shifted by the first observation of the cell, so a
/// cell of identical responses reproduces that response exactly.
#[derive(Debug, Clone, Copy, Default)]
struct CellAccumulator {
    shift: Option<f64>,
    weight: f64,
    weighted_offset: f64,
}

impl CellAccumulator {
    fn push(&mut self, f: f64, w: f64) {
        if w <= 0.0 {
            return;
        }
        let shift = *self.shift.get_or_insert(f);
        self.weight += w;
        self.weighted_offset += w * (f - shift);
    }

    fn mean(&self) -> Option<f64> {
        self.shift.map(|s| s + self.weighted_offset / self.weight)
    }
}

/// One-pass weighted means of every level and pair cell.
struct CellMeans {
    mu: f64,
    mains: Vec<Vec<Option<f64>>>,
    pairs: Vec<CellMatrix<Option<f64>>>,
}

impl CellMeans {
    fn compute(space: &FactorSpace, records: &[Record]) -> Result<Self> {
        let pairs_idx = space.pairs();
        let mut all = CellAccumulator::default();
        let mut mains: Vec<Vec<CellAccumulator>> = space
            .level_counts()
            .into_iter()
            .map(|l| vec![CellAccumulator::default(); l])
            .collect();
        let mut pairs: Vec<CellMatrix<CellAccumulator>> = pairs_idx
            .iter()
            .map(|&(j, k)| {
                CellMatrix::filled(space.levels(j), space.levels(k), CellAccumulator::default())
            })
            .collect();
        for r in records {
            all.push(r.response, r.weight);
            for (j, &l) in r.config.iter().enumerate() {
                mains[j][l].push(r.response, r.weight);
            }
            for (p, &(j, k)) in pairs_idx.iter().enumerate() {
                pairs[p]
                    .get_mut(r.config[j], r.config[k])
                    .push(r.response, r.weight);
            }
        }
        Ok(Self {
            mu: all.mean().ok_or(Error::ZeroWeight)?,
            mains: mains
                .iter()
                .map(|row| row.iter().map(CellAccumulator::mean).collect())
                .collect(),
            pairs: pairs.iter().map(|m| m.map(CellAccumulator::mean)).collect(),
        })
    }
}

/// μ̂ = Σ w f / Σ w.
pub fn weighted_baseline(log: &RunLog) -> Result<f64> {
    let mut acc = CellAccumulator::default();
    for r in log.records() {
        acc.push(r.response, r.weight);
    }
    acc.mean().ok_or(Error::ZeroWeight)
}

/// Ê[f | X_j = ℓ]; `None` when the level carries no positive weight.
pub fn conditional_mean(log: &RunLog, j: usize, l: usize) -> Option<f64> {
    let mut acc = CellAccumulator::default();
    for r in log.records().iter().filter(|r| r.config[j] == l) {
        acc.push(r.response, r.weight);
    }
    acc.mean()
}

/// Ê[f | X_j = ℓ, X_k = m]; `None` for an empty cell.
pub fn pair_conditional_mean(log: &RunLog, j: usize, l: usize, k: usize, m: usize) -> Option<f64> {
    let mut acc = CellAccumulator::default();
    for r in log
        .records()
        .iter()
        .filter(|r| r.config[j] == l && r.config[k] == m)
    {
        acc.push(r.response, r.weight);
    }
    acc.mean()
}

/// Cell-mean effect table: raw estimates, exact re-centering, shrinkage, and a
/// final re-centering. Empty cells are set to zero and flagged.
pub fn estimate_effects_cm(
    space: &FactorSpace,
    log: &RunLog,
    reference: &ReferenceDistribution,
    shrinkage: &ShrinkageSpec,
) -> Result<EffectTable> {
    if log.dim() != space.dim() {
        return Err(Error::SpaceMismatch);
    }
    let means = CellMeans::compute(space, log.records())?;
    let support = SupportCounts::from_log(space, log);
    let mut t = EffectTable::zeros(space, Provenance::Cm);
    t.mu = means.mu;
    for j in 0..space.dim() {
        for l in 0..space.levels(j) {
            match means.mains[j][l] {
                Some(m) => t.mains[j][l] = m - means.mu,
                None => t.unsupported_mains[j][l] = true,
            }
        }
    }
    for (p, (j, k)) in space.pairs().into_iter().enumerate() {
        for l in 0..space.levels(j) {
            for m in 0..space.levels(k) {
                let cell = *means.pairs[p].get(l, m);
                match (cell, means.mains[j][l], means.mains[k][m]) {
                    (Some(c), Some(a), Some(b)) => t.pairs[p].set(l, m, c - a - b + means.mu),
                    _ => t.unsupported_pairs[p].set(l, m, true),
                }
            }
        }
    }
    t.center(reference);
    apply_shrinkage(&mut t, &support, shrinkage);
    t.center(reference);
    t.support = Some(support);
    Ok(t)
}

/// g̃ = η ĝ with η = n / (n + τ); flagged cells are forced to zero.
pub(crate) fn apply_shrinkage(
    t: &mut EffectTable,
    support: &SupportCounts,
    shrinkage: &ShrinkageSpec,
) {
    for (j, row) in t.mains.iter_mut().enumerate() {
        for (l, g) in row.iter_mut().enumerate() {
            if t.unsupported_mains[j][l] {
                *g = 0.0;
            } else {
                *g *= shrinkage.eta_main(j, support.mains[j][l]);
            }
        }
    }
    for (p, table) in t.pairs.iter_mut().enumerate() {
        for l in 0..table.rows() {
            for m in 0..table.cols() {
                if *t.unsupported_pairs[p].get(l, m) {
                    table.set(l, m, 0.0);
                } else {
                    *table.get_mut(l, m) *= shrinkage.eta_pair(p, *support.pairs[p].get(l, m));
                }
            }
        }
    }
}

/// Raw conditional level means Ê[f | X_j = ℓ].
pub fn level_means(space: &FactorSpace, log: &RunLog) -> Result<Vec<Vec<Option<f64>>>> {
    Ok(CellMeans::compute(space, log.records())?.mains)
}

/// Record-level bootstrap: percentile intervals and standard errors for every
/// table entry and every conditional level mean.
pub fn bootstrap_cis(
    space: &FactorSpace,
    log: &RunLog,
    reference: &ReferenceDistribution,
    shrinkage: &ShrinkageSpec,
    replicates: usize,
    coverage: f64,
    seed: u64,
) -> Result<EffectTable> {
    if replicates < MIN_BOOTSTRAP_REPLICATES {
        return Err(Error::InvalidParameter(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP_REPLICATES} replicates, got {replicates}"
        )));
    }
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "coverage {coverage} outside (0, 1)"
        )));
    }
    let mut table = estimate_effects_cm(space, log, reference, shrinkage)?;
    let base_means = level_means(space, log)?;
    let n = log.len();
    let draws: Vec<(EffectTable, Vec<Vec<Option<f64>>>)> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, &[b as u64]);
            loop {
                let records: Vec<Record> = (0..n)
                    .map(|_| log.records()[r.random_range(0..n)].clone())
                    .collect();
                if let Ok(resampled) = RunLog::new(space, records) {
                    let t = estimate_effects_cm(space, &resampled, reference, shrinkage)
                        .expect("resampled log has positive weight");
                    let means = level_means(space, &resampled).expect("positive weight");
                    return (t, means);
                }
            }
        })
        .collect();

    let summarize = |values: Vec<f64>| interval(values, coverage);
    let mu = summarize(draws.iter().map(|(t, _)| t.mu).collect());
    let mains = (0..space.dim())
        .map(|j| {
            (0..space.levels(j))
                .map(|l| summarize(draws.iter().map(|(t, _)| t.mains[j][l]).collect()))
                .collect()
        })
        .collect();
    let pairs = space
        .pairs()
        .into_iter()
        .enumerate()
        .map(|(p, (j, k))| {
            CellMatrix::from_fn(space.levels(j), space.levels(k), |l, m| {
                summarize(draws.iter().map(|(t, _)| *t.pairs[p].get(l, m)).collect())
            })
        })
        .collect();
    let level_means = (0..space.dim())
        .map(|j| {
            (0..space.levels(j))
                .map(|l| {
                    // replicates missing the level fall back to the full-sample mean
                    let fallback = base_means[j][l].unwrap_or(table.mu);
                    summarize(
                        draws
                            .iter()
                            .map(|(_, m)| m[j][l].unwrap_or(fallback))
                            .collect(),
                    )
                })
                .collect()
        })
        .collect();
    table.intervals = Some(EffectIntervals {
        coverage,
        replicates,
        mu,
        mains,
        pairs,
        level_means,
    });
    Ok(table)
}

fn interval(mut values: Vec<f64>, coverage: f64) -> Interval {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let alpha = (1.0 - coverage) / 2.0;
    Interval {
        se: var.sqrt(),
        lo: quantile(&values, alpha),
        hi: quantile(&values, 1.0 - alpha),
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Mean squared risk of multiplicative shrinkage: η²·var + (1 − η)²·g².
pub fn shrinkage_risk(eta: f64, variance: f64, effect: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!("eta {eta} outside (0, 1]")));
    }
    Ok(eta * eta * variance + (1.0 - eta).powi(2) * effect * effect)
}
