use serde::Serialize;

use crate::cells::CellMatrix;
use crate::design::{Config, FactorSpace, RunLog};
use crate::error::{Error, Result};

/// Record counts per level and per pair cell, plus weighted effective sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportCounts {
    pub mains: Vec<Vec<usize>>,
    pub pairs: Vec<CellMatrix<usize>>,
    pub pairs_eff: Vec<CellMatrix<f64>>,
    pub records: usize,
}

impl SupportCounts {
    pub fn from_log(space: &FactorSpace, log: &RunLog) -> Self {
        let weighted: Vec<(&Config, f64)> = log
            .records()
            .iter()
            .map(|r| (&r.config, r.weight))
            .collect();
        Self::build(space, &weighted)
    }

    /// Unit-weight support of a bare configuration list.
    pub fn from_configs(space: &FactorSpace, configs: &[Config]) -> Self {
        let weighted: Vec<(&Config, f64)> = configs.iter().map(|c| (c, 1.0)).collect();
        Self::build(space, &weighted)
    }

    /// All-zero support: every pair cell unseen.
    pub fn empty(space: &FactorSpace) -> Self {
        Self::build(space, &[])
    }

    fn build(space: &FactorSpace, rows: &[(&Config, f64)]) -> Self {
        let mut mains: Vec<Vec<usize>> = space
            .level_counts()
            .into_iter()
            .map(|l| vec![0; l])
            .collect();
        let pairs_idx = space.pairs();
        let mut pairs: Vec<CellMatrix<usize>> = pairs_idx
            .iter()
            .map(|&(j, k)| CellMatrix::filled(space.levels(j), space.levels(k), 0))
            .collect();
        // Σw and Σw² per cell
        let mut moments: Vec<CellMatrix<(f64, f64)>> = pairs_idx
            .iter()
            .map(|&(j, k)| CellMatrix::filled(space.levels(j), space.levels(k), (0.0, 0.0)))
            .collect();
        for (x, w) in rows {
            for (j, &l) in x.iter().enumerate() {
                mains[j][l] += 1;
            }
            for (p, &(j, k)) in pairs_idx.iter().enumerate() {
                *pairs[p].get_mut(x[j], x[k]) += 1;
                let m = moments[p].get_mut(x[j], x[k]);
                m.0 += w;
                m.1 += w * w;
            }
        }
        let pairs_eff = moments
            .iter()
            .map(|m| m.map(|&(s, s2)| if s > 0.0 { s * s / s2 } else { 0.0 }))
            .collect();
        Self {
            mains,
            pairs,
            pairs_eff,
            records: rows.len(),
        }
    }

    pub fn main(&self, j: usize, l: usize) -> usize {
        self.mains[j][l]
    }

    /// n_jk(ℓ, m) for either ordering of the pair.
    pub fn pair(&self, space: &FactorSpace, j: usize, l: usize, k: usize, m: usize) -> usize {
        let p = space.pair_index(j, k);
        if j < k {
            *self.pairs[p].get(l, m)
        } else {
            *self.pairs[p].get(m, l)
        }
    }
}

/// n_eff = 1 / Σ α_i² with α_i = w_i / Σ w.
pub fn effective_sample_size(weights: &[f64]) -> Result<f64> {
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::InvalidParameter(
            "weights must be nonnegative".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroWeight);
    }
    let sum_sq: f64 = weights.iter().map(|w| (w / total).powi(2)).sum();
    Ok(1.0 / sum_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Record;
    use proptest::prelude::*;

    #[test]
    fn effective_size_examples() {
        assert!((effective_sample_size(&[1.0; 4]).unwrap() - 4.0).abs() < 1e-12);
        assert!((effective_sample_size(&[0.5, 0.5]).unwrap() - 2.0).abs() < 1e-12);
        let v = effective_sample_size(&[0.9, 0.1]).unwrap();
        assert!((v - 1.0 / 0.82).abs() < 1e-12);
        assert!((v - 1.2195).abs() < 1e-4);
        assert!(matches!(
            effective_sample_size(&[0.0, 0.0]),
            Err(Error::ZeroWeight)
        ));
    }

    #[test]
    fn full_grid_counts() {
        let s = FactorSpace::with_level_counts(&[2, 2]).unwrap();
        let grid = s.enumerate().unwrap();
        let sc = SupportCounts::from_configs(&s, &grid);
        assert!(sc.mains.iter().flatten().all(|&n| n == 2));
        assert!(sc.pairs[0].as_slice().iter().all(|&n| n == 1));

        let mut seeded = Vec::new();
        for _ in 0..3 {
            seeded.extend(grid.iter().cloned());
        }
        let sc = SupportCounts::from_configs(&s, &seeded);
        assert!(sc.pairs[0].as_slice().iter().all(|&n| n == 3));
        assert!(sc.pairs_eff[0]
            .as_slice()
            .iter()
            .all(|&n| (n - 3.0).abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn support_invariants(rows in proptest::collection::vec((0usize..3, 0usize..2, 0usize..3, 0.01f64..5.0), 1..60)) {
            let s = FactorSpace::with_level_counts(&[3, 2, 3]).unwrap();
            let records: Vec<Record> = rows.iter()
                .map(|&(a, b, c, w)| Record::new(Config(vec![a, b, c]), 0.0).with_weight(w))
                .collect();
            let log = RunLog::new(&s, records).unwrap();
            let sc = SupportCounts::from_log(&s, &log);
            // recount oracle
            for j in 0..3 {
                prop_assert_eq!(sc.mains[j].iter().sum::<usize>(), rows.len());
            }
            for (p, (j, k)) in s.pairs().into_iter().enumerate() {
                for (l, m, &n) in sc.pairs[p].iter() {
                    prop_assert!(n <= sc.mains[j][l].min(sc.mains[k][m]));
                    let cell: Vec<f64> = log.records().iter()
                        .filter(|r| r.config[j] == l && r.config[k] == m)
                        .map(|r| r.weight)
                        .collect();
                    prop_assert_eq!(cell.len(), n);
                    let eff = *sc.pairs_eff[p].get(l, m);
                    prop_assert!(eff <= n as f64 + 1e-9);
                    if n > 0 {
                        let equal = cell.iter().all(|&w| w == cell[0]);
                        prop_assert_eq!(equal, (eff - n as f64).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
