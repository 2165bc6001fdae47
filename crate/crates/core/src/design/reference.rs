use std::collections::BTreeMap;

use crate::cells::CellMatrix;
use crate::design::{Config, FactorSpace, RunLog};
use crate::error::{Error, Result};

const MARGINAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    Uniform,
    Product,
    Empirical,
}

/// Distribution over configurations under which expectations, centering and
/// coalition values are taken.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceDistribution {
    kind: ReferenceKind,
    marginals: Vec<Vec<f64>>,
    /// Normalized weight histogram; only for the empirical kind.
    support: Vec<(Config, f64)>,
}

impl ReferenceDistribution {
    pub fn uniform(space: &FactorSpace) -> Self {
        let marginals = space
            .level_counts()
            .into_iter()
            .map(|l| vec![1.0 / l as f64; l])
            .collect();
        Self {
            kind: ReferenceKind::Uniform,
            marginals,
            support: Vec::new(),
        }
    }

    /// Independent product of explicit per-factor marginals.
    pub fn product(space: &FactorSpace, marginals: Vec<Vec<f64>>) -> Result<Self> {
        if marginals.len() != space.dim() {
            return Err(Error::InvalidReference(format!(
                "{} marginals for {} factors",
                marginals.len(),
                space.dim()
            )));
        }
        for (j, p) in marginals.iter().enumerate() {
            if p.len() != space.levels(j) {
                return Err(Error::InvalidReference(format!(
                    "marginal {j} has wrong length"
                )));
            }
            if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidReference(format!(
                    "marginal {j} has a negative entry"
                )));
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > MARGINAL_TOLERANCE {
                return Err(Error::InvalidReference(format!(
                    "marginal {j} sums to {total}"
                )));
            }
        }
        Ok(Self {
            kind: ReferenceKind::Product,
            marginals,
            support: Vec::new(),
        })
    }

    /// Normalized weight histogram of the log over configurations.
    pub fn empirical(space: &FactorSpace, log: &RunLog) -> Result<Self> {
        let total = log.total_weight();
        if !(total > 0.0) {
            return Err(Error::ZeroWeight);
        }
        let mut hist: BTreeMap<Config, f64> = BTreeMap::new();
        for r in log.records() {
            space.check(&r.config)?;
            if r.weight > 0.0 {
                *hist.entry(r.config.clone()).or_default() += r.weight / total;
            }
        }
        let mut marginals: Vec<Vec<f64>> = space
            .level_counts()
            .into_iter()
            .map(|l| vec![0.0; l])
            .collect();
        for (x, p) in &hist {
            for (j, &l) in x.iter().enumerate() {
                marginals[j][l] += p;
            }
        }
        Ok(Self {
            kind: ReferenceKind::Empirical,
            marginals,
            support: hist.into_iter().collect(),
        })
    }

    pub fn kind(&self) -> ReferenceKind {
        self.kind
    }

    pub fn is_product(&self) -> bool {
        self.kind != ReferenceKind::Empirical
    }

    pub fn marginal(&self, j: usize) -> &[f64] {
        &self.marginals[j]
    }

    pub fn marginals(&self) -> &[Vec<f64>] {
        &self.marginals
    }

    /// Configurations with positive mass (empirical kind only).
    pub fn support(&self) -> &[(Config, f64)] {
        &self.support
    }

    /// Joint cell probabilities π_jk(ℓ, m).
    pub fn pair_joint(&self, j: usize, k: usize) -> CellMatrix<f64> {
        let (lj, lk) = (self.marginals[j].len(), self.marginals[k].len());
        match self.kind {
            ReferenceKind::Empirical => {
                let mut m = CellMatrix::zeros(lj, lk);
                for (x, p) in &self.support {
                    *m.get_mut(x[j], x[k]) += p;
                }
                m
            }
            _ => CellMatrix::from_fn(lj, lk, |l, m| self.marginals[j][l] * self.marginals[k][m]),
        }
    }

    /// Product of the marginals: the independent reference with the same one-way laws.
    pub fn to_product(&self) -> Self {
        Self {
            kind: ReferenceKind::Product,
            marginals: self.marginals.clone(),
            support: Vec::new(),
        }
    }

    /// Probability of a full configuration.
    pub fn prob(&self, x: &Config) -> f64 {
        match self.kind {
            ReferenceKind::Empirical => self
                .support
                .binary_search_by(|(c, _)| c.cmp(x))
                .map(|i| self.support[i].1)
                .unwrap_or(0.0),
            _ => x
                .iter()
                .enumerate()
                .map(|(j, &l)| self.marginals[j][l])
                .product(),
        }
    }
}
