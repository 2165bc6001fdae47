use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::cells::CellMatrix;
use crate::design::{Config, FactorSpace, ReferenceDistribution, SupportCounts};
use crate::error::{Error, Result};

const CENTERING_SWEEPS: usize = 10_000;

/// Which estimation path produced a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Cm,
    Sf,
    Truth,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Cm => "cm",
            Provenance::Sf => "sf",
            Provenance::Truth => "truth",
        })
    }
}

/// Percentile interval with the bootstrap standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Bootstrap uncertainty attached to an [`EffectTable`].
#[derive(Debug, Clone, PartialEq)]
pub struct EffectIntervals {
    pub coverage: f64,
    pub replicates: usize,
    pub mu: Interval,
    pub mains: Vec<Vec<Interval>>,
    pub pairs: Vec<CellMatrix<Interval>>,
    /// Intervals for the raw conditional level means Ê[f | X_j = ℓ].
    pub level_means: Vec<Vec<Interval>>,
}

/// Baseline plus centered main-effect and pairwise-interaction tables.
///
/// Pair tables are stored for `j < k` in [`FactorSpace::pairs`] order with
/// rows indexed by the level of `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectTable {
    space: FactorSpace,
    pub mu: f64,
    pub mains: Vec<Vec<f64>>,
    pub pairs: Vec<CellMatrix<f64>>,
    pub provenance: Provenance,
    pub unsupported_mains: Vec<Vec<bool>>,
    pub unsupported_pairs: Vec<CellMatrix<bool>>,
    pub support: Option<SupportCounts>,
    pub intervals: Option<EffectIntervals>,
}

impl EffectTable {
    pub fn zeros(space: &FactorSpace, provenance: Provenance) -> Self {
        let mains = space
            .level_counts()
            .into_iter()
            .map(|l| vec![0.0; l])
            .collect();
        let pairs = space
            .pairs()
            .into_iter()
            .map(|(j, k)| CellMatrix::zeros(space.levels(j), space.levels(k)))
            .collect();
        let unsupported_mains = space
            .level_counts()
            .into_iter()
            .map(|l| vec![false; l])
            .collect();
        let unsupported_pairs = space
            .pairs()
            .into_iter()
            .map(|(j, k)| CellMatrix::filled(space.levels(j), space.levels(k), false))
            .collect();
        Self {
            space: space.clone(),
            mu: 0.0,
            mains,
            pairs,
            provenance,
            unsupported_mains,
            unsupported_pairs,
            support: None,
            intervals: None,
        }
    }

    pub fn space(&self) -> &FactorSpace {
        &self.space
    }

    pub fn main(&self, j: usize, l: usize) -> f64 {
        self.mains[j][l]
    }

    /// g_jk(ℓ, m) for either ordering of `(j, k)`.
    pub fn pair(&self, j: usize, l: usize, k: usize, m: usize) -> f64 {
        let p = self.space.pair_index(j, k);
        if j < k {
            *self.pairs[p].get(l, m)
        } else {
            *self.pairs[p].get(m, l)
        }
    }

    pub fn pair_matrix(&self, j: usize, k: usize) -> CellMatrix<f64> {
        let p = self.space.pair_index(j, k);
        if j < k {
            self.pairs[p].clone()
        } else {
            self.pairs[p].transposed()
        }
    }

    /// μ + Σ g_j(x_j) + Σ_{j<k} g_jk(x_j, x_k).
    pub fn predict(&self, x: &Config) -> f64 {
        let mut v = self.mu;
        for (j, &l) in x.iter().enumerate() {
            v += self.mains[j][l];
        }
        for (p, (j, k)) in self.space.pairs().into_iter().enumerate() {
            v += *self.pairs[p].get(x[j], x[k]);
        }
        v
    }

    /// Copy with every pair table zeroed (mains-only scoring).
    pub fn mains_only(&self) -> Self {
        let mut t = self.clone();
        for p in &mut t.pairs {
            p.scale(0.0);
        }
        t
    }

    /// Enforces Σ_ℓ π_j(ℓ) g_j(ℓ) = 0 and double centering of every pair
    /// table under the conditionals of π_jk.
    pub fn center(&mut self, reference: &ReferenceDistribution) {
        for (j, main) in self.mains.iter_mut().enumerate() {
            let pi = reference.marginal(j);
            let mean: f64 = main.iter().zip(pi).map(|(g, p)| g * p).sum();
            main.iter_mut().for_each(|g| *g -= mean);
        }
        for (p, (j, k)) in self.space.pairs().into_iter().enumerate() {
            double_center(
                &mut self.pairs[p],
                &reference.pair_joint(j, k),
                reference.is_product(),
            );
        }
    }

    /// Largest violation of the centering conditions under `reference`.
    pub fn centering_violation(&self, reference: &ReferenceDistribution) -> f64 {
        let mut worst = 0.0f64;
        for (j, main) in self.mains.iter().enumerate() {
            let mean: f64 = main
                .iter()
                .zip(reference.marginal(j))
                .map(|(g, p)| g * p)
                .sum();
            worst = worst.max(mean.abs());
        }
        for (p, (j, k)) in self.space.pairs().into_iter().enumerate() {
            let joint = reference.pair_joint(j, k);
            worst = worst.max(double_centering_violation(&self.pairs[p], &joint));
        }
        worst
    }

    /// Entrywise maximum |a − b| over μ, mains and pairs.
    pub fn max_abs_diff(&self, other: &EffectTable) -> f64 {
        let mut worst = (self.mu - other.mu).abs();
        for (a, b) in self
            .mains
            .iter()
            .flatten()
            .zip(other.mains.iter().flatten())
        {
            worst = worst.max((a - b).abs());
        }
        for (a, b) in self.pairs.iter().zip(&other.pairs) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                worst = worst.max((x - y).abs());
            }
        }
        worst
    }

    /// Root mean square of entrywise differences over the main and pair tables.
    pub fn rms_diff(&self, other: &EffectTable) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (a, b) in self
            .mains
            .iter()
            .flatten()
            .zip(other.mains.iter().flatten())
        {
            sum += (a - b).powi(2);
            count += 1;
        }
        for (a, b) in self.pairs.iter().zip(&other.pairs) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                sum += (x - y).powi(2);
                count += 1;
            }
        }
        (sum / count as f64).sqrt()
    }

    /// Entries as a flat vector: mains in factor order, then pairs.
    pub fn effect_vector(&self) -> Vec<f64> {
        self.mains
            .iter()
            .flatten()
            .copied()
            .chain(self.pairs.iter().flat_map(|p| p.as_slice().iter().copied()))
            .collect()
    }

    /// Table for a·f + b.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        let mut t = self.clone();
        t.mu = a * self.mu + b;
        t.mains.iter_mut().flatten().for_each(|g| *g *= a);
        t.pairs.iter_mut().for_each(|p| p.scale(a));
        t.intervals = None;
        t
    }

    pub fn to_json_value(&self) -> Value {
        let s = &self.space;
        let mut mains = Map::new();
        for j in 0..s.dim() {
            let mut row = Map::new();
            for l in 0..s.levels(j) {
                row.insert(s.label(j, l).to_string(), json!(self.mains[j][l]));
            }
            mains.insert(s.name(j).to_string(), Value::Object(row));
        }
        let mut pairs = Map::new();
        for (p, (j, k)) in s.pairs().into_iter().enumerate() {
            let mut cells = Map::new();
            for (l, m, v) in self.pairs[p].iter() {
                cells.insert(format!("{}|{}", s.label(j, l), s.label(k, m)), json!(v));
            }
            pairs.insert(format!("{}|{}", s.name(j), s.name(k)), Value::Object(cells));
        }
        let mut unsupported = Vec::new();
        for j in 0..s.dim() {
            for l in 0..s.levels(j) {
                if self.unsupported_mains[j][l] {
                    unsupported.push(json!(format!("{}={}", s.name(j), s.label(j, l))));
                }
            }
        }
        for (p, (j, k)) in s.pairs().into_iter().enumerate() {
            for (l, m, &flag) in self.unsupported_pairs[p].iter() {
                if flag {
                    unsupported.push(json!(format!(
                        "{}={}|{}={}",
                        s.name(j),
                        s.label(j, l),
                        s.name(k),
                        s.label(k, m)
                    )));
                }
            }
        }
        let mut doc = Map::new();
        doc.insert("mu".into(), json!(self.mu));
        doc.insert("mains".into(), Value::Object(mains));
        doc.insert("pairs".into(), Value::Object(pairs));
        doc.insert("provenance".into(), json!(self.provenance));
        doc.insert("unsupported".into(), Value::Array(unsupported));
        doc.insert(
            "support".into(),
            self.support
                .as_ref()
                .map(|sc| support_json(s, sc))
                .unwrap_or(Value::Null),
        );
        doc.insert(
            "ci".into(),
            self.intervals
                .as_ref()
                .map(|iv| intervals_json(s, iv))
                .unwrap_or(Value::Null),
        );
        Value::Object(doc)
    }

    /// Sorted-key JSON with shortest round-trip float formatting.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("table serializes")
    }

    /// Reads the effect values (`mu`, `mains`, `pairs`, `provenance`) back into a table.
    pub fn from_json(space: &FactorSpace, text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)?;
        let bad = |m: &str| Error::InvalidParameter(format!("effect table JSON: {m}"));
        let provenance =
            serde_json::from_value(doc.get("provenance").cloned().unwrap_or(json!("cm")))?;
        let mut t = Self::zeros(space, provenance);
        t.mu = doc
            .get("mu")
            .and_then(Value::as_f64)
            .ok_or_else(|| bad("missing mu"))?;
        let mains = doc
            .get("mains")
            .and_then(Value::as_object)
            .ok_or_else(|| bad("missing mains"))?;
        for j in 0..space.dim() {
            let row = mains
                .get(space.name(j))
                .and_then(Value::as_object)
                .ok_or_else(|| bad(space.name(j)))?;
            for l in 0..space.levels(j) {
                t.mains[j][l] = row
                    .get(space.label(j, l))
                    .and_then(Value::as_f64)
                    .ok_or_else(|| bad(space.label(j, l)))?;
            }
        }
        let pairs = doc
            .get("pairs")
            .and_then(Value::as_object)
            .ok_or_else(|| bad("missing pairs"))?;
        for (p, (j, k)) in space.pairs().into_iter().enumerate() {
            let key = format!("{}|{}", space.name(j), space.name(k));
            let cells = pairs
                .get(&key)
                .and_then(Value::as_object)
                .ok_or_else(|| bad(&key))?;
            for l in 0..space.levels(j) {
                for m in 0..space.levels(k) {
                    let ck = format!("{}|{}", space.label(j, l), space.label(k, m));
                    t.pairs[p].set(
                        l,
                        m,
                        cells
                            .get(&ck)
                            .and_then(Value::as_f64)
                            .ok_or_else(|| bad(&ck))?,
                    );
                }
            }
        }
        Ok(t)
    }
}

fn support_json(s: &FactorSpace, sc: &SupportCounts) -> Value {
    let mut mains = Map::new();
    for j in 0..s.dim() {
        let mut row = Map::new();
        for l in 0..s.levels(j) {
            row.insert(s.label(j, l).to_string(), json!(sc.mains[j][l]));
        }
        mains.insert(s.name(j).to_string(), Value::Object(row));
    }
    let mut pairs = Map::new();
    for (p, (j, k)) in s.pairs().into_iter().enumerate() {
        let mut cells = Map::new();
        for (l, m, n) in sc.pairs[p].iter() {
            cells.insert(format!("{}|{}", s.label(j, l), s.label(k, m)), json!(n));
        }
        pairs.insert(format!("{}|{}", s.name(j), s.name(k)), Value::Object(cells));
    }
    json!({ "records": sc.records, "mains": mains, "pairs": pairs })
}

fn intervals_json(s: &FactorSpace, iv: &EffectIntervals) -> Value {
    let mut mains = Map::new();
    let mut means = Map::new();
    for j in 0..s.dim() {
        let mut row = Map::new();
        let mut mrow = Map::new();
        for l in 0..s.levels(j) {
            row.insert(s.label(j, l).to_string(), json!(iv.mains[j][l]));
            mrow.insert(s.label(j, l).to_string(), json!(iv.level_means[j][l]));
        }
        mains.insert(s.name(j).to_string(), Value::Object(row));
        means.insert(s.name(j).to_string(), Value::Object(mrow));
    }
    let mut pairs = Map::new();
    for (p, (j, k)) in s.pairs().into_iter().enumerate() {
        let mut cells = Map::new();
        for (l, m, v) in iv.pairs[p].iter() {
            cells.insert(format!("{}|{}", s.label(j, l), s.label(k, m)), json!(v));
        }
        pairs.insert(format!("{}|{}", s.name(j), s.name(k)), Value::Object(cells));
    }
    json!({
        "coverage": iv.coverage,
        "replicates": iv.replicates,
        "mu": iv.mu,
        "mains": mains,
        "pairs": pairs,
        "level_means": means,
    })
}

/// Double centering under the conditionals of `joint`. One row pass followed by
/// one column pass is exact for product joints; otherwise alternate to convergence.
pub(crate) fn double_center(g: &mut CellMatrix<f64>, joint: &CellMatrix<f64>, product: bool) {
    let sweeps = if product { 1 } else { CENTERING_SWEEPS };
    for _ in 0..sweeps {
        center_rows(g, joint);
        center_cols(g, joint);
        if product {
            break;
        }
        let scale = g.max_abs().max(1.0);
        if double_centering_violation(g, joint) <= 1e-15 * scale {
            break;
        }
    }
}

fn center_rows(g: &mut CellMatrix<f64>, joint: &CellMatrix<f64>) {
    for l in 0..g.rows() {
        let mass: f64 = (0..g.cols()).map(|m| joint.get(l, m)).sum();
        if mass <= 0.0 {
            continue;
        }
        let mean: f64 = (0..g.cols())
            .map(|m| joint.get(l, m) * g.get(l, m))
            .sum::<f64>()
            / mass;
        for m in 0..g.cols() {
            *g.get_mut(l, m) -= mean;
        }
    }
}

fn center_cols(g: &mut CellMatrix<f64>, joint: &CellMatrix<f64>) {
    for m in 0..g.cols() {
        let mass: f64 = (0..g.rows()).map(|l| joint.get(l, m)).sum();
        if mass <= 0.0 {
            continue;
        }
        let mean: f64 = (0..g.rows())
            .map(|l| joint.get(l, m) * g.get(l, m))
            .sum::<f64>()
            / mass;
        for l in 0..g.rows() {
            *g.get_mut(l, m) -= mean;
        }
    }
}

/// Largest absolute row or column conditional mean.
pub(crate) fn double_centering_violation(g: &CellMatrix<f64>, joint: &CellMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for l in 0..g.rows() {
        let mass: f64 = (0..g.cols()).map(|m| joint.get(l, m)).sum();
        if mass > 0.0 {
            let mean: f64 = (0..g.cols())
                .map(|m| joint.get(l, m) * g.get(l, m))
                .sum::<f64>()
                / mass;
            worst = worst.max(mean.abs());
        }
    }
    for m in 0..g.cols() {
        let mass: f64 = (0..g.rows()).map(|l| joint.get(l, m)).sum();
        if mass > 0.0 {
            let mean: f64 = (0..g.rows())
                .map(|l| joint.get(l, m) * g.get(l, m))
                .sum::<f64>()
                / mass;
            worst = worst.max(mean.abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor_table() -> EffectTable {
        let s = FactorSpace::with_level_counts(&[2, 2]).unwrap();
        let mut t = EffectTable::zeros(&s, Provenance::Truth);
        t.mu = 0.5;
        t.pairs[0] = CellMatrix::from_fn(2, 2, |l, m| if l == m { -0.5 } else { 0.5 });
        t
    }

    #[test]
    fn pair_access_is_symmetric() {
        let t = xor_table();
        assert_eq!(t.pair(0, 0, 1, 1), 0.5);
        assert_eq!(t.pair(1, 1, 0, 0), 0.5);
        assert_eq!(t.pair_matrix(1, 0), t.pairs[0].transposed());
    }

    #[test]
    fn predict_sums_terms() {
        let t = xor_table();
        assert_eq!(t.predict(&Config(vec![0, 1])), 1.0);
        assert_eq!(t.predict(&Config(vec![1, 1])), 0.0);
    }

    #[test]
    fn centering_under_uniform_and_product() {
        let s = FactorSpace::with_level_counts(&[2, 3]).unwrap();
        let mut t = EffectTable::zeros(&s, Provenance::Cm);
        t.mains[1] = vec![1.0, 2.0, 6.0];
        t.pairs[0] = CellMatrix::from_fn(2, 3, |l, m| (l * 3 + m) as f64 * 0.7 + (m * m) as f64);
        let uniform = ReferenceDistribution::uniform(&s);
        t.center(&uniform);
        assert!(t.centering_violation(&uniform) < 1e-12);
        let product =
            ReferenceDistribution::product(&s, vec![vec![0.2, 0.8], vec![0.5, 0.3, 0.2]]).unwrap();
        t.center(&product);
        assert!(t.centering_violation(&product) < 1e-12);
    }

    #[test]
    fn centering_under_dependent_joint_converges() {
        let joint = CellMatrix::from_fn(3, 3, |l, m| {
            [[0.2, 0.05, 0.0], [0.1, 0.2, 0.05], [0.0, 0.1, 0.3]][l][m]
        });
        let mut g =
            CellMatrix::from_fn(3, 3, |l, m| (l as f64 - m as f64).powi(3) + 0.3 * l as f64);
        double_center(&mut g, &joint, false);
        assert!(double_centering_violation(&g, &joint) < 1e-12);
    }

    #[test]
    fn json_round_trip_of_values() {
        let t = xor_table();
        let text = t.to_json();
        assert!(text.contains("\"x1|x2\""));
        assert!(text.contains("\"0|1\": 0.5"));
        let back = EffectTable::from_json(t.space(), &text).unwrap();
        assert_eq!(back.max_abs_diff(&t), 0.0);
        assert_eq!(back.provenance, Provenance::Truth);
    }

    #[test]
    fn json_keys_are_sorted() {
        let t = xor_table();
        let text = serde_json::to_string(&t.to_json_value()).unwrap();
        let ci = text.find("\"ci\"").unwrap();
        let mains = text.find("\"mains\"").unwrap();
        let mu = text.find("\"mu\"").unwrap();
        let pairs = text.find("\"pairs\"").unwrap();
        assert!(ci < mains && mains < mu && mu < pairs);
    }
}
