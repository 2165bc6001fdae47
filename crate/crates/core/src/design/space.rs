use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of configurations [`FactorSpace::enumerate`] will produce.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// A named factor with its ordered level labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    #[serde(deserialize_with = "labels::deserialize")]
    pub levels: Vec<String>,
}

impl Factor {
    pub fn new(
        name: impl Into<String>,
        levels: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        Self {
            name: name.into(),
            levels: levels.into_iter().map(Into::into).collect(),
        }
    }
}

/// Ordered set of discrete factors. Levels are dense indices in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FactorSpace {
    factors: Vec<Factor>,
}

#[derive(Deserialize)]
struct SpaceDoc {
    factors: Vec<Factor>,
}

impl<'de> Deserialize<'de> for FactorSpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = SpaceDoc::deserialize(d)?;
        FactorSpace::new(doc.factors).map_err(serde::de::Error::custom)
    }
}

impl FactorSpace {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::EmptySpace);
        }
        let mut names = HashSet::new();
        for f in &factors {
            if !names.insert(f.name.as_str()) {
                return Err(Error::DuplicateFactor(f.name.clone()));
            }
            if f.levels.len() < 2 {
                return Err(Error::TooFewLevels {
                    factor: f.name.clone(),
                    count: f.levels.len(),
                });
            }
            let mut seen = HashSet::new();
            for l in &f.levels {
                if !seen.insert(l.as_str()) {
                    return Err(Error::DuplicateLevel {
                        factor: f.name.clone(),
                        level: l.clone(),
                    });
                }
            }
        }
        Ok(Self { factors })
    }

    /// Space with factors named `x1..xd` and levels labelled `0..L_j`.
    pub fn with_level_counts(counts: &[usize]) -> Result<Self> {
        Self::new(
            counts
                .iter()
                .enumerate()
                .map(|(j, &l)| Factor::new(format!("x{}", j + 1), (0..l).map(|v| v.to_string())))
                .collect(),
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("factor space serializes")
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn levels(&self, j: usize) -> usize {
        self.factors[j].levels.len()
    }

    pub fn level_counts(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.levels.len()).collect()
    }

    pub fn name(&self, j: usize) -> &str {
        &self.factors[j].name
    }

    pub fn label(&self, j: usize, l: usize) -> &str {
        &self.factors[j].levels[l]
    }

    pub fn factor_index(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.name == name)
    }

    pub fn level_index(&self, j: usize, label: &str) -> Option<usize> {
        self.factors[j].levels.iter().position(|l| l == label)
    }

    /// Π L_j, computed without enumeration.
    pub fn grid_size(&self) -> u128 {
        self.factors
            .iter()
            .map(|f| f.levels.len() as u128)
            .product()
    }

    /// Factor pairs `(j, k)` with `j < k` in lexicographic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let d = self.dim();
        (0..d)
            .flat_map(|j| (j + 1..d).map(move |k| (j, k)))
            .collect()
    }

    pub fn pair_count(&self) -> usize {
        let d = self.dim();
        d * (d - 1) / 2
    }

    /// Position of the unordered pair `{j, k}` in [`FactorSpace::pairs`].
    pub fn pair_index(&self, j: usize, k: usize) -> usize {
        let (j, k) = if j < k { (j, k) } else { (k, j) };
        let d = self.dim();
        j * (2 * d - j - 1) / 2 + (k - j - 1)
    }

    pub fn contains(&self, x: &Config) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.factors)
                .all(|(&l, f)| l < f.levels.len())
    }

    pub fn check(&self, x: &Config) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(x.0.clone()))
        }
    }

    /// Mixed-radix rank of `x` in lexicographic order (last factor fastest).
    pub fn rank(&self, x: &Config) -> usize {
        x.iter()
            .zip(&self.factors)
            .fold(0, |acc, (&l, f)| acc * f.levels.len() + l)
    }

    pub fn unrank(&self, mut index: usize) -> Config {
        let mut levels = vec![0; self.dim()];
        for j in (0..self.dim()).rev() {
            let l = self.levels(j);
            levels[j] = index % l;
            index /= l;
        }
        Config(levels)
    }

    /// Lexicographic enumeration of the whole grid, refusing grids above `cap`.
    pub fn enumerate_capped(&self, cap: u128) -> Result<Vec<Config>> {
        let size = self.grid_size();
        if size > cap {
            return Err(Error::GridTooLarge { size, cap });
        }
        Ok((0..size as usize).map(|i| self.unrank(i)).collect())
    }

    pub fn enumerate(&self) -> Result<Vec<Config>> {
        self.enumerate_capped(DEFAULT_ENUMERATION_CAP)
    }

    pub fn describe(&self, x: &Config) -> Vec<&str> {
        x.iter()
            .enumerate()
            .map(|(j, &l)| self.label(j, l))
            .collect()
    }
}

/// A point of the grid: one level index per factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Config(pub Vec<usize>);

impl Config {
    pub fn new(levels: Vec<usize>) -> Self {
        Self(levels)
    }

    /// Copy of `self` with factor `j` switched to level `l`.
    pub fn with(&self, j: usize, l: usize) -> Self {
        let mut c = self.clone();
        c.0[j] = l;
        c
    }
}

impl std::ops::Deref for Config {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for Config {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, ")")
    }
}

mod labels {
    use serde::{Deserialize, Deserializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Label {
        Text(String),
        Number(serde_json::Number),
        Bool(bool),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
        let raw = Vec::<Label>::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|l| match l {
                Label::Text(s) => s,
                Label::Number(n) => n.to_string(),
                Label::Bool(b) => b.to_string(),
            })
            .collect())
    }
}
