//! Risk-adjusted objective J(x) = f̃(x) − λ_risk R(x) − λ_cost C(x).

use std::collections::{BTreeMap, HashSet};

use serde_json::{json, Map, Value};

use crate::design::{Config, FactorSpace, SupportCounts};
use crate::effects::EffectTable;
use crate::error::{Error, Result};

pub const DEFAULT_GAMMA: f64 = 1.0;
pub const DEFAULT_LAMBDA_RISK: f64 = 1.0;
pub const DEFAULT_LAMBDA_COST: f64 = 0.0;

/// Additive cost C(x) = offset + Σ_j c_j(x_j).
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    costs: Vec<Vec<f64>>,
    offset: f64,
}

impl CostModel {
    pub fn zero(space: &FactorSpace) -> Self {
        Self {
            costs: (0..space.dim())
                .map(|j| vec![0.0; space.levels(j)])
                .collect(),
            offset: 0.0,
        }
    }

    pub fn new(space: &FactorSpace, costs: Vec<Vec<f64>>, offset: f64) -> Result<Self> {
        if costs.len() != space.dim()
            || costs
                .iter()
                .enumerate()
                .any(|(j, c)| c.len() != space.levels(j))
        {
            return Err(Error::SpaceMismatch);
        }
        if !offset.is_finite() || costs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("costs must be finite".into()));
        }
        Ok(Self { costs, offset })
    }

    pub fn level_cost(&self, j: usize, l: usize) -> f64 {
        self.costs[j][l]
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn cost(&self, x: &Config) -> f64 {
        self.offset
            + x.iter()
                .enumerate()
                .map(|(j, &l)| self.costs[j][l])
                .sum::<f64>()
    }

    pub fn is_zero(&self) -> bool {
        self.offset == 0.0 && self.costs.iter().flatten().all(|&c| c == 0.0)
    }
}

/// ΔC_j(ℓ | x) = c_j(ℓ) − c_j(x_j).
pub fn delta_cost(cost: &CostModel, j: usize, l: usize, x: &Config) -> f64 {
    cost.costs[j][l] - cost.costs[j][x[j]]
}

/// Penalty weights, per-pair γ_jk, and the feasible set Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub lambda_risk: f64,
    pub lambda_cost: f64,
    gamma: Vec<f64>,
    banned_levels: Vec<Vec<bool>>,
    banned_configs: HashSet<Config>,
}

impl ObjectiveSpec {
    pub fn new(
        space: &FactorSpace,
        lambda_risk: f64,
        lambda_cost: f64,
        gamma: f64,
    ) -> Result<Self> {
        Self::with_pair_gammas(
            space,
            lambda_risk,
            lambda_cost,
            vec![gamma; space.pair_count()],
        )
    }

    pub fn with_pair_gammas(
        space: &FactorSpace,
        lambda_risk: f64,
        lambda_cost: f64,
        gamma: Vec<f64>,
    ) -> Result<Self> {
        if !(lambda_risk >= 0.0)
            || !(lambda_cost >= 0.0)
            || !lambda_risk.is_finite()
            || !lambda_cost.is_finite()
        {
            return Err(Error::InvalidParameter(
                "penalty weights must be nonnegative".into(),
            ));
        }
        if gamma.len() != space.pair_count() {
            return Err(Error::LengthMismatch(gamma.len(), space.pair_count()));
        }
        if gamma.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
            return Err(Error::InvalidParameter(
                "gamma must be strictly positive".into(),
            ));
        }
        Ok(Self {
            lambda_risk,
            lambda_cost,
            gamma,
            banned_levels: (0..space.dim())
                .map(|j| vec![false; space.levels(j)])
                .collect(),
            banned_configs: HashSet::new(),
        })
    }

    pub fn default_for(space: &FactorSpace) -> Self {
        Self::new(
            space,
            DEFAULT_LAMBDA_RISK,
            DEFAULT_LAMBDA_COST,
            DEFAULT_GAMMA,
        )
        .expect("defaults are valid")
    }

    pub fn gamma(&self, pair: usize) -> f64 {
        self.gamma[pair]
    }

    /// Replaces every pair's γ with one shared value, keeping Ω.
    pub fn set_shared_gamma(&mut self, gamma: f64) -> Result<()> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(
                "gamma must be strictly positive".into(),
            ));
        }
        self.gamma.iter_mut().for_each(|g| *g = gamma);
        Ok(())
    }

    pub fn ban_level(&mut self, j: usize, l: usize) {
        self.banned_levels[j][l] = true;
    }

    pub fn ban_config(&mut self, x: Config) {
        self.banned_configs.insert(x);
    }

    pub fn level_allowed(&self, j: usize, l: usize) -> bool {
        !self.banned_levels[j][l]
    }

    pub fn is_feasible(&self, x: &Config) -> bool {
        x.iter()
            .enumerate()
            .all(|(j, &l)| !self.banned_levels[j][l])
            && !self.banned_configs.contains(x)
    }

    pub fn check_feasible(&self, x: &Config) -> Result<()> {
        if self.is_feasible(x) {
            Ok(())
        } else {
            Err(Error::Infeasible(x.0.clone()))
        }
    }

    pub fn banned_configs(&self) -> impl Iterator<Item = &Config> {
        self.banned_configs.iter()
    }
}

/// f̃(x) = μ̂ + Σ_j g̃_j(x_j) + Σ_{j<k} g̃_jk(x_j, x_k).
pub fn two_factor_predict(table: &EffectTable, x: &Config) -> f64 {
    table.predict(x)
}

/// r = γ / (n + γ).
pub fn risk_term(n: usize, gamma: f64) -> f64 {
    gamma / (n as f64 + gamma)
}

/// R(x) = Σ_{j<k} γ_jk / (n_jk(x_j, x_k) + γ_jk).
pub fn risk_penalty(
    space: &FactorSpace,
    support: &SupportCounts,
    x: &Config,
    spec: &ObjectiveSpec,
) -> f64 {
    space
        .pairs()
        .into_iter()
        .enumerate()
        .map(|(p, (j, k))| risk_term(*support.pairs[p].get(x[j], x[k]), spec.gamma[p]))
        .sum()
}

/// The components of J at one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    pub prediction: f64,
    pub risk: f64,
    pub cost: f64,
    pub value: f64,
}

/// J(x); configurations outside Ω are an error.
pub fn objective(
    table: &EffectTable,
    x: &Config,
    support: &SupportCounts,
    spec: &ObjectiveSpec,
    cost: &CostModel,
) -> Result<f64> {
    Ok(objective_terms(table, x, support, spec, cost)?.value)
}

pub fn objective_terms(
    table: &EffectTable,
    x: &Config,
    support: &SupportCounts,
    spec: &ObjectiveSpec,
    cost: &CostModel,
) -> Result<ObjectiveTerms> {
    table.space().check(x)?;
    spec.check_feasible(x)?;
    let prediction = two_factor_predict(table, x);
    let risk = risk_penalty(table.space(), support, x, spec);
    let c = cost.cost(x);
    Ok(ObjectiveTerms {
        prediction,
        risk,
        cost: c,
        value: prediction - spec.lambda_risk * risk - spec.lambda_cost * c,
    })
}

/// Everything needed to evaluate J, bundled for the solver.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub table: &'a EffectTable,
    pub support: &'a SupportCounts,
    pub spec: &'a ObjectiveSpec,
    pub cost: &'a CostModel,
}

impl<'a> Problem<'a> {
    pub fn new(
        table: &'a EffectTable,
        support: &'a SupportCounts,
        spec: &'a ObjectiveSpec,
        cost: &'a CostModel,
    ) -> Self {
        Self {
            table,
            support,
            spec,
            cost,
        }
    }

    pub fn space(&self) -> &'a FactorSpace {
        self.table.space()
    }

    pub fn value(&self, x: &Config) -> Result<f64> {
        objective(self.table, x, self.support, self.spec, self.cost)
    }

    pub fn terms(&self, x: &Config) -> Result<ObjectiveTerms> {
        objective_terms(self.table, x, self.support, self.spec, self.cost)
    }

    /// r_jk(ℓ, m) for pair index `p`.
    pub fn pair_risk(&self, p: usize, l: usize, m: usize) -> f64 {
        risk_term(*self.support.pairs[p].get(l, m), self.spec.gamma[p])
    }

    /// F_j(ℓ | x) without the feasibility check.
    pub(crate) fn local_unchecked(&self, j: usize, l: usize, x: &Config) -> f64 {
        let space = self.space();
        let mut f = self.table.main(j, l) - self.spec.lambda_cost * delta_cost(self.cost, j, l, x);
        for k in (0..space.dim()).filter(|&k| k != j) {
            let r = if j < k {
                self.pair_risk(space.pair_index(j, k), l, x[k])
            } else {
                self.pair_risk(space.pair_index(k, j), x[k], l)
            };
            f += self.table.pair(j, l, k, x[k]) - self.spec.lambda_risk * r;
        }
        f
    }
}

/// Objective settings and cost model as one JSON document keyed by factor and
/// level names.
pub fn objective_to_json(space: &FactorSpace, spec: &ObjectiveSpec, cost: &CostModel) -> String {
    let mut gamma = Map::new();
    for (p, (j, k)) in space.pairs().into_iter().enumerate() {
        gamma.insert(
            format!("{}|{}", space.name(j), space.name(k)),
            json!(spec.gamma[p]),
        );
    }
    let mut banned_levels = Map::new();
    for j in 0..space.dim() {
        let levels: Vec<&str> = (0..space.levels(j))
            .filter(|&l| spec.banned_levels[j][l])
            .map(|l| space.label(j, l))
            .collect();
        if !levels.is_empty() {
            banned_levels.insert(space.name(j).to_string(), json!(levels));
        }
    }
    let mut configs: Vec<&Config> = spec.banned_configs.iter().collect();
    configs.sort();
    let banned_configs: Vec<Value> = configs
        .into_iter()
        .map(|x| {
            let m: BTreeMap<&str, &str> = (0..space.dim())
                .map(|j| (space.name(j), space.label(j, x[j])))
                .collect();
            json!(m)
        })
        .collect();
    let mut costs = Map::new();
    for j in 0..space.dim() {
        let m: Map<String, Value> = (0..space.levels(j))
            .map(|l| (space.label(j, l).to_string(), json!(cost.costs[j][l])))
            .collect();
        costs.insert(space.name(j).to_string(), Value::Object(m));
    }
    let doc = json!({
        "lambda_risk": spec.lambda_risk,
        "lambda_cost": spec.lambda_cost,
        "gamma": gamma,
        "banned_levels": banned_levels,
        "banned_configs": banned_configs,
        "costs": costs,
        "cost_offset": cost.offset,
    });
    serde_json::to_string_pretty(&doc).expect("json values serialize")
}

/// Parses [`objective_to_json`] output. Missing keys take their defaults;
/// `gamma` may be a single number shared by every pair.
pub fn objective_from_json(space: &FactorSpace, text: &str) -> Result<(ObjectiveSpec, CostModel)> {
    let doc: Value = serde_json::from_str(text)?;
    let obj = doc
        .as_object()
        .ok_or_else(|| bad("objective document must be a JSON object"))?;
    let number = |key: &str, default: f64| -> Result<f64> {
        match obj.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| bad(&format!("`{key}` must be a number"))),
        }
    };
    let lambda_risk = number("lambda_risk", DEFAULT_LAMBDA_RISK)?;
    let lambda_cost = number("lambda_cost", DEFAULT_LAMBDA_COST)?;
    let mut gamma = vec![DEFAULT_GAMMA; space.pair_count()];
    match obj.get("gamma") {
        None => {}
        Some(Value::Object(m)) => {
            for (key, v) in m {
                let (a, b) = key
                    .split_once('|')
                    .ok_or_else(|| bad(&format!("bad pair key `{key}`")))?;
                let j = factor(space, a)?;
                let k = factor(space, b)?;
                if j == k {
                    return Err(bad(&format!("bad pair key `{key}`")));
                }
                gamma[space.pair_index(j, k)] = v
                    .as_f64()
                    .ok_or_else(|| bad("gamma entries must be numbers"))?;
            }
        }
        Some(v) => gamma.fill(
            v.as_f64()
                .ok_or_else(|| bad("`gamma` must be a number or object"))?,
        ),
    }
    let mut spec = ObjectiveSpec::with_pair_gammas(space, lambda_risk, lambda_cost, gamma)?;
    if let Some(v) = obj.get("banned_levels") {
        let m = v
            .as_object()
            .ok_or_else(|| bad("`banned_levels` must be an object"))?;
        for (name, levels) in m {
            let j = factor(space, name)?;
            for label in levels
                .as_array()
                .ok_or_else(|| bad("banned levels must be a list"))?
            {
                spec.ban_level(j, level(space, j, label)?);
            }
        }
    }
    if let Some(v) = obj.get("banned_configs") {
        for entry in v
            .as_array()
            .ok_or_else(|| bad("`banned_configs` must be a list"))?
        {
            let m = entry
                .as_object()
                .ok_or_else(|| bad("banned configs must be objects"))?;
            let mut x = vec![usize::MAX; space.dim()];
            for (name, label) in m {
                let j = factor(space, name)?;
                x[j] = level(space, j, label)?;
            }
            if let Some(j) = x.iter().position(|&l| l == usize::MAX) {
                return Err(Error::MissingColumn(space.name(j).to_string()));
            }
            spec.ban_config(Config(x));
        }
    }
    let mut costs: Vec<Vec<f64>> = (0..space.dim())
        .map(|j| vec![0.0; space.levels(j)])
        .collect();
    if let Some(v) = obj.get("costs") {
        let m = v
            .as_object()
            .ok_or_else(|| bad("`costs` must be an object"))?;
        for (name, levels) in m {
            let j = factor(space, name)?;
            for (label, c) in levels
                .as_object()
                .ok_or_else(|| bad("cost entries must be objects"))?
            {
                let l = level(space, j, &Value::String(label.clone()))?;
                costs[j][l] = c.as_f64().ok_or_else(|| bad("costs must be numbers"))?;
            }
        }
    }
    let cost = CostModel::new(space, costs, number("cost_offset", 0.0)?)?;
    Ok((spec, cost))
}

fn bad(message: &str) -> Error {
    Error::InvalidParameter(message.to_string())
}

fn factor(space: &FactorSpace, name: &str) -> Result<usize> {
    space
        .factor_index(name)
        .ok_or_else(|| Error::UnknownColumn(name.to_string()))
}

fn level(space: &FactorSpace, j: usize, label: &Value) -> Result<usize> {
    let text = match label {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    space.level_index(j, &text).ok_or_else(|| {
        bad(&format!(
            "unknown level `{text}` for factor `{}`",
            space.name(j)
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::Provenance;

    fn xor() -> (FactorSpace, EffectTable) {
        let s = FactorSpace::with_level_counts(&[2, 2]).unwrap();
        let mut t = EffectTable::zeros(&s, Provenance::Truth);
        t.mu = 0.5;
        for l in 0..2 {
            for m in 0..2 {
                t.pairs[0].set(l, m, if l == m { -0.5 } else { 0.5 });
            }
        }
        (s, t)
    }

    #[test]
    fn prediction_examples() {
        let (s, t) = xor();
        assert_eq!(two_factor_predict(&t, &Config(vec![0, 1])), 1.0);
        let z = EffectTable::zeros(&s, Provenance::Truth);
        assert_eq!(two_factor_predict(&z, &Config(vec![1, 1])), 0.0);
    }

    #[test]
    fn risk_examples() {
        assert_eq!(risk_term(0, 1.0), 1.0);
        assert_eq!(risk_term(9, 1.0), 0.1);
        let s = FactorSpace::with_level_counts(&[2, 2, 2]).unwrap();
        let support = SupportCounts::from_configs(&s, &[Config(vec![0, 0, 0])]);
        let spec = ObjectiveSpec::default_for(&s);
        assert_eq!(
            risk_penalty(&s, &support, &Config(vec![0, 0, 0]), &spec),
            1.5
        );
        assert_eq!(
            risk_penalty(&s, &support, &Config(vec![1, 1, 1]), &spec),
            3.0
        );
    }

    #[test]
    fn cost_linearity_and_infeasibility() {
        let (s, t) = xor();
        let support = SupportCounts::empty(&s);
        let free = ObjectiveSpec::new(&s, 0.0, 0.0, 1.0).unwrap();
        let costed = ObjectiveSpec::new(&s, 0.0, 1.0, 1.0).unwrap();
        let cost = CostModel::new(&s, vec![vec![0.0, 0.3], vec![0.0, 0.0]], 0.0).unwrap();
        let x = Config(vec![1, 0]);
        let a = objective(&t, &x, &support, &free, &cost).unwrap();
        let b = objective(&t, &x, &support, &costed, &cost).unwrap();
        assert_eq!(a, two_factor_predict(&t, &x));
        assert!((a - b - 0.3).abs() < 1e-15);
        let mut banned = free.clone();
        banned.ban_level(0, 1);
        assert!(matches!(
            objective(&t, &x, &support, &banned, &cost),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn delta_cost_examples() {
        let s = FactorSpace::with_level_counts(&[2, 3]).unwrap();
        let cost = CostModel::new(&s, vec![vec![0.0, 0.5], vec![1.0, 2.0, 4.0]], 1.0).unwrap();
        let x = Config(vec![0, 2]);
        assert_eq!(delta_cost(&cost, 0, 0, &x), 0.0);
        assert_eq!(delta_cost(&cost, 0, 1, &x), 0.5);
        let y = x.with(1, 0);
        assert_eq!(delta_cost(&cost, 1, 0, &x), -delta_cost(&cost, 1, 2, &y));
        assert_eq!(cost.cost(&y) - cost.cost(&x), delta_cost(&cost, 1, 0, &x));
    }

    #[test]
    fn parameter_validation() {
        let s = FactorSpace::with_level_counts(&[2, 2]).unwrap();
        assert!(ObjectiveSpec::new(&s, -1.0, 0.0, 1.0).is_err());
        assert!(ObjectiveSpec::new(&s, 1.0, 0.0, 0.0).is_err());
        assert!(CostModel::new(&s, vec![vec![f64::NAN, 0.0], vec![0.0, 0.0]], 0.0).is_err());
        assert!(CostModel::new(&s, vec![vec![0.0, 0.0]], 0.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = FactorSpace::new(vec![
            crate::design::Factor::new("opt", ["sgd", "adam"]),
            crate::design::Factor::new("lr", ["0.1", "0.01", "0.001"]),
            crate::design::Factor::new("bs", ["32", "64"]),
        ])
        .unwrap();
        let mut spec = ObjectiveSpec::with_pair_gammas(&s, 0.5, 2.0, vec![1.0, 2.0, 3.0]).unwrap();
        spec.ban_level(1, 2);
        spec.ban_config(Config(vec![1, 0, 1]));
        let cost = CostModel::new(
            &s,
            vec![vec![0.0, 1.0], vec![0.0, 0.0, 0.5], vec![0.25, 0.0]],
            3.0,
        )
        .unwrap();
        let text = objective_to_json(&s, &spec, &cost);
        let (spec2, cost2) = objective_from_json(&s, &text).unwrap();
        assert_eq!(spec, spec2);
        assert_eq!(cost, cost2);
        let (d, c) =
            objective_from_json(&s, r#"{"gamma": 2.0, "banned_levels": {"lr": [0.1]}}"#).unwrap();
        assert_eq!(d.gamma(2), 2.0);
        assert!(!d.level_allowed(1, 0));
        assert!(c.is_zero());
        assert!(objective_from_json(&s, r#"{"costs": {"nope": {}}}"#).is_err());
    }
}
