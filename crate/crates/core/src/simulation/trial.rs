use std::collections::HashSet;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::teacher::Teacher;
use crate::design::{
    sample_design, Config, DesignPlan, FactorSpace, Record, ReferenceDistribution, RunLog,
    SupportCounts,
};
use crate::effects::{estimate_effects_cm, EffectTable, ShrinkageSpec, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::objective::{CostModel, ObjectiveSpec, Problem, DEFAULT_GAMMA};
use crate::optimizer::{exhaustive_argmax, multistart, SearchSpec};
use crate::rng;
use crate::shapley::{
    exact_shapley_estimate, fit_effects_sf_min_norm, mc_shapley_keyed, SamplingScheme,
    ShapleyEstimate, ValueOracle,
};

/// Enumeration cap for simulated grids; scoring needs every configuration.
pub const SIMULATION_GRID_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Cm,
    Sf,
}

impl Estimator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Estimator::Cm => "CM",
            Estimator::Sf => "SF",
        }
    }
}

/// Background distribution of the SF value function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Background {
    Uniform,
    /// Empirical joint distribution of the design points.
    Empirical,
}

/// How the configuration is chosen from the scored table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Exact argmax of J over the grid.
    #[default]
    Exhaustive,
    /// Coordinate ascent with restarts; only 1-swap optimality is guaranteed.
    Multistart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    Pairwise,
    /// Pair tables zeroed before scoring and search.
    MainsOnly,
}

/// Everything one trial needs besides the teacher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub design: DesignPlan,
    pub seeds_per_point: usize,
    pub estimator: Estimator,
    pub background: Background,
    pub scoring: Scoring,
    pub tau: f64,
    pub lambda_risk: f64,
    pub gamma: f64,
    pub policy: Policy,
    pub search: SearchSpec,
    /// Permutations per SF point; `None` enumerates coalitions exactly.
    pub shapley_samples: Option<usize>,
}

impl TrialSpec {
    pub fn new(design: DesignPlan, estimator: Estimator) -> Self {
        Self {
            design,
            seeds_per_point: 4,
            estimator,
            background: Background::Uniform,
            scoring: Scoring::Pairwise,
            tau: DEFAULT_TAU,
            lambda_risk: 0.0,
            gamma: DEFAULT_GAMMA,
            policy: Policy::default(),
            search: SearchSpec::default(),
            shapley_samples: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub estimator: Estimator,
    /// RMS entrywise difference between estimated and true tables.
    pub reconstruction_error: f64,
    /// f(x*) − f(x̂) in raw teacher units.
    pub optimality_gap: f64,
    /// Spearman ρ between estimated and true table scores over the grid.
    pub spearman: f64,
    pub chosen: Config,
    pub optimum: Config,
    pub sigma_min: Option<f64>,
    pub residual_norm: Option<f64>,
}

/// Per-seed noisy observations of the teacher over the whole grid.
struct NoisyGrid {
    space: FactorSpace,
    clean: Vec<f64>,
    noise: Vec<Vec<f64>>,
    seeds: usize,
}

impl NoisyGrid {
    /// `runs[i]` is the number of times grid point i is run; each run uses `seeds` draws.
    fn new(teacher: &Teacher, grid: &[Config], runs: &[usize], seeds: usize, seed: u64) -> Self {
        let space = teacher.space().clone();
        let clean = grid.iter().map(|x| teacher.value(x)).collect();
        // draw s of a point never depends on the budget, so budgets are nested
        let noise = (0..grid.len())
            .map(|i| {
                let mut r = rng::stream(seed, &[i as u64]);
                (0..seeds * runs[i].max(1))
                    .map(|_| teacher.noise_sd * r.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        Self {
            space,
            clean,
            noise,
            seeds,
        }
    }

    fn observe(&self, x: &Config, draw: usize) -> f64 {
        let i = self.space.rank(x);
        self.clean[i] + self.noise[i][draw]
    }

    /// Mean over one run's seeds, as seen by the SF value function.
    fn seed_mean(&self, i: usize) -> f64 {
        let n = &self.noise[i][..self.seeds];
        self.clean[i] + n.iter().sum::<f64>() / n.len() as f64
    }
}

/// Runs one estimate–optimize–score cycle. Design, noise and search streams are
/// keyed by `seed`, so different estimators on the same seed see identical data.
pub fn run_trial(teacher: &Teacher, spec: &TrialSpec, seed: u64) -> Result<TrialResult> {
    if spec.seeds_per_point == 0 {
        return Err(Error::InvalidParameter(
            "at least one seed per point is required".into(),
        ));
    }
    let space = teacher.space();
    let grid = space.enumerate_capped(SIMULATION_GRID_CAP)?;
    let design = sample_design(space, spec.design, rng_key(seed, 1))?;
    let mut runs = vec![0usize; grid.len()];
    for x in &design {
        runs[space.rank(x)] += 1;
    }
    let noisy = NoisyGrid::new(
        teacher,
        &grid,
        &runs,
        spec.seeds_per_point,
        rng_key(seed, 2),
    );
    let uniform = ReferenceDistribution::uniform(space);
    let shrinkage = ShrinkageSpec::shared(space, spec.tau)?;

    // repeated design points receive fresh seeds
    let mut occurrences = vec![0usize; grid.len()];
    let mut records = Vec::with_capacity(design.len() * spec.seeds_per_point);
    for x in &design {
        let o = &mut occurrences[space.rank(x)];
        for s in 0..spec.seeds_per_point {
            records.push(Record::new(
                x.clone(),
                noisy.observe(x, *o * spec.seeds_per_point + s),
            ));
        }
        *o += 1;
    }
    let log = RunLog::new(space, records)?;

    let (estimate, sigma_min, residual_norm) = match spec.estimator {
        Estimator::Cm => (
            estimate_effects_cm(space, &log, &uniform, &shrinkage)?,
            None,
            None,
        ),
        Estimator::Sf => {
            let fit = sf_path(space, &noisy, &design, &log, spec, seed)?;
            (
                fit.table,
                Some(fit.diagnostics.sigma_min),
                Some(fit.diagnostics.residual_norm),
            )
        }
    };
    let estimate = if estimate_is_uniform(spec) {
        estimate
    } else {
        project_uniform(&estimate, &grid)?
    };
    let scored = match spec.scoring {
        Scoring::Pairwise => estimate.clone(),
        Scoring::MainsOnly => estimate.mains_only(),
    };

    let support = SupportCounts::from_log(space, &log);
    let objective = ObjectiveSpec::new(space, spec.lambda_risk, 0.0, spec.gamma)?;
    let cost = CostModel::zero(space);
    let problem = Problem::new(&scored, &support, &objective, &cost);
    let search = SearchSpec {
        seed: rng_key(seed, 3),
        ..spec.search
    };
    let chosen = match spec.policy {
        Policy::Exhaustive => exhaustive_argmax(&problem, SIMULATION_GRID_CAP)?.0,
        Policy::Multistart => multistart(&problem, &search)?.best,
    };

    let (optimum, best) = grid
        .iter()
        .map(|x| (x, teacher.value(x)))
        .fold(None, |acc: Option<(&Config, f64)>, (x, v)| match acc {
            Some((_, bv)) if bv >= v => acc,
            _ => Some((x, v)),
        })
        .expect("grid is nonempty");
    let gap = best - teacher.value(&chosen);

    let estimated: Vec<f64> = grid.iter().map(|x| scored.predict(x)).collect();
    let truth: Vec<f64> = grid.iter().map(|x| teacher.second_order(x)).collect();
    Ok(TrialResult {
        estimator: spec.estimator,
        reconstruction_error: estimate.rms_diff(&teacher.truth),
        optimality_gap: gap,
        spearman: spearman(&estimated, &truth)?,
        chosen,
        optimum: optimum.clone(),
        sigma_min,
        residual_norm,
    })
}

fn estimate_is_uniform(spec: &TrialSpec) -> bool {
    spec.estimator == Estimator::Cm || spec.background == Background::Uniform
}

fn rng_key(seed: u64, purpose: u64) -> u64 {
    use rand::RngCore;
    rng::stream(seed, &[purpose]).next_u64()
}

fn sf_path(
    space: &FactorSpace,
    noisy: &NoisyGrid,
    design: &[Config],
    log: &RunLog,
    spec: &TrialSpec,
    seed: u64,
) -> Result<crate::shapley::SfFit> {
    let means: Vec<f64> = (0..noisy.clean.len()).map(|i| noisy.seed_mean(i)).collect();
    let bound = means.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let lookup = {
        let space = space.clone();
        let means = means.clone();
        Arc::new(move |x: &Config| means[space.rank(x)])
    };
    let (background, fit_reference) = match spec.background {
        Background::Uniform => {
            let u = ReferenceDistribution::uniform(space);
            (u.clone(), u)
        }
        Background::Empirical => {
            let e = ReferenceDistribution::empirical(space, log)?;
            let product = e.to_product();
            (e, product)
        }
    };
    let mut oracle = ValueOracle::from_fn(space, lookup, background, bound)?;
    if spec.background == Background::Empirical {
        oracle = oracle.with_joint_background();
    }
    let mut seen = HashSet::new();
    let points: Vec<Config> = design
        .iter()
        .filter(|x| seen.insert((*x).clone()))
        .cloned()
        .collect();
    let estimates = points
        .iter()
        .enumerate()
        .map(|(i, x)| match spec.shapley_samples {
            Some(m) => mc_shapley_keyed(
                &oracle,
                x,
                m,
                rng_key(seed, 4),
                i as u64,
                SamplingScheme::Permutation,
            ),
            None => exact_shapley_estimate(&oracle, x),
        })
        .collect::<Result<Vec<ShapleyEstimate>>>()?;
    let shrinkage = ShrinkageSpec::shared(space, spec.tau)?;
    // same support as the CM path so both shrink identically; sparse partial
    // designs may leave some pair blocks unidentified
    let support = SupportCounts::from_log(space, log);
    fit_effects_sf_min_norm(&estimates, space, &fit_reference, &shrinkage, support)
}

/// Uniform FANOVA projection of a table's predictions, via exact cell means on
/// the full grid.
pub fn project_uniform(table: &EffectTable, grid: &[Config]) -> Result<EffectTable> {
    let space = table.space();
    let values: Vec<f64> = grid.iter().map(|x| table.predict(x)).collect();
    let log = RunLog::from_pairs(space, grid, &values)?;
    let mut projected = estimate_effects_cm(
        space,
        &log,
        &ReferenceDistribution::uniform(space),
        &ShrinkageSpec::vanishing(space),
    )?;
    projected.provenance = table.provenance;
    projected.support = table.support.clone();
    Ok(projected)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::InvalidParameter(
            "rank correlation needs at least two values".into(),
        ));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let mean = (a.len() as f64 + 1.0) / 2.0;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - mean) * (y - mean);
        saa += (x - mean).powi(2);
        sbb += (y - mean).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        // positions start..end share the mean of ranks start+1..=end
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}
