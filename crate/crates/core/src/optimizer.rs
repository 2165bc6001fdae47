//! Coordinate ascent over Ω with restarts, and optimality diagnostics.

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::Config;
use crate::error::{Error, Result};
use crate::objective::Problem;
use crate::rng;

/// Contexts enumerated exactly when computing dominance margins.
pub const MARGIN_CONTEXT_CAP: u128 = 100_000;
/// Contexts sampled when the grid exceeds [`MARGIN_CONTEXT_CAP`].
pub const MARGIN_SAMPLE_SIZE: usize = 20_000;
/// Attempts at drawing a feasible random start before falling back to the greedy one.
const START_ATTEMPTS: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpec {
    pub restarts: usize,
    /// Random starts use only the top-`beam` levels of each factor by main effect.
    pub beam: usize,
    /// An update is accepted only if it improves J by more than this.
    pub eps_stop: f64,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            restarts: 8,
            beam: 3,
            eps_stop: 0.0,
            max_sweeps: 100,
            seed: 0,
        }
    }
}

impl SearchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.beam == 0 || self.max_sweeps == 0 {
            return Err(Error::InvalidParameter(
                "restarts, beam and max sweeps must be at least 1".into(),
            ));
        }
        if !(self.eps_stop >= 0.0) {
            return Err(Error::InvalidParameter(
                "eps_stop must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// A full sweep made no update.
    Converged,
    /// The sweep budget ran out while updates were still being made.
    MaxSweeps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub sweep: usize,
    pub config: Config,
    pub value: f64,
}

/// Start plus one step per accepted update.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchTrace {
    pub steps: Vec<TraceStep>,
    pub termination: Termination,
}

impl SearchTrace {
    pub fn final_config(&self) -> &Config {
        &self.steps.last().expect("trace holds the start").config
    }

    pub fn final_value(&self) -> f64 {
        self.steps.last().expect("trace holds the start").value
    }
}

/// F_j(ℓ | x) = g̃_j(ℓ) + Σ_k g̃_jk(ℓ, x_k) − λ_risk Σ_k r_jk(ℓ, x_k) − λ_cost ΔC_j(ℓ | x).
pub fn local_gain(problem: &Problem, j: usize, l: usize, x: &Config) -> Result<f64> {
    let y = x.with(j, l);
    problem.space().check(&y)?;
    problem.spec.check_feasible(&y)?;
    Ok(problem.local_unchecked(j, l, x))
}

/// Best feasible level for coordinate j; lowest index wins ties.
fn best_level(problem: &Problem, j: usize, x: &Config) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    let mut y = x.clone();
    for l in 0..problem.space().levels(j) {
        y.0[j] = l;
        if !problem.spec.is_feasible(&y) {
            continue;
        }
        let f = problem.local_unchecked(j, l, x);
        if best.is_none_or(|(_, b)| f > b) {
            best = Some((l, f));
        }
    }
    best
}

/// Sweeps factors in declaration order, moving each to its best level when that
/// strictly improves J.
pub fn coordinate_ascent(
    problem: &Problem,
    start: &Config,
    search: &SearchSpec,
) -> Result<(Config, SearchTrace)> {
    search.validate()?;
    let mut x = start.clone();
    let mut value = problem.value(&x)?;
    let mut steps = vec![TraceStep {
        sweep: 0,
        config: x.clone(),
        value,
    }];
    for sweep in 1..=search.max_sweeps {
        let mut moved = false;
        for j in 0..problem.space().dim() {
            let current = problem.local_unchecked(j, x[j], &x);
            let (l, f) = best_level(problem, j, &x).ok_or_else(|| Error::EmptyCoordinate {
                factor: j,
                context: x.0.clone(),
            })?;
            if l != x[j] && f - current > search.eps_stop {
                x.0[j] = l;
                value = problem.value(&x)?;
                steps.push(TraceStep {
                    sweep,
                    config: x.clone(),
                    value,
                });
                moved = true;
            }
        }
        if !moved {
            return Ok((
                x,
                SearchTrace {
                    steps,
                    termination: Termination::Converged,
                },
            ));
        }
    }
    Ok((
        x,
        SearchTrace {
            steps,
            termination: Termination::MaxSweeps,
        },
    ))
}

/// Per-factor argmax of g̃_j (lowest index on ties) over allowed levels.
pub fn greedy_start(problem: &Problem) -> Config {
    Config(
        (0..problem.space().dim())
            .map(|j| top_levels(problem, j, 1).first().copied().unwrap_or(0))
            .collect(),
    )
}

/// Allowed levels of factor j ordered by g̃_j descending, index ascending.
fn top_levels(problem: &Problem, j: usize, beam: usize) -> Vec<usize> {
    let mut levels: Vec<usize> = (0..problem.space().levels(j))
        .filter(|&l| problem.spec.level_allowed(j, l))
        .collect();
    levels.sort_by(|&a, &b| {
        problem
            .table
            .main(j, b)
            .total_cmp(&problem.table.main(j, a))
            .then(a.cmp(&b))
    });
    levels.truncate(beam);
    levels
}

#[derive(Debug, Clone)]
pub struct MultistartResult {
    pub best: Config,
    pub value: f64,
    pub traces: Vec<SearchTrace>,
}

/// Restart 0 begins at the greedy start; the others at uniform draws from the
/// top-`beam` box intersected with Ω. Restart r draws from stream (seed, r).
pub fn multistart(problem: &Problem, search: &SearchSpec) -> Result<MultistartResult> {
    search.validate()?;
    let greedy = feasible_start(problem, greedy_start(problem), search.beam)?;
    let boxes: Vec<Vec<usize>> = (0..problem.space().dim())
        .map(|j| top_levels(problem, j, search.beam))
        .collect();
    let traces: Vec<SearchTrace> = (0..search.restarts)
        .into_par_iter()
        .map(|r| {
            let start = if r == 0 {
                greedy.clone()
            } else {
                random_start(problem, &boxes, search.seed, r as u64)
                    .unwrap_or_else(|| greedy.clone())
            };
            coordinate_ascent(problem, &start, search).map(|(_, t)| t)
        })
        .collect::<Result<_>>()?;
    let best = traces
        .iter()
        .max_by(|a, b| {
            a.final_value()
                .total_cmp(&b.final_value())
                .then_with(|| b.final_config().cmp(a.final_config()))
        })
        .expect("at least one restart");
    Ok(MultistartResult {
        best: best.final_config().clone(),
        value: best.final_value(),
        traces,
    })
}

fn random_start(
    problem: &Problem,
    boxes: &[Vec<usize>],
    seed: u64,
    restart: u64,
) -> Option<Config> {
    let mut r = rng::stream(seed, &[restart]);
    (0..START_ATTEMPTS).find_map(|_| {
        let x = Config(
            boxes
                .iter()
                .map(|b| b[r.random_range(0..b.len())])
                .collect(),
        );
        problem.spec.is_feasible(&x).then_some(x)
    })
}

/// The greedy start if feasible, else the first feasible point of the top-`beam`
/// box, else the first feasible grid point.
fn feasible_start(problem: &Problem, greedy: Config, beam: usize) -> Result<Config> {
    if problem.spec.is_feasible(&greedy) {
        return Ok(greedy);
    }
    let boxes: Vec<Vec<usize>> = (0..problem.space().dim())
        .map(|j| top_levels(problem, j, beam))
        .collect();
    let mut idx = vec![0usize; boxes.len()];
    if boxes.iter().all(|b| !b.is_empty()) {
        loop {
            let x = Config(idx.iter().zip(&boxes).map(|(&i, b)| b[i]).collect());
            if problem.spec.is_feasible(&x) {
                return Ok(x);
            }
            if !advance(&mut idx, &boxes.iter().map(Vec::len).collect::<Vec<_>>()) {
                break;
            }
        }
    }
    let space = problem.space();
    let mut idx = vec![0usize; space.dim()];
    loop {
        let x = Config(idx.clone());
        if problem.spec.is_feasible(&x) {
            return Ok(x);
        }
        if !advance(&mut idx, &space.level_counts()) {
            return Err(Error::Infeasible(greedy.0));
        }
    }
}

fn advance(idx: &mut [usize], radix: &[usize]) -> bool {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < radix[i] {
            return true;
        }
        idx[i] = 0;
    }
    false
}

/// Outcome of an exhaustive 1-swap scan.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapCheck {
    pub optimal: bool,
    /// Best improving swap (factor, level, gain), if any.
    pub best_swap: Option<(usize, usize, f64)>,
}

/// Scans all feasible single-coordinate swaps from x.
pub fn verify_1swap(problem: &Problem, x: &Config) -> Result<SwapCheck> {
    problem.value(x)?;
    let mut best: Option<(usize, usize, f64)> = None;
    for j in 0..problem.space().dim() {
        let current = problem.local_unchecked(j, x[j], x);
        for l in (0..problem.space().levels(j)).filter(|&l| l != x[j]) {
            if !problem.spec.is_feasible(&x.with(j, l)) {
                continue;
            }
            let gain = problem.local_unchecked(j, l, x) - current;
            if gain > 0.0 && best.is_none_or(|(_, _, g)| gain > g) {
                best = Some((j, l, gain));
            }
        }
    }
    Ok(SwapCheck {
        optimal: best.is_none(),
        best_swap: best,
    })
}

/// Margins m_j, influence bounds L_jk, and whether Σ_k L_jk < m_j for every j.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub margins: Vec<f64>,
    /// d × d; the diagonal is zero.
    pub influence: Vec<Vec<f64>>,
    pub holds: bool,
    /// False when margins come from sampled contexts; a sampled m_j can only
    /// overstate the exact minimum.
    pub exact: bool,
    pub contexts: usize,
}

/// L_jk = max_ℓ range_m [g̃_jk(ℓ, m) − λ_risk r_jk(ℓ, m)], and m_j = the smallest
/// gap between the best and second-best feasible F_j over contexts x_{−j}.
pub fn diag_dominance_check(problem: &Problem) -> DominanceReport {
    diag_dominance_check_seeded(problem, 0)
}

pub fn diag_dominance_check_seeded(problem: &Problem, seed: u64) -> DominanceReport {
    let space = problem.space();
    let d = space.dim();
    let mut influence = vec![vec![0.0; d]; d];
    for (p, (j, k)) in space.pairs().into_iter().enumerate() {
        let term = |l: usize, m: usize| {
            problem.table.pair(j, l, k, m) - problem.spec.lambda_risk * problem.pair_risk(p, l, m)
        };
        influence[j][k] = (0..space.levels(j))
            .map(|l| range((0..space.levels(k)).map(|m| term(l, m))))
            .fold(0.0, f64::max);
        influence[k][j] = (0..space.levels(k))
            .map(|m| range((0..space.levels(j)).map(|l| term(l, m))))
            .fold(0.0, f64::max);
    }
    let exact = space.grid_size() <= MARGIN_CONTEXT_CAP;
    let contexts: Vec<Config> = if exact {
        space.enumerate().expect("under the cap")
    } else {
        let mut r = rng::stream(seed, &[0x6d6a]);
        (0..MARGIN_SAMPLE_SIZE)
            .map(|_| Config((0..d).map(|j| r.random_range(0..space.levels(j))).collect()))
            .collect()
    };
    let mut margins = vec![f64::INFINITY; d];
    let mut seen = vec![HashSet::new(); d];
    for x in &contexts {
        for j in 0..d {
            // one evaluation per distinct context x_{−j}
            if !seen[j].insert(x.with(j, 0)) {
                continue;
            }
            let mut values: Vec<f64> = (0..space.levels(j))
                .filter(|&l| problem.spec.is_feasible(&x.with(j, l)))
                .map(|l| problem.local_unchecked(j, l, x))
                .collect();
            if values.len() < 2 {
                continue;
            }
            values.sort_by(|a, b| b.total_cmp(a));
            margins[j] = margins[j].min(values[0] - values[1]);
        }
    }
    let holds = (0..d).all(|j| influence[j].iter().sum::<f64>() < margins[j]);
    DominanceReport {
        margins,
        influence,
        holds,
        exact,
        contexts: contexts.len(),
    }
}

fn range(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    hi - lo
}

/// J(x̂*) ≥ J(x*) − 2ε under a uniform deviation ε.
pub fn near_opt_bound(epsilon: f64) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "deviation {epsilon} must be nonnegative"
        )));
    }
    Ok(2.0 * epsilon)
}

/// Upper bound on J(y) − J(x̂) over all y ∈ Ω for a 1-swap optimal x̂: the
/// largest possible increase of every main, pair, risk and cost term.
pub fn two_swap_bound(problem: &Problem, x: &Config) -> Result<f64> {
    let check = verify_1swap(problem, x)?;
    if let Some((factor, level, gain)) = check.best_swap {
        return Err(Error::NotOneSwapOptimal {
            factor,
            level,
            gain,
        });
    }
    let space = problem.space();
    let t = problem.table;
    let mut bound = 0.0;
    for j in 0..space.dim() {
        let here = t.main(j, x[j]);
        bound += (0..space.levels(j))
            .map(|l| t.main(j, l) - here)
            .fold(0.0, f64::max);
        let c_here = problem.cost.level_cost(j, x[j]);
        let c_min = (0..space.levels(j))
            .map(|l| problem.cost.level_cost(j, l))
            .fold(f64::INFINITY, f64::min);
        bound += problem.spec.lambda_cost * (c_here - c_min).max(0.0);
    }
    for (p, (j, k)) in space.pairs().into_iter().enumerate() {
        let here = t.pair(j, x[j], k, x[k]);
        let table = &t.pairs[p];
        bound += table.iter().map(|(_, _, &v)| v - here).fold(0.0, f64::max);
        let r_here = problem.pair_risk(p, x[j], x[k]);
        let r_min = table
            .iter()
            .map(|(l, m, _)| problem.pair_risk(p, l, m))
            .fold(f64::INFINITY, f64::min);
        bound += problem.spec.lambda_risk * (r_here - r_min).max(0.0);
    }
    Ok(bound)
}

/// Exhaustive argmax of J over Ω (lowest rank on ties).
pub fn exhaustive_argmax(problem: &Problem, cap: u128) -> Result<(Config, f64)> {
    let mut best: Option<(Config, f64)> = None;
    for x in problem.space().enumerate_capped(cap)? {
        if !problem.spec.is_feasible(&x) {
            continue;
        }
        let v = problem.value(&x)?;
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((x, v));
        }
    }
    best.ok_or_else(|| Error::InfeasibleDesign("feasible set is empty".into()))
}

/// The `k` best distinct feasible configurations of `pool` by J, ties by config order.
pub fn top_k(
    problem: &Problem,
    pool: impl IntoIterator<Item = Config>,
    k: usize,
) -> Result<Vec<(Config, f64)>> {
    let mut seen = HashSet::new();
    let mut ranked = Vec::new();
    for x in pool {
        if problem.spec.is_feasible(&x) && seen.insert(x.clone()) {
            let v = problem.value(&x)?;
            ranked.push((x, v));
        }
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    Ok(ranked)
}

/// Endpoints of every trace plus their feasible 1-swap neighbors.
pub fn neighborhood_pool(problem: &Problem, traces: &[SearchTrace]) -> Vec<Config> {
    let space = problem.space();
    let mut pool = Vec::new();
    for t in traces {
        let x = t.final_config();
        pool.push(x.clone());
        for j in 0..space.dim() {
            for l in (0..space.levels(j)).filter(|&l| l != x[j]) {
                pool.push(x.with(j, l));
            }
        }
    }
    pool
}
