use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::teacher::{gen_teacher, TeacherSpec};
use super::trial::{run_trial, Background, Estimator, Policy, Scoring, TrialResult, TrialSpec};
use crate::design::DesignPlan;
use crate::effects::{quantile, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::objective::DEFAULT_GAMMA;
use crate::optimizer::SearchSpec;
use crate::rng;

/// Bootstrap resamples behind each percentile interval.
pub const CI_RESAMPLES: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    /// Pairwise versus mains-only scoring on the full grid.
    EffectsOrder,
    /// Balanced versus skewed partial designs for both estimators.
    DesignRobustness,
    /// Uniform versus empirical SF background, with a CM reference.
    ShapBackground,
    /// Seeds per design point on the full grid.
    SeedBudget,
}

impl Axis {
    pub const ALL: [Axis; 4] = [
        Axis::EffectsOrder,
        Axis::DesignRobustness,
        Axis::ShapBackground,
        Axis::SeedBudget,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Axis::EffectsOrder => "effects-order",
            Axis::DesignRobustness => "design-robustness",
            Axis::ShapBackground => "shap-background",
            Axis::SeedBudget => "seed-budget",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Axis::ALL
            .into_iter()
            .find(|a| a.as_str() == name)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown ablation axis `{name}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// CM against SF on a balanced partial design.
    Table2,
    Ablation(Axis),
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Table2 => "table2",
            Suite::Ablation(a) => a.as_str(),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        if name == "table2" {
            Ok(Suite::Table2)
        } else {
            Axis::parse(name).map(Suite::Ablation)
        }
    }
}

/// Shared settings for every cell of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub teacher: TeacherSpec,
    pub trials: usize,
    pub seed: u64,
    /// Points in the balanced and skewed partial designs.
    pub design_size: usize,
    /// Weight of level 0 against 1 for every other level in skewed designs.
    pub skew_bias: f64,
    pub seeds_per_point: usize,
    pub seed_budgets: Vec<usize>,
    pub tau: f64,
    pub lambda_risk: f64,
    pub gamma: f64,
    pub policy: Policy,
    pub search: SearchSpec,
    pub shapley_samples: Option<usize>,
    pub ci_level: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            teacher: TeacherSpec::default(),
            trials: 100,
            seed: 0,
            design_size: 24,
            skew_bias: 4.0,
            seeds_per_point: 4,
            seed_budgets: vec![2, 4, 8, 16],
            tau: DEFAULT_TAU,
            lambda_risk: 0.0,
            gamma: DEFAULT_GAMMA,
            policy: Policy::default(),
            search: SearchSpec::default(),
            shapley_samples: None,
            ci_level: 0.95,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        self.teacher.validate()?;
        if self.trials < 2 {
            return Err(Error::InvalidParameter("need at least two trials".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::InvalidParameter(
                "CI level must lie in (0, 1)".into(),
            ));
        }
        if self.seed_budgets.is_empty() || self.seed_budgets.contains(&0) {
            return Err(Error::InvalidParameter(
                "seed budgets must be positive".into(),
            ));
        }
        self.search.validate()
    }

    /// First 16 hex digits of the SHA-256 of the suite name and JSON config.
    pub fn hash(&self, suite: Suite) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(format!("{}\n{json}", suite.name()).as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    fn spec(&self, design: DesignPlan, estimator: Estimator) -> TrialSpec {
        TrialSpec {
            design,
            seeds_per_point: self.seeds_per_point,
            estimator,
            background: Background::Uniform,
            scoring: Scoring::Pairwise,
            tau: self.tau,
            lambda_risk: self.lambda_risk,
            gamma: self.gamma,
            policy: self.policy,
            search: self.search,
            shapley_samples: self.shapley_samples,
        }
    }
}

/// One column of a suite: a label and the trial settings behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub label: String,
    pub spec: TrialSpec,
}

pub fn suite_cells(suite: Suite, config: &SuiteConfig) -> Vec<Cell> {
    let balanced = DesignPlan::Balanced {
        n: config.design_size,
    };
    let both = [Estimator::Cm, Estimator::Sf];
    let cell = |label: &str, spec: TrialSpec| Cell {
        label: label.to_string(),
        spec,
    };
    match suite {
        Suite::Table2 => both
            .iter()
            .map(|&e| cell("balanced", config.spec(balanced, e)))
            .collect(),
        Suite::Ablation(Axis::EffectsOrder) => [Scoring::Pairwise, Scoring::MainsOnly]
            .iter()
            .flat_map(|&scoring| {
                both.iter().map(move |&e| {
                    let mut spec = config.spec(DesignPlan::Full, e);
                    spec.scoring = scoring;
                    let label = match scoring {
                        Scoring::Pairwise => "pairwise",
                        Scoring::MainsOnly => "mains-only",
                    };
                    cell(label, spec)
                })
            })
            .collect(),
        Suite::Ablation(Axis::DesignRobustness) => {
            let skewed = DesignPlan::Skewed {
                n: config.design_size,
                bias: config.skew_bias,
            };
            [("balanced", balanced), ("skewed", skewed)]
                .iter()
                .flat_map(|&(label, plan)| {
                    both.iter().map(move |&e| cell(label, config.spec(plan, e)))
                })
                .collect()
        }
        Suite::Ablation(Axis::ShapBackground) => {
            let mut empirical = config.spec(balanced, Estimator::Sf);
            empirical.background = Background::Empirical;
            vec![
                cell("uniform", config.spec(balanced, Estimator::Sf)),
                cell("empirical", empirical),
                cell("cm-ref", config.spec(balanced, Estimator::Cm)),
            ]
        }
        Suite::Ablation(Axis::SeedBudget) => config
            .seed_budgets
            .iter()
            .flat_map(|&s| {
                both.iter().map(move |&e| {
                    let mut spec = config.spec(DesignPlan::Full, e);
                    spec.seeds_per_point = s;
                    cell(&s.to_string(), spec)
                })
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ReconstructionError,
    OptimalityGap,
    Spearman,
}

impl Metric {
    pub const ALL: [Metric; 3] = [
        Metric::ReconstructionError,
        Metric::OptimalityGap,
        Metric::Spearman,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::ReconstructionError => "reconstruction_error",
            Metric::OptimalityGap => "optimality_gap",
            Metric::Spearman => "spearman",
        }
    }

    pub fn of(&self, r: &TrialResult) -> f64 {
        match self {
            Metric::ReconstructionError => r.reconstruction_error,
            Metric::OptimalityGap => r.optimality_gap,
            Metric::Spearman => r.spearman,
        }
    }
}

/// Mean of one metric over trials with its percentile bootstrap interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub axis: String,
    pub cell: String,
    pub estimator: Estimator,
    pub metric: Metric,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_trials: usize,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub suite: Suite,
    pub config_hash: String,
    pub cells: Vec<Cell>,
    /// `trials[c][t]` is trial t of cell c.
    pub trials: Vec<Vec<TrialResult>>,
    pub summary: Vec<SummaryRow>,
}

impl SuiteResult {
    pub fn row(&self, cell: &str, estimator: Estimator, metric: Metric) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.cell == cell && r.estimator == estimator && r.metric == metric)
    }

    pub fn mean(&self, cell: &str, estimator: Estimator, metric: Metric) -> Option<f64> {
        self.row(cell, estimator, metric).map(|r| r.mean)
    }
}

/// Runs every cell of `suite` on the same teachers, designs and noise per trial.
/// Trial t draws its teacher from stream (seed, t); trials run in parallel.
pub fn run_suite(suite: Suite, config: &SuiteConfig) -> Result<SuiteResult> {
    config.validate()?;
    let cells = suite_cells(suite, config);
    let per_trial: Vec<Vec<TrialResult>> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(config.seed, &[t as u64]);
            let teacher = gen_teacher(&TeacherSpec {
                seed: rand::RngCore::next_u64(&mut r),
                ..config.teacher.clone()
            })?;
            let trial_seed = rand::RngCore::next_u64(&mut r);
            cells
                .iter()
                .map(|c| run_trial(&teacher, &c.spec, trial_seed))
                .collect()
        })
        .collect::<Result<_>>()?;
    let trials: Vec<Vec<TrialResult>> = (0..cells.len())
        .map(|c| per_trial.iter().map(|row| row[c].clone()).collect())
        .collect();
    let config_hash = config.hash(suite);
    let mut summary = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        for (m, metric) in Metric::ALL.iter().enumerate() {
            let values: Vec<f64> = trials[c].iter().map(|r| metric.of(r)).collect();
            let (mean, lo, hi) =
                mean_with_ci(&values, config.ci_level, config.seed, &[c as u64, m as u64]);
            summary.push(SummaryRow {
                axis: suite.name().to_string(),
                cell: cell.label.clone(),
                estimator: cell.spec.estimator,
                metric: *metric,
                mean,
                ci_lo: lo,
                ci_hi: hi,
                n_trials: values.len(),
                config_hash: config_hash.clone(),
            });
        }
    }
    Ok(SuiteResult {
        suite,
        config_hash,
        cells,
        trials,
        summary,
    })
}

/// One ablation axis with the shared settings.
pub fn ablation_suite(axis: Axis, config: &SuiteConfig) -> Result<SuiteResult> {
    run_suite(Suite::Ablation(axis), config)
}

/// Mean and percentile bootstrap interval of the mean.
pub fn mean_with_ci(values: &[f64], level: f64, seed: u64, key: &[u64]) -> (f64, f64, f64) {
    use rand::Rng;
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut r = rng::stream(seed, key);
    let mut means: Vec<f64> = (0..CI_RESAMPLES)
        .map(|_| (0..n).map(|_| values[r.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    (mean, quantile(&means, tail), quantile(&means, 1.0 - tail))
}

/// Result CSV: axis, cell, estimator, metric, mean, ci_lo, ci_hi, n_trials, config_hash.
pub fn write_suite_csv<W: Write>(rows: &[SummaryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "axis",
        "cell",
        "estimator",
        "metric",
        "mean",
        "ci_lo",
        "ci_hi",
        "n_trials",
        "config_hash",
    ])?;
    for r in rows {
        w.write_record([
            r.axis.as_str(),
            r.cell.as_str(),
            r.estimator.as_str(),
            r.metric.as_str(),
            &format!("{:?}", r.mean),
            &format!("{:?}", r.ci_lo),
            &format!("{:?}", r.ci_hi),
            &r.n_trials.to_string(),
            r.config_hash.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
