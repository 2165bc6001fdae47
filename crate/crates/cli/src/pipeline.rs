use std::collections::HashSet;

use anyhow::{anyhow, Result};
use serde_json::{json, Value};
use twofactor::design::{Config, FactorSpace, ReferenceDistribution, RunLog, SupportCounts};
use twofactor::effects::{estimate_effects_cm, EffectTable, ShrinkageSpec, DEFAULT_TAU};
use twofactor::shapley::{
    exact_shapley_estimate, fit_effects_sf_min_norm, fit_effects_sf_with_support, mc_shapley_batch,
    FitDiagnostics, SamplingScheme, ShapleyEstimate, ValueOracle,
};

use crate::args::{BackgroundKind, GlobalArgs, PathKind};
use crate::output::Input;

/// Parsed factor space and run log with their raw inputs.
pub struct Loaded {
    pub space: FactorSpace,
    pub log: RunLog,
    pub space_input: Input,
    pub log_input: Input,
}

impl Loaded {
    pub fn inputs(&self) -> [&Input; 2] {
        [&self.space_input, &self.log_input]
    }
}

pub fn load(global: &GlobalArgs) -> Result<Loaded> {
    let space_path = global
        .space
        .as_ref()
        .ok_or_else(|| anyhow!("--space is required"))?;
    let log_path = global
        .log
        .as_ref()
        .ok_or_else(|| anyhow!("--log is required"))?;
    let space_input = Input::read("space", space_path)?;
    let space = FactorSpace::from_json(space_input.text()?)?;
    let log_input = Input::read("log", log_path)?;
    let log = RunLog::read_csv(&space, log_input.bytes.as_slice())?;
    Ok(Loaded {
        space,
        log,
        space_input,
        log_input,
    })
}

/// Everything that determines an effect table.
#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub path: PathKind,
    pub background: BackgroundKind,
    pub tau: f64,
    pub shapley_samples: Option<usize>,
    pub seed: u64,
}

impl Settings {
    pub fn new(global: &GlobalArgs, shapley_samples: Option<usize>) -> Self {
        Self {
            path: global.path,
            background: global.background,
            tau: global.tau.unwrap_or(DEFAULT_TAU),
            shapley_samples,
            seed: global.seed,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "path": self.path,
            "background": self.background,
            "tau": self.tau,
            "shapley_samples": self.shapley_samples,
        })
    }

    /// CM centers under the reference itself. SF attributes against a product
    /// background, so an empirical reference is replaced by its marginals.
    pub fn reference(&self, space: &FactorSpace, log: &RunLog) -> Result<ReferenceDistribution> {
        Ok(match (self.background, self.path) {
            (BackgroundKind::Uniform, _) => ReferenceDistribution::uniform(space),
            (BackgroundKind::Empirical, PathKind::Cm) => {
                ReferenceDistribution::empirical(space, log)?
            }
            (BackgroundKind::Empirical, PathKind::Sf) => {
                ReferenceDistribution::empirical(space, log)?.to_product()
            }
        })
    }
}

pub struct SfDetail {
    pub diagnostics: FitDiagnostics,
    pub estimates: Vec<ShapleyEstimate>,
    pub unobserved_cells: usize,
}

pub struct Fitted {
    pub table: EffectTable,
    pub reference: ReferenceDistribution,
    pub sf: Option<SfDetail>,
}

/// Estimates the table along the chosen path. A `strict` SF fit rejects
/// rank-deficient designs; otherwise unidentified directions are zeroed.
pub fn fit(space: &FactorSpace, log: &RunLog, s: &Settings, strict: bool) -> Result<Fitted> {
    let reference = s.reference(space, log)?;
    let shrinkage = ShrinkageSpec::shared(space, s.tau)?;
    match s.path {
        PathKind::Cm => Ok(Fitted {
            table: estimate_effects_cm(space, log, &reference, &shrinkage)?,
            reference,
            sf: None,
        }),
        PathKind::Sf => {
            let oracle = ValueOracle::from_log(space, log, reference.clone())?;
            let mut seen = HashSet::new();
            let points: Vec<Config> = log
                .records()
                .iter()
                .filter(|r| r.weight > 0.0 && seen.insert(r.config.clone()))
                .map(|r| r.config.clone())
                .collect();
            let estimates = match s.shapley_samples {
                Some(m) => {
                    mc_shapley_batch(&oracle, &points, m, s.seed, SamplingScheme::Permutation)?
                }
                None => points
                    .iter()
                    .map(|x| exact_shapley_estimate(&oracle, x))
                    .collect::<twofactor::Result<_>>()?,
            };
            let support = SupportCounts::from_log(space, log);
            let sf = if strict {
                fit_effects_sf_with_support(&estimates, space, &reference, &shrinkage, support)?
            } else {
                fit_effects_sf_min_norm(&estimates, space, &reference, &shrinkage, support)?
            };
            Ok(Fitted {
                table: sf.table,
                reference,
                sf: Some(SfDetail {
                    diagnostics: sf.diagnostics,
                    estimates,
                    unobserved_cells: oracle.unobserved_cells(),
                }),
            })
        }
    }
}
