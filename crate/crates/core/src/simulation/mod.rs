//! Synthetic teachers with known ground truth, trial runner, metrics and ablation suites.

mod suite;
mod teacher;
mod trial;

pub use suite::{
    ablation_suite, mean_with_ci, run_suite, suite_cells, write_suite_csv, Axis, Cell, Metric,
    Suite, SuiteConfig, SuiteResult, SummaryRow, CI_RESAMPLES,
};
pub use teacher::{gen_teacher, Teacher, TeacherSpec};
pub use trial::{
    project_uniform, run_trial, spearman, Background, Estimator, Policy, Scoring, TrialResult,
    TrialSpec, SIMULATION_GRID_CAP,
};
