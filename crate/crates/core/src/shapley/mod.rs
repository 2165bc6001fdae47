//! Shapley attributions and the least-squares recovery of effect tables from them.

mod exact;
mod fit;
mod mc;
mod oracle;

pub use exact::{
    exact_shapley, exact_shapley_estimate, exact_shapley_second_order, EXACT_SHAPLEY_MAX_DIM,
};
pub use fit::{
    build_design_matrix, fit_effects_sf, fit_effects_sf_min_norm, fit_effects_sf_with_support,
    indicator_row, stability_bound, stability_bound_from_sigma, write_shapley_csv,
    EffectDesignMatrix, FitDiagnostics, ParamBlock, SfFit, RANK_TOLERANCE,
};
pub use mc::{
    hoeffding_halfwidth, mc_sample_size, mc_shapley, mc_shapley_batch, mc_shapley_keyed,
    SamplingScheme, ShapleyEstimate,
};
pub use oracle::{
    BackgroundMode, CoalitionValue, ResponseFn, ValueOracle, DEFAULT_BACKGROUND_DRAWS,
    EXACT_COMPLEMENT_CAP,
};
