//! Engine for studying missing-data handling in logistic clinical
//! prediction models.
//!
//! A cohort has two correlated predictors `x1`, `x2`, a binary outcome and
//! missingness in `x1` only, driven by `x1`, `x2` and/or the outcome. The
//! crate covers generating such cohorts, completing them by regression or
//! multiple imputation, fitting the outcome model with and without missing
//! indicators, validating it under six development/validation strategies,
//! and running whole simulation grids reproducibly.
//!
//! Modules, bottom-up:
//!
//! - [`linalg`] / [`glm`]: least squares, posterior draws, IRLS logistic fits
//! - [`datagen`]: cohorts with calibrated outcome and missingness intercepts
//! - [`imputation`]: regression and multiple imputation of `x1`
//! - [`cpm`]: design matrices, Rubin pooling, deployment prediction
//! - [`evaluation`]: CITL, calibration slope, C-statistic, Brier score and the strategies
//! - [`harness`]: grid, seeding, CSV results and summaries
//! - [`artifact`]: the plain-text model file read by `cpmiss predict`

pub mod artifact;
pub mod cpm;
pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod glm;
pub mod harness;
pub mod imputation;
pub mod linalg;

pub use artifact::{build_deployment_model, ModelArtifact};
pub use cpm::{
    build_design, fit_cpm, pool_fits, predict_cohort, predict_single, CpmVariant, PartialRecord, PooledCpm,
};
pub use datagen::{
    calibrate_intercept, generate_cohort, generate_cohort_with, generate_outcomes, induce_missingness,
    sample_predictors, split_cohort, Cohort, InterceptPolicy, ParameterConfig,
};
pub use error::{Error, Result};
pub use evaluation::{
    brier, c_statistic, calibration_slope, citl, run_strategy, Method, MetricSet, Strategy, StrategyResult,
    ValidationMode,
};
pub use glm::{
    draw_imputation_parameters, expit, fit_linear, fit_logistic, fit_logistic_from, logit,
    predict_probabilities, LinearFit, LogisticFit, Predictions,
};
pub use harness::{
    classify_mechanism, enumerate_grid, run_experiment, run_iteration, summarize, ConfigFilter,
    ExperimentOptions, Mechanism, RunRecord,
};
pub use imputation::{
    fit_imputation_model, impute_deterministic, impute_multiple, CompletedData, ImputationModel, Provenance,
};
pub use linalg::Design;
