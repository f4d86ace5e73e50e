use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cpm::{build_design, fit_cpm, CpmVariant, PooledCpm};
use crate::datagen::Cohort;
use crate::error::{Error, Result};
use crate::glm::predict_probabilities;
use crate::imputation::{fit_imputation_model, impute_deterministic, impute_multiple, CompletedData};

use super::metrics::MetricSet;

/// How missing `x1` is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// No imputation: the data before missingness was induced.
    Complete,
    /// Deterministic regression imputation.
    Ri,
    /// Multiple imputation.
    Mi,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Complete, Method::Ri, Method::Mi];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Complete => "complete",
            Method::Ri => "RI",
            Method::Mi => "MI",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "method",
                reason: format!("unknown method `{s}`"),
            })
    }
}

/// How validation data are prepared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValidationMode {
    /// Impute validation data with the outcome in the imputation model.
    ImputeWithOutcome,
    /// Impute validation data without the outcome.
    ImputeWithoutOutcome,
    /// Use validation data before missingness, indicator columns forced to 0.
    CompleteData,
}

/// The six development/validation strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// All data, before inducing missingness, at development and validation.
    DaVa,
    /// Outcome in the imputation model at development and validation.
    DyVy,
    /// Outcome omitted from imputation at development and validation.
    DnoyVnoy,
    /// Outcome used at development but not at validation.
    DyVnoy,
    /// Outcome used at development; complete validation data.
    DyVa,
    /// Outcome omitted at development; complete validation data.
    DnoyVa,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::DaVa,
        Strategy::DyVy,
        Strategy::DnoyVnoy,
        Strategy::DyVnoy,
        Strategy::DyVa,
        Strategy::DnoyVa,
    ];

    /// The five strategies that involve imputation.
    pub const IMPUTED: [Strategy; 5] = [
        Strategy::DyVy,
        Strategy::DnoyVnoy,
        Strategy::DyVnoy,
        Strategy::DyVa,
        Strategy::DnoyVa,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Strategy::DaVa => "DA+VA",
            Strategy::DyVy => "DY+VY",
            Strategy::DnoyVnoy => "DnoY+VnoY",
            Strategy::DyVnoy => "DY+VnoY",
            Strategy::DyVa => "DY+VA",
            Strategy::DnoyVa => "DnoY+VA",
        }
    }

    /// Whether the development imputation model includes the outcome;
    /// `None` when development uses the data before missingness.
    pub fn dev_uses_outcome(self) -> Option<bool> {
        match self {
            Strategy::DaVa => None,
            Strategy::DyVy | Strategy::DyVnoy | Strategy::DyVa => Some(true),
            Strategy::DnoyVnoy | Strategy::DnoyVa => Some(false),
        }
    }

    pub fn validation_mode(self) -> ValidationMode {
        match self {
            Strategy::DyVy => ValidationMode::ImputeWithOutcome,
            Strategy::DnoyVnoy | Strategy::DyVnoy => ValidationMode::ImputeWithoutOutcome,
            Strategy::DaVa | Strategy::DyVa | Strategy::DnoyVa => ValidationMode::CompleteData,
        }
    }

    /// Whether the strategy mirrors a deployment where `x1` may be missing.
    ///
    /// `DY+VY` imputes validation data but needs the outcome to do so, which
    /// is unavailable at deployment.
    pub fn missingness_allowed_at_deployment(self) -> bool {
        matches!(self, Strategy::DnoyVnoy | Strategy::DyVnoy)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|t| t.tag() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "strategy",
                reason: format!("unknown strategy `{s}`"),
            })
    }
}

/// Outcome of one (method, strategy, variant) evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyResult {
    /// Mean of `per_imputation_metrics`.
    pub metrics: MetricSet,
    pub coefficients: PooledCpm,
    /// One entry per validation dataset (one for RI and complete data).
    pub per_imputation_metrics: Vec<MetricSet>,
}

/// Complete data is only ever paired with `DA+VA` and the base model, and
/// `DA+VA` only with complete data.
pub fn check_compatible(method: Method, strategy: Strategy, variant: CpmVariant) -> Result<()> {
    let ok = match (method, strategy) {
        (Method::Complete, Strategy::DaVa) => variant == CpmVariant::Base,
        (Method::Complete, _) | (_, Strategy::DaVa) => false,
        _ => true,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::IncompatibleStrategy {
            method: method.tag().into(),
            strategy: strategy.tag().into(),
            variant: variant.tag().into(),
        })
    }
}

/// Completes a cohort by `method`, refitting the imputation model on the
/// cohort itself. RI yields one dataset, MI yields `m`.
pub fn complete_cohort<R: Rng + ?Sized>(
    cohort: &Cohort,
    method: Method,
    include_outcome: bool,
    m: usize,
    rng: &mut R,
) -> Result<Vec<CompletedData>> {
    match method {
        Method::Complete => Ok(vec![CompletedData::original(cohort)]),
        Method::Ri => {
            let model = fit_imputation_model(cohort, include_outcome)?;
            Ok(vec![impute_deterministic(cohort, &model)?])
        }
        Method::Mi => impute_multiple(cohort, include_outcome, m, rng),
    }
}

/// Validation datasets ready for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSet {
    pub datasets: Vec<CompletedData>,
    /// Set for complete-data validation: new individuals are never missing.
    pub force_indicator_zero: bool,
}

pub fn prepare_validation<R: Rng + ?Sized>(
    val: &Cohort,
    method: Method,
    mode: ValidationMode,
    m: usize,
    rng: &mut R,
) -> Result<ValidationSet> {
    Ok(match mode {
        ValidationMode::CompleteData => ValidationSet {
            datasets: vec![CompletedData::original(val)],
            force_indicator_zero: true,
        },
        ValidationMode::ImputeWithOutcome | ValidationMode::ImputeWithoutOutcome => {
            let with_y = mode == ValidationMode::ImputeWithOutcome;
            ValidationSet {
                datasets: complete_cohort(val, method, with_y, m, rng)?,
                force_indicator_zero: false,
            }
        }
    })
}

/// Scores a fitted model on every validation dataset and pools the metrics.
pub fn evaluate(cpm: &PooledCpm, validation: &ValidationSet) -> Result<(MetricSet, Vec<MetricSet>)> {
    let per = validation
        .datasets
        .iter()
        .map(|data| {
            let design = build_design(data, cpm.variant, validation.force_indicator_zero);
            let predictions = predict_probabilities(&cpm.coefficients, &design)?;
            MetricSet::compute(&data.y, &predictions)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((MetricSet::pool(&per)?, per))
}

/// Develops `variant` on `dev` and validates it on `val` under `strategy`.
///
/// Development and validation draw from two streams seeded from `rng`.
pub fn run_strategy<R: Rng + ?Sized>(
    dev: &Cohort,
    val: &Cohort,
    method: Method,
    strategy: Strategy,
    variant: CpmVariant,
    m: usize,
    rng: &mut R,
) -> Result<StrategyResult> {
    check_compatible(method, strategy, variant)?;
    let mut dev_rng = ChaCha8Rng::seed_from_u64(rng.random());
    let mut val_rng = ChaCha8Rng::seed_from_u64(rng.random());
    let include_outcome = strategy.dev_uses_outcome().unwrap_or(false);
    let developed = complete_cohort(dev, method, include_outcome, m, &mut dev_rng)?;
    let coefficients = fit_cpm(&developed, variant)?;
    let validation = prepare_validation(val, method, strategy.validation_mode(), m, &mut val_rng)?;
    let (metrics, per_imputation_metrics) = evaluate(&coefficients, &validation)?;
    Ok(StrategyResult {
        metrics,
        coefficients,
        per_imputation_metrics,
    })
}
