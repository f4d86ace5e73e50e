//! Logistic clinical prediction models in three variants, pooled across
//! imputations with Rubin's rules, plus single-record deployment prediction.

use std::fmt;
use std::str::FromStr;

use crate::datagen::Cohort;
use crate::error::{Error, Result};
use crate::glm::{
    expit, fit_logistic_from, logit, predict_probabilities, IrlsOptions, LogisticFit, Predictions,
};
use crate::imputation::{impute_deterministic, CompletedData, ImputationModel};
use crate::linalg::{dot, Design};

/// Column labels in the order they appear in the widest model.
pub const FULL_ROSTER: [&str; 6] = ["intercept", "x1", "x2", "x1x2", "r1", "r1x1"];

/// Which outcome model is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CpmVariant {
    /// `1, x1, x2, x1·x2`
    Base,
    /// Base plus the missing indicator `r1`.
    Indicator,
    /// Indicator plus `r1·x1`.
    IndicatorInteraction,
}

impl CpmVariant {
    pub const ALL: [CpmVariant; 3] = [
        CpmVariant::Base,
        CpmVariant::Indicator,
        CpmVariant::IndicatorInteraction,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            CpmVariant::Base => "base",
            CpmVariant::Indicator => "indicator",
            CpmVariant::IndicatorInteraction => "indicator_interaction",
        }
    }

    pub fn n_columns(self) -> usize {
        match self {
            CpmVariant::Base => 4,
            CpmVariant::Indicator => 5,
            CpmVariant::IndicatorInteraction => 6,
        }
    }

    pub fn roster(self) -> &'static [&'static str] {
        &FULL_ROSTER[..self.n_columns()]
    }

    pub fn uses_indicator(self) -> bool {
        self != CpmVariant::Base
    }
}

impl fmt::Display for CpmVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for CpmVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CpmVariant::ALL
            .into_iter()
            .find(|v| v.tag() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "variant",
                reason: format!("unknown CPM variant `{s}`"),
            })
    }
}

/// One design row. With `force_indicator_zero` the `r1` and `r1·x1`
/// columns are zero whatever the record's missingness.
pub fn design_row(x1: f64, x2: f64, r1: u8, variant: CpmVariant, force_indicator_zero: bool) -> Vec<f64> {
    let r = if force_indicator_zero { 0.0 } else { f64::from(r1) };
    let full = [1.0, x1, x2, x1 * x2, r, r * x1];
    full[..variant.n_columns()].to_vec()
}

/// Assembles the design matrix for `variant` from completed data.
pub fn build_design(data: &CompletedData, variant: CpmVariant, force_indicator_zero: bool) -> Design {
    let q = variant.n_columns();
    let mut values = Vec::with_capacity(data.len() * q);
    for i in 0..data.len() {
        let r = if force_indicator_zero {
            0.0
        } else {
            f64::from(data.r1[i])
        };
        let x1 = data.x1[i];
        let full = [1.0, x1, data.x2[i], data.x1x2[i], r, r * x1];
        values.extend_from_slice(&full[..q]);
    }
    let labels = variant.roster().iter().map(|s| s.to_string()).collect();
    Design::new(labels, data.len(), values).expect("row width matches roster")
}

/// Logistic CPM coefficients pooled over `m` fits.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledCpm {
    pub variant: CpmVariant,
    /// Mean of the per-fit coefficients.
    pub coefficients: Vec<f64>,
    /// Mean of the per-fit sampling variances.
    pub within_variance: Vec<f64>,
    /// Sample variance of the per-fit coefficients (zero when `m = 1`).
    pub between_variance: Vec<f64>,
    /// `within + (1 + 1/m) · between`.
    pub total_variance: Vec<f64>,
    pub m: usize,
    pub any_nonconverged: bool,
    pub any_separation: bool,
}

impl PooledCpm {
    /// Coefficient for a roster label, if that column is in the model.
    pub fn coefficient(&self, label: &str) -> Option<f64> {
        self.variant
            .roster()
            .iter()
            .position(|l| *l == label)
            .map(|j| self.coefficients[j])
    }

    /// Coefficients laid out over [`FULL_ROSTER`], `None` where absent.
    pub fn padded_coefficients(&self) -> [Option<f64>; 6] {
        let mut out = [None; 6];
        for (slot, v) in out.iter_mut().zip(&self.coefficients) {
            *slot = Some(*v);
        }
        out
    }

    pub fn linear_predictor(&self, design: &Design) -> Vec<f64> {
        design.mul_vec(&self.coefficients)
    }
}

/// Pools per-dataset logistic fits with Rubin's rules.
pub fn pool_fits(fits: &[LogisticFit], variant: CpmVariant) -> Result<PooledCpm> {
    let m = fits.len();
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "fits",
            reason: "need at least one fit to pool".into(),
        });
    }
    let q = variant.n_columns();
    if let Some(f) = fits.iter().find(|f| f.coefficients.len() != q) {
        return Err(Error::DimensionMismatch(format!(
            "fit has {} coefficients, variant `{variant}` has {q}",
            f.coefficients.len()
        )));
    }
    let mf = m as f64;
    let mut coefficients = vec![0.0; q];
    let mut within = vec![0.0; q];
    for f in fits {
        for j in 0..q {
            coefficients[j] += f.coefficients[j];
            within[j] += f.coefficient_covariance.get(j, j);
        }
    }
    coefficients.iter_mut().for_each(|c| *c /= mf);
    within.iter_mut().for_each(|w| *w /= mf);
    let between: Vec<f64> = if m == 1 {
        vec![0.0; q]
    } else {
        (0..q)
            .map(|j| {
                fits.iter()
                    .map(|f| (f.coefficients[j] - coefficients[j]).powi(2))
                    .sum::<f64>()
                    / (mf - 1.0)
            })
            .collect()
    };
    let total = within
        .iter()
        .zip(&between)
        .map(|(w, b)| w + (1.0 + 1.0 / mf) * b)
        .collect();
    Ok(PooledCpm {
        variant,
        coefficients,
        within_variance: within,
        between_variance: between,
        total_variance: total,
        m,
        any_nonconverged: fits.iter().any(|f| !f.converged),
        any_separation: fits.iter().any(|f| f.separation_suspected),
    })
}

/// Fits `variant` to every completed dataset and pools the coefficients.
///
/// Indicator variants are refused when the indicator column is constant
/// (for instance on data before missingness was induced).
pub fn fit_cpm(datasets: &[CompletedData], variant: CpmVariant) -> Result<PooledCpm> {
    let first = datasets.first().ok_or_else(|| Error::InvalidParameter {
        name: "datasets",
        reason: "need at least one completed dataset".into(),
    })?;
    if datasets.iter().any(|d| d.len() != first.len() || d.y != first.y) {
        return Err(Error::DimensionMismatch(
            "completed datasets must share rows and outcome".into(),
        ));
    }
    // Usual GLM start: intercept at the marginal log-odds, slopes at zero.
    let events = first.y.iter().filter(|&&v| v == 1).count();
    let mut start = vec![0.0; variant.n_columns()];
    if events > 0 && events < first.len() {
        start[0] = logit(events as f64 / first.len() as f64);
    }
    let fits = datasets
        .iter()
        .map(|data| {
            let design = build_design(data, variant, false);
            if variant.uses_indicator() {
                if let Some(column) = design
                    .constant_columns()
                    .into_iter()
                    .find(|c| c == "r1" || c == "r1x1")
                {
                    return Err(Error::InapplicableVariant {
                        variant: variant.tag().into(),
                        column,
                    });
                }
            }
            fit_logistic_from(&design, &data.y, None, Some(&start), IrlsOptions::default())
        })
        .collect::<Result<Vec<_>>>()?;
    pool_fits(&fits, variant)
}

/// Predictor values for one new individual; only `x1` may be absent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialRecord {
    pub x2: f64,
    pub x1: Option<f64>,
}

/// Deployment-time risk for one record. An absent `x1` is filled in by the
/// stored regression-imputation model, and the indicator columns reflect
/// that it was missing.
pub fn predict_single(
    cpm: &PooledCpm,
    imputation: &ImputationModel,
    record: PartialRecord,
    allow_missing: bool,
) -> Result<f64> {
    let (x1, r1) = match record.x1 {
        Some(x1) => (x1, 0),
        None => {
            if !allow_missing {
                return Err(Error::CompleteDataRequired);
            }
            if imputation.uses_outcome {
                return Err(Error::OutcomeInImputation);
            }
            (imputation.predict_point(record.x2, None)?, 1)
        }
    };
    let row = design_row(x1, record.x2, r1, cpm.variant, false);
    Ok(expit(dot(&row, &cpm.coefficients)))
}

/// Batch counterpart of [`predict_single`]: regression-imputes a whole
/// cohort with a given model and predicts every row.
pub fn predict_cohort(cpm: &PooledCpm, imputation: &ImputationModel, cohort: &Cohort) -> Result<Predictions> {
    let completed = impute_deterministic(cohort, imputation)?;
    predict_probabilities(&cpm.coefficients, &build_design(&completed, cpm.variant, false))
}
