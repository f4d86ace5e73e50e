//! Imputation of the incomplete predictor `x1` from a linear model on `x2`
//! (and optionally the outcome), either deterministically (regression
//! imputation) or by drawing from the posterior predictive distribution
//! (multiple imputation). The `x1·x2` interaction is always recomputed from
//! the completed `x1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::datagen::Cohort;
use crate::error::{Error, Result};
use crate::glm::{draw_imputation_parameters, fit_linear, LinearFit};
use crate::linalg::{dot, Design};

/// Default number of multiply-imputed datasets.
pub const DEFAULT_IMPUTATIONS: usize = 20;

const ROSTER_WITHOUT_Y: [&str; 2] = ["intercept", "x2"];
const ROSTER_WITH_Y: [&str; 3] = ["intercept", "x2", "y"];

/// Expected predictor roster of the imputation model.
pub fn imputation_roster(uses_outcome: bool) -> &'static [&'static str] {
    if uses_outcome {
        &ROSTER_WITH_Y
    } else {
        &ROSTER_WITHOUT_Y
    }
}

/// Linear model for `x1` given `x2` (and `y` when `uses_outcome`).
#[derive(Debug, Clone, PartialEq)]
pub struct ImputationModel {
    pub inner: LinearFit,
    pub uses_outcome: bool,
}

impl ImputationModel {
    pub fn new(inner: LinearFit, uses_outcome: bool) -> Result<Self> {
        let model = Self { inner, uses_outcome };
        model.check_roster()?;
        Ok(model)
    }

    fn check_roster(&self) -> Result<()> {
        let expected = imputation_roster(self.uses_outcome);
        if self
            .inner
            .predictor_roster
            .iter()
            .map(String::as_str)
            .ne(expected.iter().copied())
        {
            return Err(Error::RosterMismatch(format!(
                "expected {:?}, model has {:?}",
                expected, self.inner.predictor_roster
            )));
        }
        Ok(())
    }

    fn predictor_row(&self, x2: f64, y: Option<u8>) -> Result<Vec<f64>> {
        match (self.uses_outcome, y) {
            (false, _) => Ok(vec![1.0, x2]),
            (true, Some(y)) => Ok(vec![1.0, x2, f64::from(y)]),
            (true, None) => Err(Error::OutcomeInImputation),
        }
    }

    /// Point prediction of `x1`. `y` is required iff the model uses the outcome.
    pub fn predict_point(&self, x2: f64, y: Option<u8>) -> Result<f64> {
        Ok(dot(&self.predictor_row(x2, y)?, &self.inner.coefficients))
    }
}

/// Where a completed dataset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// True `x1` before missingness was induced.
    OriginalComplete,
    RegressionImputed,
    /// Draw `index` (0-based) of `of`.
    MultipleImputation {
        index: usize,
        of: usize,
    },
}

/// A dataset with no absent values.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedData {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub y: Vec<u8>,
    pub r1: Vec<u8>,
    /// Always `x1 * x2`, recomputed from the completed `x1`.
    pub x1x2: Vec<f64>,
    pub provenance: Provenance,
}

impl CompletedData {
    fn assemble(cohort: &Cohort, x1: Vec<f64>, provenance: Provenance) -> Self {
        let x1x2 = x1.iter().zip(&cohort.x2).map(|(a, b)| a * b).collect();
        Self {
            x1,
            x2: cohort.x2.clone(),
            y: cohort.y.clone(),
            r1: cohort.r1.clone(),
            x1x2,
            provenance,
        }
    }

    /// The cohort as it was before missingness was induced.
    pub fn original(cohort: &Cohort) -> Self {
        Self::assemble(cohort, cohort.x1.clone(), Provenance::OriginalComplete)
    }

    pub fn len(&self) -> usize {
        self.x1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x1.is_empty()
    }
}

/// Complete-case OLS of `x1` on the imputation roster.
pub fn fit_imputation_model(cohort: &Cohort, include_outcome: bool) -> Result<ImputationModel> {
    let roster = imputation_roster(include_outcome);
    let required = roster.len() + 1;
    let complete: Vec<usize> = (0..cohort.len()).filter(|&i| cohort.r1[i] == 0).collect();
    if complete.len() < required {
        return Err(Error::TooFewCompleteCases {
            complete: complete.len(),
            required,
        });
    }
    let q = roster.len();
    let mut data = Vec::with_capacity(complete.len() * q);
    let mut response = Vec::with_capacity(complete.len());
    for &i in &complete {
        data.push(1.0);
        data.push(cohort.x2[i]);
        if include_outcome {
            data.push(f64::from(cohort.y[i]));
        }
        response.push(cohort.x1_observed[i].expect("r1 = 0 rows are observed"));
    }
    let labels = roster.iter().map(|s| s.to_string()).collect();
    let design = Design::new(labels, complete.len(), data)?;
    ImputationModel::new(fit_linear(&design, &response)?, include_outcome)
}

fn observed_or(cohort: &Cohort, mut fill: impl FnMut(usize) -> Result<f64>) -> Result<Vec<f64>> {
    cohort
        .x1_observed
        .iter()
        .enumerate()
        .map(|(i, obs)| match obs {
            Some(v) => Ok(*v),
            None => fill(i),
        })
        .collect()
}

/// Replaces each missing `x1` with the model's point prediction.
pub fn impute_deterministic(cohort: &Cohort, model: &ImputationModel) -> Result<CompletedData> {
    model.check_roster()?;
    let x1 = observed_or(cohort, |i| model.predict_point(cohort.x2[i], Some(cohort.y[i])))?;
    Ok(CompletedData::assemble(cohort, x1, Provenance::RegressionImputed))
}

/// One stochastic imputation from a posterior parameter draw.
fn impute_once<R: Rng + ?Sized>(
    cohort: &Cohort,
    model: &ImputationModel,
    provenance: Provenance,
    rng: &mut R,
) -> Result<CompletedData> {
    let draw = draw_imputation_parameters(&model.inner, rng)?;
    let sigma = draw.sigma2.sqrt();
    let x1 = observed_or(cohort, |i| {
        let row = model.predictor_row(cohort.x2[i], Some(cohort.y[i]))?;
        let noise: f64 = StandardNormal.sample(rng);
        Ok(dot(&row, &draw.coefficients) + sigma * noise)
    })?;
    Ok(CompletedData::assemble(cohort, x1, provenance))
}

/// `m` multiply-imputed datasets from an already fitted model. Imputation `k`
/// uses ChaCha stream `k` under a seed drawn once from `rng`.
pub fn impute_multiple_with_model<R: Rng + ?Sized>(
    cohort: &Cohort,
    model: &ImputationModel,
    m: usize,
    rng: &mut R,
) -> Result<Vec<CompletedData>> {
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: "must be positive".into(),
        });
    }
    let base: u64 = rng.random();
    (0..m)
        .map(|k| {
            let mut sub = ChaCha8Rng::seed_from_u64(base);
            sub.set_stream(k as u64);
            impute_once(
                cohort,
                model,
                Provenance::MultipleImputation { index: k, of: m },
                &mut sub,
            )
        })
        .collect()
}

/// Fits the imputation model on complete cases and produces `m` imputations.
pub fn impute_multiple<R: Rng + ?Sized>(
    cohort: &Cohort,
    include_outcome: bool,
    m: usize,
    rng: &mut R,
) -> Result<Vec<CompletedData>> {
    let model = fit_imputation_model(cohort, include_outcome)?;
    impute_multiple_with_model(cohort, &model, m, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_cohort, ParameterConfig};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn identity_cohort() -> Cohort {
        // x1 = x2 on complete rows; two missing rows.
        let x2 = vec![-1.0, 0.0, 1.0, 2.0, 1.5, 0.3];
        let x1 = vec![-1.0, 0.0, 1.0, 2.0, 99.0, 99.0];
        let r1 = vec![0, 0, 0, 0, 1, 1];
        Cohort::new(x1, x2, vec![0, 1, 0, 1, 0, 1], r1, 0.0, 0.0).unwrap()
    }

    #[test]
    fn identity_relation_is_recovered() {
        let model = fit_imputation_model(&identity_cohort(), false).unwrap();
        assert!(model.inner.coefficients[0].abs() < 1e-12);
        assert!((model.inner.coefficients[1] - 1.0).abs() < 1e-12);
        assert!(model.inner.residual_variance < 1e-24);
    }

    #[test]
    fn roster_follows_outcome_flag() {
        let cohort = generate_cohort(&ParameterConfig::default(), &mut rng(1)).unwrap();
        let with = fit_imputation_model(&cohort, true).unwrap();
        assert_eq!(with.inner.predictor_roster, vec!["intercept", "x2", "y"]);
        let without = fit_imputation_model(&cohort, false).unwrap();
        assert_eq!(without.inner.predictor_roster, vec!["intercept", "x2"]);
    }

    #[test]
    fn too_few_complete_cases() {
        let c = Cohort::new(
            vec![1.0; 3],
            vec![0.0, 1.0, 2.0],
            vec![0; 3],
            vec![0, 0, 1],
            0.0,
            0.0,
        )
        .unwrap();
        assert_eq!(
            fit_imputation_model(&c, false).unwrap_err(),
            Error::TooFewCompleteCases {
                complete: 2,
                required: 3
            }
        );
    }

    #[test]
    fn deterministic_imputation_evaluates_model() {
        let cohort = identity_cohort();
        let model = fit_imputation_model(&cohort, false).unwrap();
        let done = impute_deterministic(&cohort, &model).unwrap();
        assert!((done.x1[4] - 1.5).abs() < 1e-12);
        assert_eq!(done.provenance, Provenance::RegressionImputed);
        assert_eq!(done, impute_deterministic(&cohort, &model).unwrap());
        for i in 0..done.len() {
            assert_eq!(done.x1x2[i], done.x1[i] * done.x2[i]);
        }
    }

    #[test]
    fn complete_input_passes_through() {
        let c = Cohort::new(
            vec![0.5, 1.0, -1.0, 2.0],
            vec![0.1, 0.9, -0.5, 1.0],
            vec![0, 1, 0, 1],
            vec![0; 4],
            0.0,
            0.0,
        )
        .unwrap();
        let model = fit_imputation_model(&c, false).unwrap();
        let done = impute_deterministic(&c, &model).unwrap();
        assert_eq!(done.x1, c.x1);
        let draws = impute_multiple_with_model(&c, &model, 3, &mut rng(2)).unwrap();
        assert!(draws.iter().all(|d| d.x1 == c.x1));
    }

    #[test]
    fn roster_mismatch_is_rejected() {
        let cohort = identity_cohort();
        let mut model = fit_imputation_model(&cohort, false).unwrap();
        model.uses_outcome = true;
        assert!(matches!(
            impute_deterministic(&cohort, &model),
            Err(Error::RosterMismatch(_))
        ));
    }

    #[test]
    fn twenty_imputations_without_gaps() {
        let cohort = generate_cohort(
            &ParameterConfig {
                n_total: 2000,
                ..Default::default()
            },
            &mut rng(4),
        )
        .unwrap();
        let sets = impute_multiple(&cohort, true, 20, &mut rng(5)).unwrap();
        assert_eq!(sets.len(), 20);
        for (k, d) in sets.iter().enumerate() {
            assert_eq!(d.provenance, Provenance::MultipleImputation { index: k, of: 20 });
            assert!(d.x1.iter().all(|v| v.is_finite()));
            for i in 0..d.len() {
                if cohort.r1[i] == 0 {
                    assert_eq!(d.x1[i].to_bits(), cohort.x1[i].to_bits());
                }
                assert_eq!(d.x1x2[i], d.x1[i] * d.x2[i]);
            }
        }
        assert_ne!(sets[0].x1, sets[1].x1);
    }

    #[test]
    fn outcome_model_needs_outcome_for_point_prediction() {
        let cohort = generate_cohort(&ParameterConfig::default(), &mut rng(6)).unwrap();
        let model = fit_imputation_model(&cohort, true).unwrap();
        assert_eq!(model.predict_point(0.3, None), Err(Error::OutcomeInImputation));
    }
}
