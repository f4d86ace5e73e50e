//! Cohort generation: correlated predictors, a calibrated binary outcome, a
//! calibrated missingness indicator for `x1`, and the development/validation
//! split.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::glm::expit;

/// Bracket searched for calibrated intercepts.
pub const INTERCEPT_BRACKET: (f64, f64) = (-50.0, 50.0);

/// Maximum allowed gap between the attained and target mean probability.
pub const CALIBRATION_TOLERANCE: f64 = 1e-10;

/// One cell of the simulation grid.
///
/// The outcome and missingness intercepts are not stored here; they are
/// calibrated per generated dataset and recorded on the [`Cohort`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterConfig {
    /// Missingness-model coefficient on `x1`.
    pub beta_x1: f64,
    /// Missingness-model coefficient on `x2`.
    pub beta_x2: f64,
    /// Missingness-model coefficient on the outcome.
    pub beta_y: f64,
    pub gamma_x1: f64,
    pub gamma_x2: f64,
    pub gamma_x1x2: f64,
    /// Target outcome prevalence.
    pub pi_y: f64,
    /// Target proportion of missing `x1`.
    pub pi_r1: f64,
    /// Correlation between `x1` and `x2`.
    pub rho: f64,
    pub n_total: usize,
    /// Share of records assigned to development.
    pub split_fraction: f64,
}

impl Default for ParameterConfig {
    fn default() -> Self {
        Self {
            beta_x1: 0.0,
            beta_x2: 0.0,
            beta_y: 0.0,
            gamma_x1: 0.7,
            gamma_x2: 0.7,
            gamma_x1x2: 0.1,
            pi_y: 0.1,
            pi_r1: 0.5,
            rho: 0.4,
            n_total: 10_000,
            split_fraction: 0.5,
        }
    }
}

fn open_unit(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("{v} is not strictly inside (0, 1)"),
        })
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("|{rho}| must be < 1"),
        })
    }
}

impl ParameterConfig {
    pub fn validate(&self) -> Result<()> {
        open_unit("pi_y", self.pi_y)?;
        open_unit("pi_r1", self.pi_r1)?;
        open_unit("split_fraction", self.split_fraction)?;
        check_rho(self.rho)?;
        if self.n_total < 2 {
            return Err(Error::InvalidParameter {
                name: "n_total",
                reason: "need at least two records to split".into(),
            });
        }
        let coefs = [
            ("beta_x1", self.beta_x1),
            ("beta_x2", self.beta_x2),
            ("beta_y", self.beta_y),
            ("gamma_x1", self.gamma_x1),
            ("gamma_x2", self.gamma_x2),
            ("gamma_x1x2", self.gamma_x1x2),
        ];
        for (name, v) in coefs {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be finite".into(),
                });
            }
        }
        Ok(())
    }
}

/// A generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    /// True predictor values, kept even where masked.
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub y: Vec<u8>,
    /// 1 where `x1` is missing.
    pub r1: Vec<u8>,
    /// `x1` where `r1 = 0`, `None` where `r1 = 1`.
    pub x1_observed: Vec<Option<f64>>,
    pub gamma0_used: f64,
    pub beta0_used: f64,
}

impl Cohort {
    /// Assembles a cohort, deriving the masked predictor from `r1`.
    pub fn new(
        x1: Vec<f64>,
        x2: Vec<f64>,
        y: Vec<u8>,
        r1: Vec<u8>,
        gamma0_used: f64,
        beta0_used: f64,
    ) -> Result<Self> {
        let n = x1.len();
        if x2.len() != n || y.len() != n || r1.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "cohort vectors have lengths x1={n}, x2={}, y={}, r1={}",
                x2.len(),
                y.len(),
                r1.len()
            )));
        }
        if let Some(&v) = y.iter().chain(&r1).find(|&&v| v > 1) {
            return Err(Error::NonBinaryResponse(f64::from(v)));
        }
        let x1_observed = x1.iter().zip(&r1).map(|(&x, &r)| (r == 0).then_some(x)).collect();
        Ok(Self {
            x1,
            x2,
            y,
            r1,
            x1_observed,
            gamma0_used,
            beta0_used,
        })
    }

    pub fn len(&self) -> usize {
        self.x1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x1.is_empty()
    }

    pub fn n_missing(&self) -> usize {
        self.r1.iter().filter(|&&r| r == 1).count()
    }

    pub fn n_complete(&self) -> usize {
        self.len() - self.n_missing()
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            x1: indices.iter().map(|&i| self.x1[i]).collect(),
            x2: indices.iter().map(|&i| self.x2[i]).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            r1: indices.iter().map(|&i| self.r1[i]).collect(),
            x1_observed: indices.iter().map(|&i| self.x1_observed[i]).collect(),
            gamma0_used: self.gamma0_used,
            beta0_used: self.beta0_used,
        }
    }
}

/// Draws `n` pairs from a standard bivariate normal with correlation `rho`.
pub fn sample_predictors<R: Rng + ?Sized>(n: usize, rho: f64, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
    check_rho(rho)?;
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "must be positive".into(),
        });
    }
    let tail = (1.0 - rho * rho).sqrt();
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    for _ in 0..n {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        x1.push(z1);
        x2.push(rho * z1 + tail * z2);
    }
    Ok((x1, x2))
}

/// Mean of `expit(c + eta)`.
pub fn mean_probability(c: f64, eta: &[f64]) -> f64 {
    eta.iter().map(|&e| expit(c + e)).sum::<f64>() / eta.len() as f64
}

/// Finds the intercept `c` with `mean(expit(c + eta)) = target` by bisection.
pub fn calibrate_intercept(eta: &[f64], target: f64) -> Result<f64> {
    if eta.is_empty() {
        return Err(Error::InvalidParameter {
            name: "eta",
            reason: "must be non-empty".into(),
        });
    }
    open_unit("target", target)?;
    let (mut lo, mut hi) = INTERCEPT_BRACKET;
    let f_lo = mean_probability(lo, eta);
    let f_hi = mean_probability(hi, eta);
    if !(f_lo <= target && target <= f_hi) {
        return Err(Error::CalibrationUnreachable {
            target,
            lo,
            hi,
            attained_lo: f_lo,
            attained_hi: f_hi,
        });
    }
    let mut best = (f64::INFINITY, 0.5 * (lo + hi));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let resid = mean_probability(mid, eta) - target;
        if resid.abs() < best.0 {
            best = (resid.abs(), mid);
        }
        if resid == 0.0 || hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
        if resid < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.0 > CALIBRATION_TOLERANCE {
        return Err(Error::CalibrationTolerance { residual: best.0 });
    }
    Ok(best.1)
}

fn check_lengths(a: &[f64], b: &[f64], c: Option<usize>) -> Result<()> {
    if a.len() != b.len() || c.is_some_and(|n| n != a.len()) {
        return Err(Error::DimensionMismatch(
            "predictor and outcome vectors must have equal length".into(),
        ));
    }
    Ok(())
}

fn draw_bernoulli<R: Rng + ?Sized>(intercept: f64, eta: &[f64], rng: &mut R) -> Vec<u8> {
    eta.iter()
        .map(|&e| u8::from(rng.random::<f64>() < expit(intercept + e)))
        .collect()
}

/// Outcome linear predictor without its intercept.
pub fn outcome_linear_predictor(x1: &[f64], x2: &[f64], config: &ParameterConfig) -> Vec<f64> {
    x1.iter()
        .zip(x2)
        .map(|(&a, &b)| config.gamma_x1 * a + config.gamma_x2 * b + config.gamma_x1x2 * a * b)
        .collect()
}

/// Missingness linear predictor without its intercept.
pub fn missingness_linear_predictor(x1: &[f64], x2: &[f64], y: &[u8], config: &ParameterConfig) -> Vec<f64> {
    x1.iter()
        .zip(x2)
        .zip(y)
        .map(|((&a, &b), &yy)| config.beta_x1 * a + config.beta_x2 * b + config.beta_y * f64::from(yy))
        .collect()
}

/// Draws the outcome after calibrating its intercept to `pi_y`.
pub fn generate_outcomes<R: Rng + ?Sized>(
    x1: &[f64],
    x2: &[f64],
    config: &ParameterConfig,
    rng: &mut R,
) -> Result<(Vec<u8>, f64)> {
    check_lengths(x1, x2, None)?;
    let eta = outcome_linear_predictor(x1, x2, config);
    let gamma0 = calibrate_intercept(&eta, config.pi_y)?;
    Ok((draw_bernoulli(gamma0, &eta, rng), gamma0))
}

/// Draws the missingness indicator for `x1` after calibrating its intercept
/// to `pi_r1`. The predictor values themselves are left untouched.
pub fn induce_missingness<R: Rng + ?Sized>(
    x1: &[f64],
    x2: &[f64],
    y: &[u8],
    config: &ParameterConfig,
    rng: &mut R,
) -> Result<(Vec<u8>, f64)> {
    check_lengths(x1, x2, Some(y.len()))?;
    let eta = missingness_linear_predictor(x1, x2, y, config);
    let beta0 = calibrate_intercept(&eta, config.pi_r1)?;
    Ok((draw_bernoulli(beta0, &eta, rng), beta0))
}

/// How the outcome and missingness intercepts are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InterceptPolicy {
    /// Calibrate on each generated dataset's own linear predictors.
    #[default]
    PerDataset,
    /// Use intercepts fixed in advance, e.g. from [`calibrate_reference_intercepts`].
    Fixed { gamma0: f64, beta0: f64 },
}

/// Calibrates `(gamma0, beta0)` once on a reference sample of `n_reference`
/// records, for use with [`InterceptPolicy::Fixed`].
pub fn calibrate_reference_intercepts<R: Rng + ?Sized>(
    config: &ParameterConfig,
    n_reference: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    config.validate()?;
    let (x1, x2) = sample_predictors(n_reference, config.rho, rng)?;
    let (y, gamma0) = generate_outcomes(&x1, &x2, config, rng)?;
    let (_, beta0) = induce_missingness(&x1, &x2, &y, config, rng)?;
    Ok((gamma0, beta0))
}

/// Generates one cohort of `config.n_total` records with per-dataset
/// intercept calibration.
pub fn generate_cohort<R: Rng + ?Sized>(config: &ParameterConfig, rng: &mut R) -> Result<Cohort> {
    generate_cohort_with(config, InterceptPolicy::PerDataset, rng)
}

pub fn generate_cohort_with<R: Rng + ?Sized>(
    config: &ParameterConfig,
    policy: InterceptPolicy,
    rng: &mut R,
) -> Result<Cohort> {
    config.validate()?;
    let (x1, x2) = sample_predictors(config.n_total, config.rho, rng)?;
    let (y, gamma0, r1, beta0) = match policy {
        InterceptPolicy::PerDataset => {
            let (y, gamma0) = generate_outcomes(&x1, &x2, config, rng)?;
            let (r1, beta0) = induce_missingness(&x1, &x2, &y, config, rng)?;
            (y, gamma0, r1, beta0)
        }
        InterceptPolicy::Fixed { gamma0, beta0 } => {
            let y = draw_bernoulli(gamma0, &outcome_linear_predictor(&x1, &x2, config), rng);
            let eta = missingness_linear_predictor(&x1, &x2, &y, config);
            let r1 = draw_bernoulli(beta0, &eta, rng);
            (y, gamma0, r1, beta0)
        }
    };
    Cohort::new(x1, x2, y, r1, gamma0, beta0)
}

/// Random partition into development (`⌊n·fraction⌋` rows) and validation
/// (the remainder). Each part keeps the original row order.
pub fn split_cohort<R: Rng + ?Sized>(
    cohort: &Cohort,
    fraction: f64,
    rng: &mut R,
) -> Result<(Cohort, Cohort)> {
    open_unit("fraction", fraction)?;
    let n = cohort.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let n_dev = (n as f64 * fraction).floor() as usize;
    let (dev, val) = order.split_at_mut(n_dev);
    dev.sort_unstable();
    val.sort_unstable();
    Ok((cohort.subset(dev), cohort.subset(val)))
}
