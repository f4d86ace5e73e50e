//! Ordinary least squares, posterior parameter draws for normal-model
//! imputation, and Bernoulli-logit regression fitted by iteratively
//! reweighted least squares.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{factor_named, weighted_cross_products, Cholesky, Design, SymMatrix};

/// Lower clip applied to predicted probabilities before taking logits.
pub const PROBABILITY_FLOOR: f64 = 1e-10;

/// Coefficient magnitude beyond which a logistic fit is reported as
/// (quasi-)separated.
pub const SEPARATION_THRESHOLD: f64 = 25.0;

#[inline]
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

#[inline]
pub fn clip_probability(p: f64) -> f64 {
    p.clamp(PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)
}

/// Gaussian-identity least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    /// Intercept first, in roster order.
    pub coefficients: Vec<f64>,
    /// SSE / (n_obs - q).
    pub residual_variance: f64,
    /// (XᵀX)⁻¹.
    pub gram_inverse: SymMatrix,
    pub n_obs: usize,
    pub predictor_roster: Vec<String>,
}

impl LinearFit {
    pub fn n_coefficients(&self) -> usize {
        self.coefficients.len()
    }

    pub fn residual_df(&self) -> usize {
        self.n_obs - self.n_coefficients()
    }

    pub fn sse(&self) -> f64 {
        self.residual_variance * self.residual_df() as f64
    }
}

/// Bernoulli-logit maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations_used: usize,
    /// Inverse observed information at the returned coefficients. Entries are
    /// NaN when the information matrix could not be inverted.
    pub coefficient_covariance: SymMatrix,
    /// Log-likelihood after each accepted iterate, starting from the initial
    /// point.
    pub log_likelihood_trace: Vec<f64>,
    /// Set when any coefficient exceeds [`SEPARATION_THRESHOLD`] in magnitude.
    pub separation_suspected: bool,
}

impl LogisticFit {
    pub fn log_likelihood(&self) -> f64 {
        *self.log_likelihood_trace.last().unwrap_or(&f64::NAN)
    }
}

/// Convergence settings for [`fit_logistic_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlsOptions {
    /// Stop when the largest absolute coefficient change falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 50,
        }
    }
}

/// Posterior draw of the imputation-model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputationDraw {
    pub sigma2: f64,
    pub coefficients: Vec<f64>,
}

/// Least-squares fit of `response` on `design`.
pub fn fit_linear(design: &Design, response: &[f64]) -> Result<LinearFit> {
    let n = design.nrows();
    let q = design.ncols();
    if response.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "response has {} rows, design has {n}",
            response.len()
        )));
    }
    if n <= q {
        return Err(Error::TooFewObservations { n_obs: n, q });
    }
    let (gram, rhs) = weighted_cross_products(design, None, response);
    let chol = factor_named(&gram, design.labels())?;
    let coefficients = chol.solve(&rhs);
    let sse: f64 = design
        .rows()
        .zip(response)
        .map(|(row, y)| {
            let r = y - crate::linalg::dot(row, &coefficients);
            r * r
        })
        .sum();
    Ok(LinearFit {
        coefficients,
        residual_variance: sse / (n - q) as f64,
        gram_inverse: chol.inverse(),
        n_obs: n,
        predictor_roster: design.labels().to_vec(),
    })
}

/// Draws `(σ²*, β*)` from the noninformative-prior posterior of a normal
/// linear model: `σ²* = SSE / χ²(n - q)` and `β* ~ N(β̂, σ²* (XᵀX)⁻¹)`.
pub fn draw_imputation_parameters<R: Rng + ?Sized>(fit: &LinearFit, rng: &mut R) -> Result<ImputationDraw> {
    let q = fit.n_coefficients();
    if fit.n_obs <= q {
        return Err(Error::TooFewObservations { n_obs: fit.n_obs, q });
    }
    let chi = ChiSquared::new(fit.residual_df() as f64).map_err(|e| Error::InvalidParameter {
        name: "residual_df",
        reason: e.to_string(),
    })?;
    let g: f64 = chi.sample(rng);
    let sigma2 = fit.sse() / g;
    let chol = factor_named(&fit.gram_inverse, &fit.predictor_roster)?;
    let z: Vec<f64> = (0..q).map(|_| StandardNormal.sample(rng)).collect();
    let sigma = sigma2.sqrt();
    let coefficients = fit
        .coefficients
        .iter()
        .zip(chol.lower_mul(&z))
        .map(|(b, lz)| b + sigma * lz)
        .collect();
    Ok(ImputationDraw { sigma2, coefficients })
}

/// Bernoulli log-likelihood at `eta`, writing the fitted means into `mu`.
/// Both share one exponential per row.
fn log_likelihood_and_mean(response: &[u8], eta: &[f64], mu: &mut [f64]) -> f64 {
    // log(1 + exp(e)) = max(e, 0) + log(1 + t) with t = exp(-|e|) in (0, 1].
    // The log(1 + t) terms are multiplied in blocks (each factor is in
    // (1, 2], so 512 of them cannot overflow) and logged once per block.
    const BLOCK: usize = 512;
    let mut ll = 0.0;
    for ((ys, es), ms) in response
        .chunks(BLOCK)
        .zip(eta.chunks(BLOCK))
        .zip(mu.chunks_mut(BLOCK))
    {
        let mut product = 1.0;
        for ((&y, &e), m) in ys.iter().zip(es).zip(ms.iter_mut()) {
            let t = (-e.abs()).exp();
            let inv = 1.0 / (1.0 + t);
            *m = if e >= 0.0 { inv } else { t * inv };
            product *= 1.0 + t;
            ll += f64::from(y) * e - e.max(0.0);
        }
        ll -= product.ln();
    }
    ll
}

/// Fisher information `Xᵀ diag(μ(1-μ)) X` and score `Xᵀ (y - μ)`.
fn information_and_score(design: &Design, response: &[u8], mu: &[f64]) -> (SymMatrix, Vec<f64>) {
    let q = design.ncols();
    let mut lower = vec![0.0; q * q];
    let mut score = vec![0.0; q];
    for ((row, &y), &m) in design.rows().zip(response).zip(mu) {
        let w = m * (1.0 - m);
        let r = f64::from(y) - m;
        for a in 0..q {
            score[a] += row[a] * r;
            let wa = w * row[a];
            for b in 0..=a {
                lower[a * q + b] += wa * row[b];
            }
        }
    }
    let mut info = SymMatrix::zeros(q);
    for a in 0..q {
        for b in 0..=a {
            info.set(a, b, lower[a * q + b]);
            info.set(b, a, lower[a * q + b]);
        }
    }
    (info, score)
}

fn linear_predictor(design: &Design, beta: &[f64], offset: Option<&[f64]>) -> Vec<f64> {
    let mut eta = design.mul_vec(beta);
    if let Some(off) = offset {
        eta.iter_mut().zip(off).for_each(|(e, o)| *e += o);
    }
    eta
}

/// Logistic regression with the default convergence settings.
pub fn fit_logistic(design: &Design, response: &[u8], offset: Option<&[f64]>) -> Result<LogisticFit> {
    fit_logistic_with(design, response, offset, IrlsOptions::default())
}

/// Maximises the Bernoulli log-likelihood with linear predictor
/// `design · β + offset` by IRLS (Newton-Raphson for the canonical link),
/// halving the step whenever the likelihood would decrease.
///
/// Non-convergence is not an error: the last iterate is returned with
/// `converged = false`.
pub fn fit_logistic_with(
    design: &Design,
    response: &[u8],
    offset: Option<&[f64]>,
    options: IrlsOptions,
) -> Result<LogisticFit> {
    fit_logistic_from(design, response, offset, None, options)
}

/// As [`fit_logistic_with`], starting the iterations from `start` instead of
/// zero. The maximiser is the same; a good start only saves iterations.
pub fn fit_logistic_from(
    design: &Design,
    response: &[u8],
    offset: Option<&[f64]>,
    start: Option<&[f64]>,
    options: IrlsOptions,
) -> Result<LogisticFit> {
    let n = design.nrows();
    let q = design.ncols();
    if response.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "response has {} rows, design has {n}",
            response.len()
        )));
    }
    if let Some(off) = offset {
        if off.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "offset has {} rows, design has {n}",
                off.len()
            )));
        }
    }
    if let Some(&bad) = response.iter().find(|&&y| y > 1) {
        return Err(Error::NonBinaryResponse(f64::from(bad)));
    }
    if n < q {
        return Err(Error::TooFewObservations { n_obs: n, q });
    }
    // Rank check on the unweighted design so that singularity is an error
    // and never confused with weight collapse during the iterations.
    let (gram, _) = weighted_cross_products(design, None, &vec![0.0; n]);
    factor_named(&gram, design.labels())?;

    let mut beta = match start {
        Some(b) if b.len() == q => b.to_vec(),
        Some(b) => {
            return Err(Error::DimensionMismatch(format!(
                "start has {} coefficients, design has {q}",
                b.len()
            )))
        }
        None => vec![0.0; q],
    };
    let mut mu = vec![0.0; n];
    let mut loglik = log_likelihood_and_mean(response, &linear_predictor(design, &beta, offset), &mut mu);
    let mut trace = vec![loglik];
    let mut converged = false;
    let mut iterations = 0;
    let mut trial_mu = vec![0.0; n];

    while iterations < options.max_iterations {
        iterations += 1;
        let (info, gradient) = information_and_score(design, response, &mu);
        let chol = match Cholesky::factor(&info) {
            Ok(c) => c,
            Err(_) => break,
        };
        let step = chol.solve(&gradient);
        if step.iter().any(|s| !s.is_finite()) {
            break;
        }

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let trial_eta = linear_predictor(design, &trial, offset);
            let trial_ll = log_likelihood_and_mean(response, &trial_eta, &mut trial_mu);
            if trial_ll.is_finite() && trial_ll >= loglik {
                accepted = Some((trial, trial_ll));
                break;
            }
            scale *= 0.5;
        }
        let Some((trial, trial_ll)) = accepted else {
            // No ascent direction left at machine precision: the iterate is
            // already at the maximum, or the problem is degenerate.
            converged = step.iter().all(|s| s.abs() < options.tolerance);
            break;
        };
        let change = beta
            .iter()
            .zip(&trial)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        beta = trial;
        std::mem::swap(&mut mu, &mut trial_mu);
        loglik = trial_ll;
        trace.push(loglik);
        if change < options.tolerance {
            converged = true;
            break;
        }
    }

    let coefficient_covariance = {
        // `mu` is current for the final iterate
        let (info, _) = information_and_score(design, response, &mu);
        match Cholesky::factor(&info) {
            Ok(c) => c.inverse(),
            Err(_) => {
                let mut m = SymMatrix::zeros(q);
                for i in 0..q {
                    for j in 0..q {
                        m.set(i, j, f64::NAN);
                    }
                }
                m
            }
        }
    };
    let separation_suspected = beta.iter().any(|b| b.abs() > SEPARATION_THRESHOLD);

    Ok(LogisticFit {
        coefficients: beta,
        converged,
        iterations_used: iterations,
        coefficient_covariance,
        log_likelihood_trace: trace,
        separation_suspected,
    })
}

/// Raw and clipped predicted probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub raw: Vec<f64>,
    /// Clipped to `[1e-10, 1 - 1e-10]`.
    pub clipped: Vec<f64>,
}

impl Predictions {
    /// Logits of the clipped probabilities.
    pub fn linear_predictor(&self) -> Vec<f64> {
        self.clipped.iter().map(|&p| logit(p)).collect()
    }
}

pub fn predict_probabilities(coefficients: &[f64], design: &Design) -> Result<Predictions> {
    if coefficients.len() != design.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} design columns",
            coefficients.len(),
            design.ncols()
        )));
    }
    let raw: Vec<f64> = design.mul_vec(coefficients).into_iter().map(expit).collect();
    let clipped = raw.iter().map(|&p| clip_probability(p)).collect();
    Ok(Predictions { raw, clipped })
}
