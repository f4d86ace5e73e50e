//! Calibration and discrimination measures for predicted risks.

use crate::error::{Error, Result};
use crate::glm::{fit_logistic_from, IrlsOptions, Predictions};
use crate::linalg::Design;

/// Estimate from a recalibration fit, with that fit's convergence flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationEstimate {
    pub value: f64,
    pub converged: bool,
}

fn check_lengths(y: &[u8], other: &[f64]) -> Result<()> {
    if y.len() != other.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} outcomes for {} predictions",
            y.len(),
            other.len()
        )));
    }
    Ok(())
}

fn require_both_classes(y: &[u8]) -> Result<(usize, usize)> {
    let events = y.iter().filter(|&&v| v == 1).count();
    let non_events = y.len() - events;
    if events == 0 || non_events == 0 {
        return Err(Error::UndefinedMetric("outcome has a single class".into()));
    }
    Ok((events, non_events))
}

/// Calibration-in-the-large: intercept of `logit P(y) = a + lp` with `lp`
/// as a fixed offset. Zero is ideal.
pub fn citl(y: &[u8], lp: &[f64]) -> Result<CalibrationEstimate> {
    check_lengths(y, lp)?;
    require_both_classes(y)?;
    let fit = fit_logistic_from(
        &Design::intercept_only(y.len()),
        y,
        Some(lp),
        None,
        IrlsOptions::default(),
    )?;
    Ok(CalibrationEstimate {
        value: fit.coefficients[0],
        converged: fit.converged,
    })
}

/// Calibration slope: coefficient on `lp` in `logit P(y) = a + b·lp`. One is
/// ideal; below one indicates predictions that are too extreme.
pub fn calibration_slope(y: &[u8], lp: &[f64]) -> Result<CalibrationEstimate> {
    check_lengths(y, lp)?;
    require_both_classes(y)?;
    if lp.iter().all(|&v| v == lp[0]) {
        return Err(Error::UndefinedMetric("linear predictor is constant".into()));
    }
    let ones = vec![1.0; y.len()];
    let design = Design::from_columns(&[("intercept", &ones), ("lp", lp)])?;
    // perfect calibration, (0, 1), is the natural start
    let fit = fit_logistic_from(&design, y, None, Some(&[0.0, 1.0]), IrlsOptions::default())?;
    Ok(CalibrationEstimate {
        value: fit.coefficients[1],
        converged: fit.converged,
    })
}

/// Concordance probability via the Mann-Whitney rank sum, ties counting ½.
pub fn c_statistic(y: &[u8], p: &[f64]) -> Result<f64> {
    check_lengths(y, p)?;
    let (events, non_events) = require_both_classes(y)?;
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_unstable_by(|&a, &b| p[a].total_cmp(&p[b]));

    let mut event_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && p[order[end]] == p[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1..=end share their average
        let midrank = (start + 1 + end) as f64 / 2.0;
        let tied_events = order[start..end].iter().filter(|&&i| y[i] == 1).count();
        event_rank_sum += midrank * tied_events as f64;
        start = end;
    }
    let e = events as f64;
    Ok((event_rank_sum - e * (e + 1.0) / 2.0) / (e * non_events as f64))
}

/// Mean squared error of predicted probabilities.
pub fn brier(y: &[u8], p: &[f64]) -> Result<f64> {
    check_lengths(y, p)?;
    if y.is_empty() {
        return Err(Error::UndefinedMetric("no records".into()));
    }
    Ok(y.iter()
        .zip(p)
        .map(|(&o, &q)| (q - f64::from(o)).powi(2))
        .sum::<f64>()
        / y.len() as f64)
}

/// The four performance measures for one validation dataset, or their
/// pooled means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSet {
    pub citl: f64,
    pub slope: f64,
    pub cstat: f64,
    pub brier: f64,
    pub citl_converged: bool,
    pub slope_converged: bool,
}

impl MetricSet {
    /// Metrics for one dataset. Calibration uses the logits of the clipped
    /// probabilities; the C-statistic and Brier score use the clipped
    /// probabilities themselves.
    pub fn compute(y: &[u8], predictions: &Predictions) -> Result<Self> {
        let lp = predictions.linear_predictor();
        let c = citl(y, &lp)?;
        let s = calibration_slope(y, &lp)?;
        Ok(Self {
            citl: c.value,
            slope: s.value,
            cstat: c_statistic(y, &predictions.clipped)?,
            brier: brier(y, &predictions.clipped)?,
            citl_converged: c.converged,
            slope_converged: s.converged,
        })
    }

    /// Componentwise mean ("pooled performance"); flags are the conjunction.
    pub fn pool(sets: &[MetricSet]) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::UndefinedMetric("no metric sets to pool".into()));
        }
        let n = sets.len() as f64;
        let mean = |f: fn(&MetricSet) -> f64| sets.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            citl: mean(|m| m.citl),
            slope: mean(|m| m.slope),
            cstat: mean(|m| m.cstat),
            brier: mean(|m| m.brier),
            citl_converged: sets.iter().all(|m| m.citl_converged),
            slope_converged: sets.iter().all(|m| m.slope_converged),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cstat_small_cases() {
        assert_eq!(c_statistic(&[0, 1], &[0.2, 0.8]).unwrap(), 1.0);
        assert_eq!(c_statistic(&[0, 1], &[0.5, 0.5]).unwrap(), 0.5);
        assert_eq!(c_statistic(&[1, 0], &[0.2, 0.8]).unwrap(), 0.0);
        assert!(matches!(
            c_statistic(&[1, 1], &[0.2, 0.8]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn brier_edge_values() {
        assert_eq!(brier(&[0, 1, 1], &[0.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(brier(&[0, 1, 1, 0], &[0.5; 4]).unwrap(), 0.25);
    }

    #[test]
    fn citl_closed_form() {
        let y = [0, 1, 0, 1, 1, 0];
        let c = citl(&y, &[0.0; 6]).unwrap();
        assert!(c.converged);
        assert!(c.value.abs() < 1e-12);
    }

    #[test]
    fn calibration_requires_two_classes_and_varying_lp() {
        assert!(citl(&[1, 1, 1], &[0.0, 1.0, 2.0]).is_err());
        assert!(calibration_slope(&[0, 1, 1], &[0.3; 3]).is_err());
    }

    #[test]
    fn pooling_is_a_mean() {
        let a = MetricSet {
            citl: 0.1,
            slope: 0.9,
            cstat: 0.7,
            brier: 0.08,
            citl_converged: true,
            slope_converged: true,
        };
        let b = MetricSet {
            citl: -0.3,
            slope: 1.3,
            cstat: 0.8,
            brier: 0.1,
            citl_converged: true,
            slope_converged: false,
        };
        let p = MetricSet::pool(&[a, b]).unwrap();
        assert_eq!(p.citl, (0.1 + -0.3) / 2.0);
        assert_eq!(p.slope, (0.9 + 1.3) / 2.0);
        assert!(p.citl_converged && !p.slope_converged);
    }

    fn brute_force_cstat(y: &[u8], p: &[f64]) -> f64 {
        let mut score = 0.0;
        let mut pairs = 0.0;
        for i in 0..y.len() {
            for j in 0..y.len() {
                if y[i] == 1 && y[j] == 0 {
                    pairs += 1.0;
                    if p[i] > p[j] {
                        score += 1.0;
                    } else if p[i] == p[j] {
                        score += 0.5;
                    }
                }
            }
        }
        score / pairs
    }

    proptest! {
        #[test]
        fn cstat_matches_all_pairs(
            data in prop::collection::vec((0u8..=1, 0u8..20), 2..80)
        ) {
            let y: Vec<u8> = data.iter().map(|d| d.0).collect();
            // coarse grid of probabilities so ties are common
            let p: Vec<f64> = data.iter().map(|d| f64::from(d.1) / 20.0).collect();
            prop_assume!(y.contains(&0) && y.contains(&1));
            let fast = c_statistic(&y, &p).unwrap();
            prop_assert!((fast - brute_force_cstat(&y, &p)).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&fast));
        }
    }
}
