//! Performance measures checked by simulation and by pair enumeration.

mod common;

use common::{bernoulli, c_statistic_pairs, expit, mean_and_se, normals};
use cpmiss_core::{brier, c_statistic, calibration_slope, citl};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Averages `measure(y, true logit)` over 200 replicates of n = 5000.
fn averaged(seed: u64, measure: impl Fn(&[u8], &[f64]) -> f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..200)
        .map(|_| {
            let x = normals(5000, &mut rng);
            let eta: Vec<f64> = x.iter().map(|v| -2.3 + 1.0 * v).collect();
            let p: Vec<f64> = eta.iter().map(|&e| expit(e)).collect();
            let y = bernoulli(&p, &mut rng);
            measure(&y, &eta)
        })
        .collect();
    values.iter().sum::<f64>() / values.len() as f64
}

#[test]
fn citl_of_truth_and_shifted_truth() {
    let truth = averaged(1, |y, lp| citl(y, lp).unwrap().value);
    assert!(truth.abs() <= 0.02, "{truth}");
    let shifted = averaged(1, |y, lp| {
        let lp: Vec<f64> = lp.iter().map(|v| v + 0.5).collect();
        citl(y, &lp).unwrap().value
    });
    assert!((shifted + 0.5).abs() <= 0.02, "{shifted}");
}

#[test]
fn calibration_slope_of_scaled_truth() {
    let truth = averaged(2, |y, lp| calibration_slope(y, lp).unwrap().value);
    assert!((truth - 1.0).abs() <= 0.05, "{truth}");
    let doubled = averaged(2, |y, lp| {
        let lp: Vec<f64> = lp.iter().map(|v| 2.0 * v).collect();
        calibration_slope(y, &lp).unwrap().value
    });
    assert!((doubled - 0.5).abs() <= 0.05, "{doubled}");
    let halved = averaged(2, |y, lp| {
        let lp: Vec<f64> = lp.iter().map(|v| 0.5 * v).collect();
        calibration_slope(y, &lp).unwrap().value
    });
    assert!((halved - 2.0).abs() <= 0.05, "{halved}");
}

#[test]
fn brier_of_constant_prevalence() {
    let n = 1_000_000;
    let pi = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y = bernoulli(&vec![pi; n], &mut rng);
    let score = brier(&y, &vec![pi; n]).unwrap();
    let squared: Vec<f64> = y.iter().map(|&v| (pi - f64::from(v)).powi(2)).collect();
    let (_, se) = mean_and_se(&squared);
    assert!((score - pi * (1.0 - pi)).abs() <= 3.0 * se, "{score}");
}

fn instance() -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
    (2usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(0u8..2, n),
            // coarse grid so that ties are common
            prop::collection::vec((0u32..20).prop_map(|k| f64::from(k) / 20.0), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn c_statistic_matches_pair_enumeration((mut y, p) in instance()) {
        // both classes present
        y[0] = 0;
        y[1] = 1;
        let fast = c_statistic(&y, &p).unwrap();
        prop_assert!((fast - c_statistic_pairs(&y, &p)).abs() <= 1e-12);
    }
}
