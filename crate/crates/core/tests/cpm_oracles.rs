//! Outcome-model fitting and the single-record deployment path.

use cpmiss_core::{
    fit_cpm, fit_imputation_model, generate_cohort, impute_deterministic, predict_cohort, predict_single,
    split_cohort, CompletedData, CpmVariant, ParameterConfig, PartialRecord,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn complete_data_fit_is_consistent() {
    let config = ParameterConfig {
        n_total: 200_000,
        ..Default::default()
    };
    let cohort = generate_cohort(&config, &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
    let cpm = fit_cpm(&[CompletedData::original(&cohort)], CpmVariant::Base).unwrap();
    let truth = [cohort.gamma0_used, 0.7, 0.7, 0.1];
    for j in 0..4 {
        let se = cpm.total_variance[j].sqrt();
        assert!(
            (cpm.coefficients[j] - truth[j]).abs() <= 3.0 * se,
            "coefficient {j}: {} vs {} (se {se})",
            cpm.coefficients[j],
            truth[j]
        );
    }
}

#[test]
fn single_records_match_the_batch_pipeline() {
    let config = ParameterConfig {
        beta_x1: 1.0,
        beta_y: 0.5,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let cohort = generate_cohort(&config, &mut rng).unwrap();
    let (dev, val) = split_cohort(&cohort, 0.5, &mut rng).unwrap();
    let imputation = fit_imputation_model(&dev, false).unwrap();
    let developed = impute_deterministic(&dev, &imputation).unwrap();
    for variant in CpmVariant::ALL {
        let cpm = fit_cpm(std::slice::from_ref(&developed), variant).unwrap();
        let batch = predict_cohort(&cpm, &imputation, &val).unwrap();
        for i in 0..val.len() {
            let record = PartialRecord {
                x2: val.x2[i],
                x1: val.x1_observed[i],
            };
            let single = predict_single(&cpm, &imputation, record, true).unwrap();
            assert!((single - batch.raw[i]).abs() <= 1e-12);
        }
    }
}
