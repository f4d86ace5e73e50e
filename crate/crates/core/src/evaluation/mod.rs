//! Performance measures and the development/validation strategies.

pub mod metrics;
pub mod strategy;

pub use metrics::{brier, c_statistic, calibration_slope, citl, CalibrationEstimate, MetricSet};
pub use strategy::{
    check_compatible, complete_cohort, evaluate, prepare_validation, run_strategy, Method, Strategy,
    StrategyResult, ValidationMode, ValidationSet,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpm::CpmVariant;
    use crate::datagen::{generate_cohort, split_cohort, ParameterConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn strategy_table() {
        let rows: Vec<(&str, Option<bool>, ValidationMode, bool)> = Strategy::ALL
            .iter()
            .map(|s| {
                (
                    s.tag(),
                    s.dev_uses_outcome(),
                    s.validation_mode(),
                    s.missingness_allowed_at_deployment(),
                )
            })
            .collect();
        use ValidationMode::*;
        assert_eq!(
            rows,
            vec![
                ("DA+VA", None, CompleteData, false),
                ("DY+VY", Some(true), ImputeWithOutcome, false),
                ("DnoY+VnoY", Some(false), ImputeWithoutOutcome, true),
                ("DY+VnoY", Some(true), ImputeWithoutOutcome, true),
                ("DY+VA", Some(true), CompleteData, false),
                ("DnoY+VA", Some(false), CompleteData, false),
            ]
        );
        for s in Strategy::ALL {
            assert_eq!(s.tag().parse::<Strategy>().unwrap(), s);
        }
    }

    #[test]
    fn incompatible_triples_rejected() {
        assert!(check_compatible(Method::Complete, Strategy::DaVa, CpmVariant::Base).is_ok());
        assert!(check_compatible(Method::Complete, Strategy::DaVa, CpmVariant::Indicator).is_err());
        assert!(check_compatible(Method::Complete, Strategy::DyVa, CpmVariant::Base).is_err());
        assert!(check_compatible(Method::Ri, Strategy::DaVa, CpmVariant::Base).is_err());
        assert!(check_compatible(Method::Mi, Strategy::DyVy, CpmVariant::IndicatorInteraction).is_ok());
    }

    fn cohorts(seed: u64) -> (crate::Cohort, crate::Cohort) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = ParameterConfig {
            beta_x2: 1.0,
            ..Default::default()
        };
        let cohort = generate_cohort(&config, &mut rng).unwrap();
        split_cohort(&cohort, 0.5, &mut rng).unwrap()
    }

    #[test]
    fn ri_yields_one_validation_dataset() {
        let (dev, val) = cohorts(1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for s in Strategy::IMPUTED {
            let r = run_strategy(&dev, &val, Method::Ri, s, CpmVariant::Indicator, 20, &mut rng).unwrap();
            assert_eq!(r.per_imputation_metrics.len(), 1);
            assert_eq!(r.coefficients.m, 1);
        }
    }

    #[test]
    fn mi_pools_twenty_validation_datasets() {
        let (dev, val) = cohorts(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = run_strategy(
            &dev,
            &val,
            Method::Mi,
            Strategy::DyVy,
            CpmVariant::Base,
            20,
            &mut rng,
        )
        .unwrap();
        assert_eq!(r.per_imputation_metrics.len(), 20);
        assert_eq!(r.coefficients.m, 20);
        let n = 20.0;
        let mean = |f: fn(&MetricSet) -> f64| r.per_imputation_metrics.iter().map(f).sum::<f64>() / n;
        assert!((r.metrics.citl - mean(|m| m.citl)).abs() <= 1e-12);
        assert!((r.metrics.slope - mean(|m| m.slope)).abs() <= 1e-12);
        assert!((r.metrics.cstat - mean(|m| m.cstat)).abs() <= 1e-12);
        assert!((r.metrics.brier - mean(|m| m.brier)).abs() <= 1e-12);
    }

    #[test]
    fn complete_reference_is_well_calibrated() {
        let (dev, val) = cohorts(5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let r = run_strategy(
            &dev,
            &val,
            Method::Complete,
            Strategy::DaVa,
            CpmVariant::Base,
            20,
            &mut rng,
        )
        .unwrap();
        assert!(r.metrics.cstat > 0.5);
        assert!((r.metrics.slope - 1.0).abs() < 0.3);
        assert!(run_strategy(
            &dev,
            &val,
            Method::Complete,
            Strategy::DyVa,
            CpmVariant::Base,
            20,
            &mut rng
        )
        .is_err());
    }
}
