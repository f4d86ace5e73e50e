//! Iteration and experiment orchestration with scheduling-independent
//! seeding.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cpm::{fit_cpm, CpmVariant, PooledCpm};
use crate::datagen::{
    calibrate_reference_intercepts, generate_cohort_with, split_cohort, Cohort, InterceptPolicy,
    ParameterConfig,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    complete_cohort, evaluate, prepare_validation, Method, Strategy, ValidationMode, ValidationSet,
};
use crate::imputation::{CompletedData, DEFAULT_IMPUTATIONS};

use super::grid::{classify_mechanism, enumerate_grid, ConfigFilter};
use super::records::{ResultsWriter, RunRecord, DEV_NONCONVERGED_TAG};

/// Records produced per iteration.
pub const TRIPLES_PER_ITERATION: usize = 31;

/// SplitMix64 finaliser: a bijection on `u64` with good avalanche.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(splitmix64(splitmix64(master) ^ config_id) ^ iteration)`.
///
/// For a fixed master seed and config, distinct iterations always get
/// distinct seeds because each step is a bijection.
pub fn task_seed(master_seed: u64, config_id: usize, iteration: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ config_id as u64) ^ iteration as u64)
}

/// Seed of the reference sample used for per-configuration intercepts.
pub fn reference_seed(master_seed: u64, config_id: usize) -> u64 {
    splitmix64(task_seed(master_seed, config_id, 0) ^ 0x5245_4645_5245_4E43)
}

// ChaCha stream ids under a task seed. Each stage of an iteration owns one
// stream, so results do not depend on the order stages are computed in.
const STREAM_COHORT: u64 = 0;

fn development_stream(method: Method, include_outcome: bool) -> u64 {
    16 + 2 * method as u64 + u64::from(include_outcome)
}

fn validation_stream(method: Method, mode: ValidationMode) -> u64 {
    let m = match mode {
        ValidationMode::ImputeWithOutcome => 0,
        ValidationMode::ImputeWithoutOutcome => 1,
        ValidationMode::CompleteData => 2,
    };
    32 + 4 * method as u64 + m
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// The canonical (method, strategy, variant) order of an iteration's records.
pub fn iteration_triples() -> Vec<(Method, Strategy, CpmVariant)> {
    let mut triples = vec![(Method::Complete, Strategy::DaVa, CpmVariant::Base)];
    for method in [Method::Ri, Method::Mi] {
        for strategy in Strategy::IMPUTED {
            for variant in CpmVariant::ALL {
                triples.push((method, strategy, variant));
            }
        }
    }
    triples
}

/// Per-iteration settings shared by every task of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationSettings {
    pub master_seed: u64,
    /// Number of multiple imputations.
    pub m: usize,
    pub intercepts: InterceptPolicy,
}

impl Default for IterationSettings {
    fn default() -> Self {
        Self {
            master_seed: 0,
            m: DEFAULT_IMPUTATIONS,
            intercepts: InterceptPolicy::PerDataset,
        }
    }
}

fn error_tag(e: &Error) -> String {
    // keep the CSV single-line
    e.to_string().replace(['\n', '\r'], " ")
}

struct IterationState<'a> {
    dev: &'a Cohort,
    val: &'a Cohort,
    seed: u64,
    m: usize,
    developed: HashMap<(Method, bool), Result<Vec<CompletedData>>>,
    models: HashMap<(Method, bool, CpmVariant), Result<PooledCpm>>,
    validation: HashMap<(Method, ValidationMode), Result<ValidationSet>>,
}

impl IterationState<'_> {
    fn model(&mut self, method: Method, include_outcome: bool, variant: CpmVariant) -> Result<PooledCpm> {
        if let Some(done) = self.models.get(&(method, include_outcome, variant)) {
            return done.clone();
        }
        let (dev, seed, m) = (self.dev, self.seed, self.m);
        let developed = self
            .developed
            .entry((method, include_outcome))
            .or_insert_with(|| {
                let mut rng = stream(seed, development_stream(method, include_outcome));
                complete_cohort(dev, method, include_outcome, m, &mut rng)
            });
        let fitted = match developed {
            Ok(data) => fit_cpm(data, variant),
            Err(e) => Err(e.clone()),
        };
        self.models
            .insert((method, include_outcome, variant), fitted.clone());
        fitted
    }

    fn validation(&mut self, method: Method, mode: ValidationMode) -> Result<&ValidationSet> {
        let (val, seed, m) = (self.val, self.seed, self.m);
        self.validation
            .entry((method, mode))
            .or_insert_with(|| {
                let mut rng = stream(seed, validation_stream(method, mode));
                prepare_validation(val, method, mode, m, &mut rng)
            })
            .as_ref()
            .map_err(Clone::clone)
    }
}

/// The cohort of one iteration and its (development, validation) split,
/// exactly as [`run_iteration`] generates them.
pub fn iteration_cohort(
    config_id: usize,
    config: &ParameterConfig,
    iteration: usize,
    settings: &IterationSettings,
) -> Result<(Cohort, (Cohort, Cohort))> {
    let mut rng = stream(
        task_seed(settings.master_seed, config_id, iteration),
        STREAM_COHORT,
    );
    let cohort = generate_cohort_with(config, settings.intercepts, &mut rng)?;
    let split = split_cohort(&cohort, config.split_fraction, &mut rng)?;
    Ok((cohort, split))
}

/// Runs every compatible (method, strategy, variant) triple on one
/// generated cohort. Always returns [`TRIPLES_PER_ITERATION`] records;
/// failures are recorded in `error_tag`.
///
/// Imputed development data are shared by all strategies and variants with
/// the same method and outcome usage, and imputed validation data by all
/// strategies with the same validation mode, so comparisons within an
/// iteration use common random numbers.
pub fn run_iteration(
    config_id: usize,
    config: &ParameterConfig,
    iteration: usize,
    settings: &IterationSettings,
) -> Vec<RunRecord> {
    let seed = task_seed(settings.master_seed, config_id, iteration);
    let mechanism = classify_mechanism(config);
    let triples = iteration_triples();

    let base_record = |(method, strategy, variant): (Method, Strategy, CpmVariant)| RunRecord {
        config_id,
        iteration,
        seed,
        mechanism,
        method,
        strategy,
        variant,
        metrics: None,
        coefficients: [None; 6],
        gamma0_used: f64::NAN,
        beta0_used: f64::NAN,
        error_tag: None,
        elapsed: Duration::ZERO,
    };

    let (cohort, (dev, val)) = match iteration_cohort(config_id, config, iteration, settings) {
        Ok(v) => v,
        Err(e) => {
            let tag = error_tag(&e);
            return triples
                .into_iter()
                .map(|t| RunRecord {
                    error_tag: Some(tag.clone()),
                    ..base_record(t)
                })
                .collect();
        }
    };

    let mut state = IterationState {
        dev: &dev,
        val: &val,
        seed,
        m: settings.m,
        developed: HashMap::new(),
        models: HashMap::new(),
        validation: HashMap::new(),
    };

    triples
        .into_iter()
        .map(|triple @ (method, strategy, variant)| {
            let start = Instant::now();
            let include_outcome = strategy.dev_uses_outcome().unwrap_or(false);
            let outcome = state.model(method, include_outcome, variant).and_then(|cpm| {
                let validation = state.validation(method, strategy.validation_mode())?;
                let (metrics, _) = evaluate(&cpm, validation)?;
                Ok((cpm, metrics))
            });
            let mut record = RunRecord {
                gamma0_used: cohort.gamma0_used,
                beta0_used: cohort.beta0_used,
                ..base_record(triple)
            };
            match outcome {
                Ok((cpm, metrics)) => {
                    record.metrics = Some(metrics);
                    record.coefficients = cpm.padded_coefficients();
                    if cpm.any_nonconverged {
                        record.error_tag = Some(DEV_NONCONVERGED_TAG.to_string());
                    }
                }
                Err(e) => record.error_tag = Some(error_tag(&e)),
            }
            record.elapsed = start.elapsed();
            record
        })
        .collect()
}

/// How intercepts are calibrated across an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InterceptScope {
    /// Calibrate on every generated dataset.
    #[default]
    PerDataset,
    /// Calibrate once per configuration on a reference sample.
    PerConfig { reference_n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    pub master_seed: u64,
    pub iterations: usize,
    pub configs: ConfigFilter,
    /// Overrides every configuration's `n_total`.
    pub n_total: Option<usize>,
    pub m: usize,
    pub workers: usize,
    pub output: PathBuf,
    pub intercepts: InterceptScope,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            master_seed: 0,
            iterations: 200,
            configs: ConfigFilter::All,
            n_total: None,
            m: DEFAULT_IMPUTATIONS,
            workers: 1,
            output: PathBuf::from("results.csv"),
            intercepts: InterceptScope::PerDataset,
        }
    }
}

/// Progress notification sent after each batch of tasks is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub tasks_done: usize,
    pub tasks_total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub configs: usize,
    pub tasks: usize,
    pub rows: usize,
    pub error_rows: usize,
    pub output: PathBuf,
}

/// Runs every selected (config, iteration) task on `workers` threads and
/// writes the records in canonical (config, iteration, triple) order, so
/// the output bytes do not depend on the worker count.
pub fn run_experiment(
    options: &ExperimentOptions,
    mut progress: impl FnMut(Progress),
) -> Result<ExperimentSummary> {
    if options.iterations == 0 {
        return Err(Error::InvalidParameter {
            name: "iterations",
            reason: "must be at least 1".into(),
        });
    }
    if options.m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: "must be at least 1".into(),
        });
    }
    let grid = enumerate_grid();
    let ids = options.configs.select(&grid)?;
    let configs: Vec<(usize, ParameterConfig, IterationSettings)> = ids
        .iter()
        .map(|&id| {
            let mut config = grid[id];
            if let Some(n) = options.n_total {
                config.n_total = n;
            }
            config.validate()?;
            let intercepts = match options.intercepts {
                InterceptScope::PerDataset => InterceptPolicy::PerDataset,
                InterceptScope::PerConfig { reference_n } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(reference_seed(options.master_seed, id));
                    let (gamma0, beta0) = calibrate_reference_intercepts(&config, reference_n, &mut rng)?;
                    InterceptPolicy::Fixed { gamma0, beta0 }
                }
            };
            let settings = IterationSettings {
                master_seed: options.master_seed,
                m: options.m,
                intercepts,
            };
            Ok((id, config, settings))
        })
        .collect::<Result<_>>()?;

    let tasks: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..options.iterations).map(move |it| (c, it)))
        .collect();

    let file =
        File::create(&options.output).map_err(|e| Error::Io(format!("{}: {e}", options.output.display())))?;
    let mut writer = ResultsWriter::new(BufWriter::new(file))?;

    let workers = options.workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Io(format!("thread pool: {e}")))?;

    let mut rows = 0;
    let mut error_rows = 0;
    let batch = (workers * 4).max(8);
    for (done, chunk) in tasks.chunks(batch).scan(0, |done, c| {
        *done += c.len();
        Some((*done, c))
    }) {
        let results: Vec<Vec<RunRecord>> = pool.install(|| {
            chunk
                .par_iter()
                .map(|&(c, iteration)| {
                    let (id, config, settings) = &configs[c];
                    run_iteration(*id, config, iteration, settings)
                })
                .collect()
        });
        for record in results.iter().flatten() {
            writer.write(record)?;
            rows += 1;
            error_rows += usize::from(record.is_failure());
        }
        writer.flush()?;
        progress(Progress {
            tasks_done: done,
            tasks_total: tasks.len(),
        });
    }

    Ok(ExperimentSummary {
        configs: configs.len(),
        tasks: tasks.len(),
        rows,
        error_rows,
        output: options.output.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirty_one_triples_in_canonical_order() {
        let t = iteration_triples();
        assert_eq!(t.len(), TRIPLES_PER_ITERATION);
        assert_eq!(t[0], (Method::Complete, Strategy::DaVa, CpmVariant::Base));
        assert_eq!(t[1], (Method::Ri, Strategy::DyVy, CpmVariant::Base));
        assert_eq!(
            t[30],
            (Method::Mi, Strategy::DnoyVa, CpmVariant::IndicatorInteraction)
        );
        let mut dedup = t.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 31);
    }

    #[test]
    fn seeds_differ_across_iterations_and_configs() {
        let a = task_seed(1, 5, 0);
        assert_eq!(a, task_seed(1, 5, 0));
        assert_ne!(a, task_seed(1, 5, 1));
        assert_ne!(a, task_seed(1, 6, 0));
        assert_ne!(a, task_seed(2, 5, 0));
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| task_seed(9, 3, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn stream_ids_are_distinct() {
        let mut ids = vec![STREAM_COHORT];
        for m in Method::ALL {
            for y in [false, true] {
                ids.push(development_stream(m, y));
            }
            for v in [
                ValidationMode::ImputeWithOutcome,
                ValidationMode::ImputeWithoutOutcome,
                ValidationMode::CompleteData,
            ] {
                ids.push(validation_stream(m, v));
            }
        }
        let n = ids.len();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), n);
    }

    #[test]
    fn iteration_is_deterministic_and_complete() {
        let config = ParameterConfig {
            n_total: 1000,
            beta_x2: 1.0,
            ..Default::default()
        };
        let settings = IterationSettings {
            master_seed: 11,
            m: 3,
            ..Default::default()
        };
        let a = run_iteration(4, &config, 2, &settings);
        let b = run_iteration(4, &config, 2, &settings);
        assert_eq!(a.len(), 31);
        let strip = |v: Vec<RunRecord>| {
            v.into_iter()
                .map(|mut r| {
                    r.elapsed = Duration::ZERO;
                    r
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(a.clone()), strip(b));
        assert!(
            a.iter().all(|r| r.error_tag.is_none()),
            "{:?}",
            a.iter().find(|r| r.error_tag.is_some())
        );
        let other = run_iteration(4, &config, 3, &settings);
        assert_ne!(a[0].seed, other[0].seed);
        // base variants leave the indicator coefficients empty
        assert!(a[0].coefficients[4].is_none());
        assert!(a[2].coefficients[4].is_some() && a[2].coefficients[5].is_none());
    }

    #[test]
    fn generation_failure_yields_error_rows() {
        let config = ParameterConfig {
            n_total: 100,
            pi_y: 1.5,
            ..Default::default()
        };
        let rows = run_iteration(0, &config, 0, &IterationSettings::default());
        assert_eq!(rows.len(), 31);
        assert!(rows.iter().all(|r| r.error_tag.is_some() && r.metrics.is_none()));
    }
}
