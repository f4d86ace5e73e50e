//! Grid enumeration, iteration orchestration, result persistence and
//! summaries.

pub mod experiment;
pub mod grid;
pub mod records;
pub mod summary;

pub use experiment::{
    iteration_cohort, iteration_triples, run_experiment, run_iteration, task_seed, ExperimentOptions,
    ExperimentSummary, InterceptScope, IterationSettings, Progress, TRIPLES_PER_ITERATION,
};
pub use grid::{
    classify_mechanism, enumerate_grid, presentation_config_id, ConfigFilter, Mechanism, Predicate,
};
pub use records::{
    read_rows, read_rows_from_path, CsvRow, ResultsWriter, RunRecord, CSV_HEADER, DEV_NONCONVERGED_TAG,
    WARNING_PREFIX,
};
pub use summary::{parse_row_filter, summarize, GroupKey, Statistic, SummaryRow, SummaryTable};
