//! Result rows and their CSV representation.

use std::io::{Read, Write};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cpm::CpmVariant;
use crate::error::{Error, Result};
use crate::evaluation::{Method, MetricSet, Strategy};

use super::grid::Mechanism;

/// Column order of the results file.
pub const CSV_HEADER: [&str; 22] = [
    "config_id",
    "iteration",
    "seed",
    "mechanism",
    "method",
    "strategy",
    "variant",
    "citl",
    "citl_converged",
    "slope",
    "slope_converged",
    "cstat",
    "brier",
    "coef_intercept",
    "coef_x1",
    "coef_x2",
    "coef_x1x2",
    "coef_r1",
    "coef_r1x1",
    "gamma0_used",
    "beta0_used",
    "error_tag",
];

/// Prefix of `error_tag` values that annotate a row whose results are
/// still present, as opposed to a failed row.
pub const WARNING_PREFIX: &str = "warning:";

/// Tag for rows whose development fit (any imputation, for MI) stopped
/// before converging. Metrics and coefficients are kept.
pub const DEV_NONCONVERGED_TAG: &str = "warning: development fit did not converge";

fn is_failure(tag: Option<&str>) -> bool {
    tag.is_some_and(|t| !t.starts_with(WARNING_PREFIX))
}

/// One (config, iteration, method, strategy, variant) result.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config_id: usize,
    pub iteration: usize,
    pub seed: u64,
    pub mechanism: Mechanism,
    pub method: Method,
    pub strategy: Strategy,
    pub variant: CpmVariant,
    /// `None` when the triple failed; see `error_tag`.
    pub metrics: Option<MetricSet>,
    /// Development coefficients over the full roster, `None` outside the
    /// variant's roster or on failure.
    pub coefficients: [Option<f64>; 6],
    pub gamma0_used: f64,
    pub beta0_used: f64,
    /// Failure reason, or a [`WARNING_PREFIX`] annotation.
    pub error_tag: Option<String>,
    /// Wall time spent on this triple. Not persisted, so that output stays
    /// byte-identical across runs.
    pub elapsed: Duration,
}

/// Flat CSV row, field order matching [`CSV_HEADER`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub config_id: usize,
    pub iteration: usize,
    pub seed: u64,
    pub mechanism: String,
    pub method: String,
    pub strategy: String,
    pub variant: String,
    pub citl: Option<f64>,
    pub citl_converged: Option<bool>,
    pub slope: Option<f64>,
    pub slope_converged: Option<bool>,
    pub cstat: Option<f64>,
    pub brier: Option<f64>,
    pub coef_intercept: Option<f64>,
    pub coef_x1: Option<f64>,
    pub coef_x2: Option<f64>,
    pub coef_x1x2: Option<f64>,
    pub coef_r1: Option<f64>,
    pub coef_r1x1: Option<f64>,
    pub gamma0_used: Option<f64>,
    pub beta0_used: Option<f64>,
    pub error_tag: Option<String>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl From<&RunRecord> for CsvRow {
    fn from(r: &RunRecord) -> Self {
        let [ci, cx1, cx2, cx1x2, cr1, cr1x1] = r.coefficients;
        Self {
            config_id: r.config_id,
            iteration: r.iteration,
            seed: r.seed,
            mechanism: r.mechanism.tag().into(),
            method: r.method.tag().into(),
            strategy: r.strategy.tag().into(),
            variant: r.variant.tag().into(),
            citl: r.metrics.map(|m| m.citl),
            citl_converged: r.metrics.map(|m| m.citl_converged),
            slope: r.metrics.map(|m| m.slope),
            slope_converged: r.metrics.map(|m| m.slope_converged),
            cstat: r.metrics.map(|m| m.cstat),
            brier: r.metrics.map(|m| m.brier),
            coef_intercept: ci,
            coef_x1: cx1,
            coef_x2: cx2,
            coef_x1x2: cx1x2,
            coef_r1: cr1,
            coef_r1x1: cr1x1,
            gamma0_used: finite(r.gamma0_used),
            beta0_used: finite(r.beta0_used),
            error_tag: r.error_tag.clone(),
        }
    }
}

impl RunRecord {
    /// True when the triple produced no results.
    pub fn is_failure(&self) -> bool {
        is_failure(self.error_tag.as_deref())
    }
}

impl CsvRow {
    pub fn is_failure(&self) -> bool {
        is_failure(self.error_tag.as_deref())
    }

    /// Development and both recalibration fits converged.
    pub fn converged(&self) -> bool {
        self.citl_converged == Some(true)
            && self.slope_converged == Some(true)
            && self.error_tag.as_deref() != Some(DEV_NONCONVERGED_TAG)
    }
}

/// Writes rows after an explicit header line.
pub struct ResultsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> ResultsWriter<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        inner.write_record(CSV_HEADER)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, record: &RunRecord) -> Result<()> {
        self.inner.serialize(CsvRow::from(record))?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Parses a results file, checking the header.
pub fn read_rows<R: Read>(reader: R) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Csv(format!(
            "unexpected header: {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn read_rows_from_path(path: &Path) -> Result<Vec<CsvRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_rows(std::io::BufReader::new(file))
}
