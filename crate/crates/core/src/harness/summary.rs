//! Grouped medians or means of a results file, with coefficient bias.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::grid::enumerate_grid;
use super::records::CsvRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Statistic {
    #[default]
    Median,
    Mean,
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(Statistic::Median),
            "mean" => Ok(Statistic::Mean),
            other => Err(Error::InvalidParameter {
                name: "stat",
                reason: format!("expected median or mean, got `{other}`"),
            }),
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::Median => "median",
            Statistic::Mean => "mean",
        })
    }
}

/// Columns rows can be grouped or filtered on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKey {
    ConfigId,
    Iteration,
    Mechanism,
    Method,
    Strategy,
    Variant,
}

impl GroupKey {
    pub fn name(self) -> &'static str {
        match self {
            GroupKey::ConfigId => "config_id",
            GroupKey::Iteration => "iteration",
            GroupKey::Mechanism => "mechanism",
            GroupKey::Method => "method",
            GroupKey::Strategy => "strategy",
            GroupKey::Variant => "variant",
        }
    }

    fn value(self, row: &CsvRow) -> String {
        match self {
            GroupKey::ConfigId => row.config_id.to_string(),
            GroupKey::Iteration => row.iteration.to_string(),
            GroupKey::Mechanism => row.mechanism.clone(),
            GroupKey::Method => row.method.clone(),
            GroupKey::Strategy => row.strategy.clone(),
            GroupKey::Variant => row.variant.clone(),
        }
    }

    /// Parses a comma-separated key list such as `strategy,method,variant`.
    pub fn parse_list(s: &str) -> Result<Vec<GroupKey>> {
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.trim().parse())
            .collect()
    }
}

impl FromStr for GroupKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            GroupKey::ConfigId,
            GroupKey::Iteration,
            GroupKey::Mechanism,
            GroupKey::Method,
            GroupKey::Strategy,
            GroupKey::Variant,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::InvalidFilter(format!("unknown column `{s}`")))
    }
}

/// Parses `key=value,key=value`.
pub fn parse_row_filter(s: &str) -> Result<Vec<(GroupKey, String)>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|part| {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidFilter(format!("expected key=value, got `{part}`")))?;
            Ok((k.trim().parse()?, v.trim().to_string()))
        })
        .collect()
}

/// Summarised value columns, in output order.
pub const VALUE_COLUMNS: [&str; 14] = [
    "citl",
    "slope",
    "cstat",
    "brier",
    "coef_intercept",
    "coef_x1",
    "coef_x2",
    "coef_x1x2",
    "coef_r1",
    "coef_r1x1",
    "bias_intercept",
    "bias_x1",
    "bias_x2",
    "bias_x1x2",
];

/// Value columns of one row. Bias is the estimate minus the generating
/// value; the intercept is compared with the row's own calibrated `gamma0`.
fn row_values(row: &CsvRow, truth: Option<(f64, f64, f64)>) -> [Option<f64>; 14] {
    let bias = |est: Option<f64>, target: Option<f64>| est.zip(target).map(|(e, t)| e - t);
    [
        row.citl,
        row.slope,
        row.cstat,
        row.brier,
        row.coef_intercept,
        row.coef_x1,
        row.coef_x2,
        row.coef_x1x2,
        row.coef_r1,
        row.coef_r1x1,
        bias(row.coef_intercept, row.gamma0_used),
        bias(row.coef_x1, truth.map(|t| t.0)),
        bias(row.coef_x2, truth.map(|t| t.1)),
        bias(row.coef_x1x2, truth.map(|t| t.2)),
    ]
}

/// Median of the finite values; the mean of the middle pair for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

pub fn mean(values: &[f64]) -> Option<f64> {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub keys: Vec<String>,
    pub n_rows: usize,
    pub n_errors: usize,
    pub n_nonconverged: usize,
    pub values: Vec<Option<f64>>,
}

impl SummaryRow {
    pub fn value(&self, column: &str) -> Option<f64> {
        VALUE_COLUMNS
            .iter()
            .position(|c| *c == column)
            .and_then(|j| self.values[j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub group_by: Vec<GroupKey>,
    pub statistic: Statistic,
    /// Groups in order of first appearance in the input.
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn find(&self, keys: &[&str]) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.keys.iter().map(String::as_str).eq(keys.iter().copied()))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = self.group_by.iter().map(|k| k.name().to_string()).collect();
        header.extend(["n_rows", "n_errors", "n_nonconverged"].map(String::from));
        header.extend(VALUE_COLUMNS.iter().map(|c| format!("{}_{c}", self.statistic)));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut fields = row.keys.clone();
            fields.push(row.n_rows.to_string());
            fields.push(row.n_errors.to_string());
            fields.push(row.n_nonconverged.to_string());
            fields.extend(
                row.values
                    .iter()
                    .map(|v| v.map_or_else(String::new, |x| x.to_string())),
            );
            w.write_record(&fields)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Groups `rows` by `group_by` after applying `filter`, and reduces every
/// value column with `statistic`.
pub fn summarize(
    rows: &[CsvRow],
    group_by: &[GroupKey],
    statistic: Statistic,
    filter: &[(GroupKey, String)],
) -> Result<SummaryTable> {
    let grid = enumerate_grid();
    let truth = |id: usize| grid.get(id).map(|c| (c.gamma_x1, c.gamma_x2, c.gamma_x1x2));

    let mut order: Vec<Vec<String>> = Vec::new();
    let mut groups: HashMap<Vec<String>, Vec<&CsvRow>> = HashMap::new();
    for row in rows
        .iter()
        .filter(|r| filter.iter().all(|(k, v)| k.value(r) == *v))
    {
        let key: Vec<String> = group_by.iter().map(|k| k.value(row)).collect();
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(row);
    }
    if order.is_empty() {
        return Err(Error::EmptySelection("no rows match the filter".into()));
    }

    let reduce = match statistic {
        Statistic::Median => median,
        Statistic::Mean => mean,
    };
    let summary_rows = order
        .into_iter()
        .map(|key| {
            let members = &groups[&key];
            let per_row: Vec<[Option<f64>; 14]> = members
                .iter()
                .map(|r| row_values(r, truth(r.config_id)))
                .collect();
            let values = (0..VALUE_COLUMNS.len())
                .map(|j| {
                    let col: Vec<f64> = per_row.iter().filter_map(|v| v[j]).collect();
                    reduce(&col)
                })
                .collect();
            SummaryRow {
                n_rows: members.len(),
                n_errors: members.iter().filter(|r| r.is_failure()).count(),
                n_nonconverged: members
                    .iter()
                    .filter(|r| !r.is_failure() && !r.converged())
                    .count(),
                keys: key,
                values,
            }
        })
        .collect();

    Ok(SummaryTable {
        group_by: group_by.to_vec(),
        statistic,
        rows: summary_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(strategy: &str, citl: f64, coef_x1: f64) -> CsvRow {
        CsvRow {
            config_id: 0,
            iteration: 0,
            seed: 1,
            mechanism: "MCAR".into(),
            method: "RI".into(),
            strategy: strategy.into(),
            variant: "base".into(),
            citl: Some(citl),
            citl_converged: Some(true),
            slope: Some(1.0),
            slope_converged: Some(true),
            cstat: Some(0.7),
            brier: Some(0.08),
            coef_intercept: Some(-2.0),
            coef_x1: Some(coef_x1),
            coef_x2: Some(0.5),
            coef_x1x2: Some(0.0),
            coef_r1: None,
            coef_r1x1: None,
            gamma0_used: Some(-2.5),
            beta0_used: Some(0.0),
            error_tag: None,
        }
    }

    #[test]
    fn median_basics() {
        assert_eq!(median(&[1.0, 2.0, 3.0]), Some(2.0));
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), Some(2.5));
        assert_eq!(median(&[f64::NAN]), None);
        assert_eq!(mean(&[1.0, 2.0, 6.0]), Some(3.0));
    }

    #[test]
    fn grouping_and_bias() {
        let rows = vec![
            row("DY+VA", 1.0, 0.5),
            row("DY+VA", 2.0, 0.6),
            row("DY+VA", 3.0, 0.9),
            row("DnoY+VA", -1.0, 0.4),
        ];
        let keys = GroupKey::parse_list("strategy,method,variant").unwrap();
        let t = summarize(&rows, &keys, Statistic::Median, &[]).unwrap();
        assert_eq!(t.rows.len(), 2);
        let a = t.find(&["DY+VA", "RI", "base"]).unwrap();
        assert_eq!(a.n_rows, 3);
        assert_eq!(a.value("citl"), Some(2.0));
        // config 0 has gamma_x1 = 0.5
        assert!((a.value("bias_x1").unwrap() - 0.1).abs() < 1e-12);
        assert!((a.value("bias_intercept").unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(a.value("coef_r1"), None);

        let filtered = summarize(
            &rows,
            &keys,
            Statistic::Mean,
            &parse_row_filter("strategy=DnoY+VA").unwrap(),
        )
        .unwrap();
        assert_eq!(filtered.rows.len(), 1);
        assert!(summarize(
            &rows,
            &keys,
            Statistic::Mean,
            &parse_row_filter("method=MI").unwrap()
        )
        .is_err());

        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("strategy,method,variant,n_rows,n_errors,n_nonconverged,median_citl,"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn warnings_are_not_errors() {
        let mut warned = row("DY+VA", 0.0, 0.7);
        warned.error_tag = Some(crate::harness::DEV_NONCONVERGED_TAG.into());
        let mut failed = row("DY+VA", 0.0, 0.7);
        failed.error_tag = Some("singular".into());
        failed.citl = None;
        let rows = vec![row("DY+VA", 1.0, 0.7), warned, failed];
        let t = summarize(&rows, &[GroupKey::Strategy], Statistic::Median, &[]).unwrap();
        let r = &t.rows[0];
        assert_eq!((r.n_rows, r.n_errors, r.n_nonconverged), (3, 1, 1));
        assert_eq!(r.value("citl"), Some(0.5));
    }

    #[test]
    fn bad_keys() {
        assert!(GroupKey::parse_list("strategy,nope").is_err());
        assert!(parse_row_filter("strategy").is_err());
        assert!("mode".parse::<Statistic>().is_err());
    }
}
