//! Plain-text model artifact holding a fitted CPM and the regression
//! imputation model used to fill in `x1` at prediction time.
//!
//! ```text
//! cpmiss-model v1
//! [cpm]
//! variant indicator
//! m 1
//! any_nonconverged false
//! any_separation false
//! # coef <label> <estimate> <within> <between> <total>
//! coef intercept -2.61 0.0041 0 0.0041
//! ...
//! [imputation]
//! uses_outcome false
//! n_obs 2493
//! residual_variance 0.8391
//! # coef <label> <estimate>
//! coef intercept 0.012
//! coef x2 0.401
//! gram_inverse 0.0004 -0.00001
//! gram_inverse -0.00001 0.0004
//! ```
//!
//! Numbers are written in Rust's shortest round-trip form, so reading an
//! artifact back reproduces the in-memory model bit for bit.

use std::path::Path;

use rand::Rng;

use crate::cpm::{fit_cpm, CpmVariant, PooledCpm};
use crate::datagen::{generate_cohort, split_cohort, ParameterConfig};
use crate::error::{Error, Result};
use crate::glm::LinearFit;
use crate::imputation::{fit_imputation_model, imputation_roster, impute_deterministic, ImputationModel};
use crate::linalg::SymMatrix;

pub const ARTIFACT_MAGIC: &str = "cpmiss-model";
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub cpm: PooledCpm,
    pub imputation: ImputationModel,
}

impl ModelArtifact {
    pub fn to_text(&self) -> String {
        let mut out = format!("{ARTIFACT_MAGIC} v{ARTIFACT_VERSION}\n[cpm]\n");
        let c = &self.cpm;
        out += &format!("variant {}\nm {}\n", c.variant.tag(), c.m);
        out += &format!(
            "any_nonconverged {}\nany_separation {}\n",
            c.any_nonconverged, c.any_separation
        );
        out += "# coef <label> <estimate> <within> <between> <total>\n";
        for (j, label) in c.variant.roster().iter().enumerate() {
            out += &format!(
                "coef {label} {} {} {} {}\n",
                c.coefficients[j], c.within_variance[j], c.between_variance[j], c.total_variance[j]
            );
        }
        let imp = &self.imputation;
        out += "[imputation]\n";
        out += &format!("uses_outcome {}\nn_obs {}\n", imp.uses_outcome, imp.inner.n_obs);
        out += &format!("residual_variance {}\n", imp.inner.residual_variance);
        out += "# coef <label> <estimate>\n";
        for (label, v) in imp.inner.predictor_roster.iter().zip(&imp.inner.coefficients) {
            out += &format!("coef {label} {v}\n");
        }
        let g = &imp.inner.gram_inverse;
        for i in 0..g.dim() {
            let row: Vec<String> = g.row(i).iter().map(|v| v.to_string()).collect();
            out += &format!("gram_inverse {}\n", row.join(" "));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        Parser::new(text).artifact()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

struct Parser<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Self { lines, pos: 0 }
    }

    fn fail<T>(&self, reason: impl Into<String>) -> Result<T> {
        let line = self.lines.get(self.pos.saturating_sub(1)).map_or(0, |(n, _)| *n);
        Err(Error::Artifact {
            line,
            reason: reason.into(),
        })
    }

    fn next_line(&mut self) -> Result<&'a str> {
        match self.lines.get(self.pos) {
            Some((_, l)) => {
                self.pos += 1;
                Ok(l)
            }
            None => {
                self.pos += 1;
                self.fail("unexpected end of artifact")
            }
        }
    }

    fn peek_key(&self) -> Option<&'a str> {
        self.lines
            .get(self.pos)
            .and_then(|(_, l)| l.split_whitespace().next())
    }

    /// Reads `key rest...`, returning the remaining fields.
    fn field(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let line = self.next_line()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return self.fail(format!("expected `{key}`, found `{line}`"));
        }
        Ok(parts.collect())
    }

    fn single<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let fields = self.field(key)?;
        match fields.as_slice() {
            [v] => v
                .parse()
                .or_else(|_| self.fail(format!("bad value for `{key}`: `{v}`"))),
            _ => self.fail(format!("`{key}` takes exactly one value")),
        }
    }

    fn numbers(&self, fields: &[&str]) -> Result<Vec<f64>> {
        fields
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .or_else(|_| self.fail(format!("`{f}` is not a number")))
            })
            .collect()
    }

    fn section(&mut self, name: &str) -> Result<()> {
        let line = self.next_line()?;
        if line != format!("[{name}]") {
            return self.fail(format!("expected section [{name}], found `{line}`"));
        }
        Ok(())
    }

    fn artifact(mut self) -> Result<ModelArtifact> {
        let header = self.next_line()?;
        if header != format!("{ARTIFACT_MAGIC} v{ARTIFACT_VERSION}") {
            return self.fail(format!("unsupported header `{header}`"));
        }

        self.section("cpm")?;
        let variant: CpmVariant = {
            let tag: String = self.single("variant")?;
            match tag.parse() {
                Ok(v) => v,
                Err(e) => return self.fail(e.to_string()),
            }
        };
        let m: usize = self.single("m")?;
        let any_nonconverged: bool = self.single("any_nonconverged")?;
        let any_separation: bool = self.single("any_separation")?;
        let q = variant.n_columns();
        let mut cols = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
        for expected in variant.roster() {
            let fields = self.field("coef")?;
            if fields.len() != 5 || fields[0] != *expected {
                return self.fail(format!(
                    "expected `coef {expected} <estimate> <within> <between> <total>`"
                ));
            }
            for (col, v) in cols.iter_mut().zip(self.numbers(&fields[1..])?) {
                col.push(v);
            }
        }
        let [coefficients, within_variance, between_variance, total_variance] = cols;
        debug_assert_eq!(coefficients.len(), q);

        self.section("imputation")?;
        let uses_outcome: bool = self.single("uses_outcome")?;
        let n_obs: usize = self.single("n_obs")?;
        let residual_variance: f64 = self.single("residual_variance")?;
        let roster = imputation_roster(uses_outcome);
        let mut imp_coefs = Vec::with_capacity(roster.len());
        for expected in roster {
            let fields = self.field("coef")?;
            if fields.len() != 2 || fields[0] != *expected {
                return self.fail(format!("expected `coef {expected} <estimate>`"));
            }
            imp_coefs.push(self.numbers(&fields[1..])?[0]);
        }
        let mut gram_rows = Vec::with_capacity(roster.len());
        for _ in 0..roster.len() {
            let fields = self.field("gram_inverse")?;
            if fields.len() != roster.len() {
                return self.fail("gram_inverse row has the wrong width");
            }
            gram_rows.push(self.numbers(&fields)?);
        }
        if let Some(extra) = self.peek_key() {
            self.pos += 1;
            return self.fail(format!("unexpected trailing entry `{extra}`"));
        }
        let inner = LinearFit {
            coefficients: imp_coefs,
            residual_variance,
            gram_inverse: SymMatrix::from_rows(gram_rows)?,
            n_obs,
            predictor_roster: roster.iter().map(|s| s.to_string()).collect(),
        };
        Ok(ModelArtifact {
            cpm: PooledCpm {
                variant,
                coefficients,
                within_variance,
                between_variance,
                total_variance,
                m,
                any_nonconverged,
                any_separation,
            },
            imputation: ImputationModel::new(inner, uses_outcome)?,
        })
    }
}

/// Develops a deployable model: generates one cohort, fits the imputation
/// model without the outcome on the development split, regression-imputes
/// it, and fits `variant`.
pub fn build_deployment_model<R: Rng + ?Sized>(
    config: &ParameterConfig,
    variant: CpmVariant,
    rng: &mut R,
) -> Result<ModelArtifact> {
    let cohort = generate_cohort(config, rng)?;
    let (dev, _) = split_cohort(&cohort, config.split_fraction, rng)?;
    let imputation = fit_imputation_model(&dev, false)?;
    let completed = impute_deterministic(&dev, &imputation)?;
    let cpm = fit_cpm(std::slice::from_ref(&completed), variant)?;
    Ok(ModelArtifact { cpm, imputation })
}
