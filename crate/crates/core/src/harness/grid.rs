use std::fmt;
use std::str::FromStr;

use crate::datagen::ParameterConfig;
use crate::error::{Error, Result};

pub const BETA_LEVELS: [f64; 3] = [0.0, 0.5, 1.0];
pub const GAMMA_LEVELS: [f64; 2] = [0.5, 0.7];
pub const INTERACTION_LEVELS: [f64; 2] = [0.0, 0.1];
pub const PI_R1_LEVELS: [f64; 4] = [0.1, 0.25, 0.5, 0.75];

/// Full factorial grid in a fixed nesting order (outermost first):
/// `beta_x1, beta_x2, beta_y, gamma_x1, gamma_x2, gamma_x1x2, pi_r1`.
/// A configuration's id is its index.
pub fn enumerate_grid() -> Vec<ParameterConfig> {
    let mut grid = Vec::with_capacity(864);
    for beta_x1 in BETA_LEVELS {
        for beta_x2 in BETA_LEVELS {
            for beta_y in BETA_LEVELS {
                for gamma_x1 in GAMMA_LEVELS {
                    for gamma_x2 in GAMMA_LEVELS {
                        for gamma_x1x2 in INTERACTION_LEVELS {
                            for pi_r1 in PI_R1_LEVELS {
                                grid.push(ParameterConfig {
                                    beta_x1,
                                    beta_x2,
                                    beta_y,
                                    gamma_x1,
                                    gamma_x2,
                                    gamma_x1x2,
                                    pi_r1,
                                    ..ParameterConfig::default()
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    grid
}

/// Id of the grid cell with the given missingness coefficients and the
/// outcome settings used for the headline comparisons
/// (`gamma_x1 = gamma_x2 = 0.7`, `gamma_x1x2 = 0.1`, `pi_r1 = 0.5`).
pub fn presentation_config_id(beta_x1: f64, beta_x2: f64, beta_y: f64) -> Option<usize> {
    enumerate_grid().iter().position(|c| {
        c.beta_x1 == beta_x1
            && c.beta_x2 == beta_x2
            && c.beta_y == beta_y
            && c.gamma_x1 == 0.7
            && c.gamma_x2 == 0.7
            && c.gamma_x1x2 == 0.1
            && c.pi_r1 == 0.5
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mechanism {
    Mcar,
    Mar,
    MnarX,
    MnarY,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [
        Mechanism::Mcar,
        Mechanism::Mar,
        Mechanism::MnarX,
        Mechanism::MnarY,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Mechanism::Mcar => "MCAR",
            Mechanism::Mar => "MAR",
            Mechanism::MnarX => "MNAR-X",
            Mechanism::MnarY => "MNAR-Y",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidFilter(format!("unknown mechanism `{s}`")))
    }
}

/// Outcome dependence dominates, then dependence on the missing value
/// itself, then on the observed predictor.
pub fn classify_mechanism(config: &ParameterConfig) -> Mechanism {
    if config.beta_y != 0.0 {
        Mechanism::MnarY
    } else if config.beta_x1 != 0.0 {
        Mechanism::MnarX
    } else if config.beta_x2 != 0.0 {
        Mechanism::Mar
    } else {
        Mechanism::Mcar
    }
}

/// One `key=value` condition on a configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Mechanism(Mechanism),
    Parameter { name: String, value: f64 },
}

const PARAMETER_NAMES: [&str; 7] = [
    "beta_x1",
    "beta_x2",
    "beta_y",
    "gamma_x1",
    "gamma_x2",
    "gamma_x1x2",
    "pi_r1",
];

fn parameter_value(config: &ParameterConfig, name: &str) -> f64 {
    match name {
        "beta_x1" => config.beta_x1,
        "beta_x2" => config.beta_x2,
        "beta_y" => config.beta_y,
        "gamma_x1" => config.gamma_x1,
        "gamma_x2" => config.gamma_x2,
        "gamma_x1x2" => config.gamma_x1x2,
        "pi_r1" => config.pi_r1,
        _ => unreachable!("parameter names are validated at parse time"),
    }
}

impl Predicate {
    fn matches(&self, config: &ParameterConfig) -> bool {
        match self {
            Predicate::Mechanism(m) => classify_mechanism(config) == *m,
            Predicate::Parameter { name, value } => parameter_value(config, name) == *value,
        }
    }
}

/// Selection of grid configurations.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ConfigFilter {
    #[default]
    All,
    Ids(Vec<usize>),
    /// All predicates must hold.
    Predicates(Vec<Predicate>),
}

impl FromStr for ConfigFilter {
    type Err = Error;

    /// Accepts `all`, a list of ids and ranges (`0,5,10-12`), or
    /// comma-separated predicates (`mechanism=MAR,pi_r1=0.5`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(ConfigFilter::All);
        }
        if s.contains('=') {
            let predicates = s
                .split(',')
                .map(|part| {
                    let (key, value) = part
                        .split_once('=')
                        .ok_or_else(|| Error::InvalidFilter(format!("expected key=value, got `{part}`")))?;
                    let (key, value) = (key.trim(), value.trim());
                    if key == "mechanism" {
                        return Ok(Predicate::Mechanism(value.parse()?));
                    }
                    if !PARAMETER_NAMES.contains(&key) {
                        return Err(Error::InvalidFilter(format!("unknown parameter `{key}`")));
                    }
                    let value = value
                        .parse()
                        .map_err(|_| Error::InvalidFilter(format!("`{value}` is not a number")))?;
                    Ok(Predicate::Parameter {
                        name: key.to_string(),
                        value,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(ConfigFilter::Predicates(predicates));
        }
        let mut ids = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            let parse = |t: &str| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidFilter(format!("`{t}` is not a config id")))
            };
            match part.split_once('-') {
                Some((a, b)) => {
                    let (a, b) = (parse(a)?, parse(b)?);
                    if a > b {
                        return Err(Error::InvalidFilter(format!("empty range `{part}`")));
                    }
                    ids.extend(a..=b);
                }
                None => ids.push(parse(part)?),
            }
        }
        Ok(ConfigFilter::Ids(ids))
    }
}

impl ConfigFilter {
    /// Selected config ids in ascending order; never empty.
    pub fn select(&self, grid: &[ParameterConfig]) -> Result<Vec<usize>> {
        let mut ids: Vec<usize> = match self {
            ConfigFilter::All => (0..grid.len()).collect(),
            ConfigFilter::Ids(ids) => {
                if let Some(bad) = ids.iter().find(|&&i| i >= grid.len()) {
                    return Err(Error::InvalidFilter(format!(
                        "config id {bad} out of range (grid has {})",
                        grid.len()
                    )));
                }
                ids.clone()
            }
            ConfigFilter::Predicates(preds) => (0..grid.len())
                .filter(|&i| preds.iter().all(|p| p.matches(&grid[i])))
                .collect(),
        };
        ids.sort_unstable();
        ids.dedup();
        if ids.is_empty() {
            return Err(Error::InvalidFilter("filter selects no configurations".into()));
        }
        Ok(ids)
    }
}
