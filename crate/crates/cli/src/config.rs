//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional except
//! that running a configuration needs an `experiment`; unknown keys,
//! repeated keys and non-positive numbers are rejected before anything
//! is computed.

use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::experiments::Experiment;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Malformed { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Repeated { line: usize, key: String },
    #[error("line {line}: invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue { line: usize, key: String, value: String, reason: String },
}

/// Parameters of one experiment run. `None` selects the experiment's
/// documented default.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub seed: u64,
    pub steps: Option<usize>,
    pub t_end: Option<f64>,
    pub paths: Option<usize>,
    pub tol: Option<f64>,
    pub dim_cap: Option<usize>,
    pub out: PathBuf,
    pub dsl: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: 1,
            steps: None,
            t_end: None,
            paths: None,
            tol: None,
            dim_cap: None,
            out: PathBuf::from("out"),
            dsl: None,
            threads: None,
        }
    }
}

pub const KEYS: [&str; 10] = ["experiment", "seed", "steps", "t_end", "paths", "tol", "dim_cap", "out", "dsl", "threads"];

impl ExperimentConfig {
    pub fn for_experiment(experiment: Experiment) -> Self {
        Self { experiment: Some(experiment), ..Self::default() }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::InvalidValue {
        line,
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn positive_count(line: usize, key: &str, value: &str) -> Result<usize, ConfigError> {
    let v: usize = parse_value(line, key, value)?;
    if v == 0 {
        return Err(ConfigError::InvalidValue { line, key: key.into(), value: value.into(), reason: "must be positive".into() });
    }
    Ok(v)
}

fn positive_real(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = parse_value(line, key, value)?;
    if !(v.is_finite() && v > 0.0) {
        return Err(ConfigError::InvalidValue { line, key: key.into(), value: value.into(), reason: "must be positive".into() });
    }
    Ok(v)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    let mut seen: Vec<&str> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or(ConfigError::Malformed { line })?;
        let (key, value) = (key.trim(), value.trim());
        let Some(&known) = KEYS.iter().find(|&&k| k == key) else {
            return Err(ConfigError::UnknownKey { line, key: key.into() });
        };
        if seen.contains(&known) {
            return Err(ConfigError::Repeated { line, key: key.into() });
        }
        seen.push(known);
        if value.is_empty() {
            return Err(ConfigError::InvalidValue { line, key: key.into(), value: String::new(), reason: "empty value".into() });
        }
        match known {
            "experiment" => cfg.experiment = Some(parse_value(line, key, value)?),
            "seed" => cfg.seed = parse_value(line, key, value)?,
            "steps" => cfg.steps = Some(positive_count(line, key, value)?),
            "t_end" => cfg.t_end = Some(positive_real(line, key, value)?),
            "paths" => cfg.paths = Some(positive_count(line, key, value)?),
            "tol" => cfg.tol = Some(positive_real(line, key, value)?),
            "dim_cap" => cfg.dim_cap = Some(positive_count(line, key, value)?),
            "out" => cfg.out = PathBuf::from(value),
            "dsl" => cfg.dsl = Some(PathBuf::from(value)),
            "threads" => cfg.threads = Some(positive_count(line, key, value)?),
            _ => unreachable!("key list and match arms agree"),
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys() {
        let cfg = parse_config(
            "# gbm run\nexperiment = gbm_closed_form\nseed=7\nsteps = 512\nt_end=2.5\npaths=16\ntol=1e-3\n\
             dim_cap=4\nout = results # trailing comment\ndsl=fields.txt\nthreads=2\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment, Some(Experiment::GbmClosedForm));
        assert_eq!((cfg.seed, cfg.steps, cfg.paths, cfg.dim_cap, cfg.threads), (7, Some(512), Some(16), Some(4), Some(2)));
        assert_eq!((cfg.t_end, cfg.tol), (Some(2.5), Some(1e-3)));
        assert_eq!(cfg.out, PathBuf::from("results"));
        assert_eq!(cfg.dsl, Some(PathBuf::from("fields.txt")));
    }

    #[test]
    fn strictness() {
        assert_eq!(parse_config("seed=1\nsed=2").unwrap_err(), ConfigError::UnknownKey { line: 2, key: "sed".into() });
        assert_eq!(parse_config("seed=1\nseed=2").unwrap_err(), ConfigError::Repeated { line: 2, key: "seed".into() });
        assert_eq!(parse_config("just words").unwrap_err(), ConfigError::Malformed { line: 1 });
        for bad in ["steps=0", "steps=-3", "t_end=0", "tol=nan", "paths=", "experiment=nope", "seed=x"] {
            assert!(matches!(parse_config(bad), Err(ConfigError::InvalidValue { line: 1, .. })), "{bad}");
        }
    }

    #[test]
    fn defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }
}
