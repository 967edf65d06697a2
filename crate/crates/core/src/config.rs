//! Flat `key = value` configuration files.
//!
//! Every [`TrainConfig`] and [`BaselineConfig`] field is addressable by name.
//! `eta`, `passes`, `seed` and `burst_size` are shared: they set the field of
//! the same name on both configs.

use std::path::Path;
use std::str::FromStr;

use crate::baselines::BaselineConfig;
use crate::error::{Error, Result};
use crate::trainer::TrainConfig;

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected `key = value`, found `{line}`"),
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: "empty key".into(),
            });
        }
        out.push((k.to_ascii_lowercase(), v.trim().trim_matches('"').to_string()));
    }
    Ok(out)
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(format!("invalid value `{value}` for `{key}`"))),
    }
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.to_ascii_lowercase().as_str() {
        "none" | "off" | "" => Ok(None),
        _ => parse(key, value).map(Some),
    }
}

/// Sets one trainer field; returns `false` for keys the trainer does not have.
pub fn set_train(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<bool> {
    match key {
        "beta0" => cfg.beta0 = parse(key, value)?,
        "gamma" => cfg.gamma = parse(key, value)?,
        "pi0" => cfg.pi0 = parse(key, value)?,
        "burst_size" | "k0" => cfg.burst_size = parse(key, value)?,
        "burst_alpha" | "alpha" => cfg.burst_alpha = parse_opt(key, value)?,
        "max_burst_size" | "k_max" => cfg.max_burst_size = parse(key, value)?,
        "bursts_per_stage" | "n_k" => cfg.bursts_per_stage = parse(key, value)?,
        "paths" | "m" => cfg.paths = parse(key, value)?,
        "eta" => cfg.eta = parse(key, value)?,
        "delta_k" => cfg.delta_k = parse(key, value)?,
        "prob_unit" => cfg.prob_unit = parse(key, value)?,
        "g0_init" => cfg.g0_init = parse(key, value)?,
        "max_stages" => cfg.max_stages = parse(key, value)?,
        "convergence_tol" | "tol" => cfg.convergence_tol = parse(key, value)?,
        "passes" => cfg.passes = parse_opt(key, value)?,
        "seed" => cfg.seed = parse(key, value)?,
        "keep_trace" => cfg.keep_trace = parse_bool(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

/// Sets one baseline field; returns `false` for keys the baselines do not have.
pub fn set_baseline(cfg: &mut BaselineConfig, key: &str, value: &str) -> Result<bool> {
    match key {
        "kind" => cfg.kind = parse(key, value)?,
        "eta" => cfg.eta = parse(key, value)?,
        "g0" => cfg.g0 = parse(key, value)?,
        "burst_size" | "k" => cfg.burst_size = parse(key, value)?,
        "lambda" => cfg.lambda = parse(key, value)?,
        "gamma_rda" => cfg.gamma_rda = parse(key, value)?,
        "rho" => cfg.rho = parse(key, value)?,
        "lambda_fobos" => cfg.lambda_fobos = parse(key, value)?,
        "fobos_eta0" => cfg.fobos_eta0 = parse(key, value)?,
        "fobos_interim" => cfg.fobos_interim = parse(key, value)?,
        "passes" => cfg.passes = parse(key, value)?,
        "seed" => cfg.seed = parse(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

/// Trainer and baseline settings read together from one file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub baseline: BaselineConfig,
}

impl RunConfig {
    /// Applies one key to whichever configs know it; unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        let a = set_train(&mut self.train, &key, value)?;
        let b = set_baseline(&mut self.baseline, &key, value)?;
        if a || b {
            Ok(())
        } else {
            Err(Error::config(format!("unknown configuration key `{key}`")))
        }
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_pairs(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{BaselineKind, FobosInterim};
    use crate::stability::ProbUnit;

    #[test]
    fn parses_and_applies() {
        let text = "# tuned\nbeta0 = 0.5\ngamma=-3\nK0 = 7 # initial\nalpha = none\npasses = 20\nkind = truncated\ng0 = 0.002\nprob_unit = updates\nfobos_interim = current\nkeep_trace = true\n";
        let mut c = RunConfig::default();
        c.apply_text(text).unwrap();
        assert_eq!(c.train.beta0, 0.5);
        assert_eq!(c.train.gamma, -3.0);
        assert_eq!(c.train.burst_size, 7);
        assert_eq!(c.train.burst_alpha, None);
        assert_eq!(c.train.passes, Some(20.0));
        assert_eq!(c.train.prob_unit, ProbUnit::Updates);
        assert!(c.train.keep_trace);
        assert_eq!(c.baseline.passes, 20.0);
        assert_eq!(c.baseline.kind, BaselineKind::Truncated);
        assert_eq!(c.baseline.g0, 0.002);
        assert_eq!(c.baseline.fobos_interim, FobosInterim::Current);
    }

    #[test]
    fn shared_keys_set_both() {
        let mut c = RunConfig::default();
        c.apply_text("eta = 0.3\nseed = 12\nburst_size = 9").unwrap();
        assert_eq!((c.train.eta, c.baseline.eta), (0.3, 0.3));
        assert_eq!((c.train.seed, c.baseline.seed), (12, 12));
        assert_eq!((c.train.burst_size, c.baseline.burst_size), (9, 9));
    }

    #[test]
    fn errors() {
        let mut c = RunConfig::default();
        assert!(c.apply_text("nonsense = 1").is_err());
        assert!(c.apply_text("beta0 = abc").is_err());
        assert!(c.apply_text("no equals sign").is_err());
        assert!(c.apply_text("kind = lasso").is_err());
    }
}
