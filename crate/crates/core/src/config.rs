//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Keys are consumed by typed
//! getters; whatever is left when [`KeyValues::finish`] runs is an
//! unknown key and therefore an error.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{invalid, Result};
use crate::forest::ForestConfig;
use crate::optim::BiasMode;

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (String, String)>,
}

impl KeyValues {
    /// Parses a config file body.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            kv.insert(line, &format!("line {}", n + 1))?;
        }
        Ok(kv)
    }

    /// Parses `KEY=VALUE` pairs such as command-line overrides.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut kv = Self::default();
        for pair in pairs {
            kv.insert(pair, &format!("`{pair}`"))?;
        }
        Ok(kv)
    }

    fn insert(&mut self, item: &str, origin: &str) -> Result<()> {
        let Some((key, value)) = item.split_once('=') else {
            return Err(invalid(format!("{origin}: expected `key = value`")));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(invalid(format!("{origin}: empty key")));
        }
        let entry = (value.trim().to_string(), origin.to_string());
        if self.entries.insert(key.to_string(), entry).is_some() {
            return Err(invalid(format!("{origin}: duplicate key `{key}`")));
        }
        Ok(())
    }

    /// Adds the entries of `other`, which override existing keys.
    pub fn merge(&mut self, other: KeyValues) {
        self.entries.extend(other.entries);
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Removes and parses `key`, if present.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((value, origin)) => value
                .parse()
                .map(Some)
                .map_err(|e| invalid(format!("{origin}: bad value for `{key}`: {e}"))),
        }
    }

    /// Like [`take`](Self::take) but writes into `slot` when present.
    pub fn take_into<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = self.take(key)? {
            *slot = v;
        }
        Ok(())
    }

    /// Comma-separated list of reals.
    pub fn take_reals(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(raw) = self.take::<String>(key)? else {
            return Ok(None);
        };
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| invalid(format!("bad value in `{key}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Fails if any key was never consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, (_, origin))) => Err(invalid(format!("{origin}: unknown key `{key}`"))),
        }
    }
}

impl FromStr for BiasMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exact" => Ok(BiasMode::Exact),
            "penalized" => Ok(BiasMode::Penalized),
            other => Err(format!("expected `exact` or `penalized`, got `{other}`")),
        }
    }
}

/// Consumes the forest keys from `kv` into `cfg`.
pub fn apply_forest_keys(kv: &mut KeyValues, cfg: &mut ForestConfig) -> Result<()> {
    kv.take_into("n_trees", &mut cfg.n_trees)?;
    kv.take_into("max_depth", &mut cfg.max_depth)?;
    kv.take_into("min_samples", &mut cfg.min_samples)?;
    kv.take_into("purity_stop", &mut cfg.purity_stop)?;
    kv.take_into("candidates", &mut cfg.candidates)?;
    kv.take_into("block_fraction", &mut cfg.block_fraction)?;
    kv.take_into("svm_cost", &mut cfg.svm.reg_cost)?;
    kv.take_into("svm_tol", &mut cfg.svm.tol)?;
    kv.take_into("svm_max_iter", &mut cfg.svm.max_iter)?;
    kv.take_into("svm_bias", &mut cfg.svm.bias)?;
    kv.take_into("decision_threshold", &mut cfg.decision_threshold)?;
    kv.take_into("seed", &mut cfg.seed)?;
    cfg.validate()
}

/// Parses a whole forest config file; unknown keys are errors.
pub fn forest_config_from_str(text: &str) -> Result<ForestConfig> {
    let mut kv = KeyValues::parse(text)?;
    let mut cfg = ForestConfig::default();
    apply_forest_keys(&mut kv, &mut cfg)?;
    kv.finish()?;
    Ok(cfg)
}
