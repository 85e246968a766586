use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::Dag;
use crate::process::MixturePrior;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    BivariateSweep,
    Multivariate,
    OracleSweep,
    IdentifiabilitySweep,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown experiment kind {s:?}")))
    }
}

/// Settings of one experiment run. Every output embeds the config it was
/// produced with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Graph to simulate; `None` selects the experiment's standard graphs.
    #[serde(default)]
    pub graph: Option<Dag>,
    /// Prior to simulate from; `None` selects the experiment's default.
    #[serde(default)]
    pub prior: Option<MixturePrior>,
    /// Environment counts (the sweep grid).
    pub envs: Vec<usize>,
    pub samples_per_env: usize,
    pub repeats: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Largest graph size for oracle and identifiability sweeps.
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
    #[serde(default)]
    pub paper_scale: bool,
}

fn default_max_nodes() -> usize {
    3
}

impl ExperimentConfig {
    /// Desk-scale defaults for `kind`; `paper_scale` switches to the
    /// published protocol sizes.
    pub fn defaults(kind: ExperimentKind, paper_scale: bool) -> Self {
        let (envs, repeats) = match (kind, paper_scale) {
            (ExperimentKind::BivariateSweep, false) => (vec![500, 2000, 4000], 20),
            (ExperimentKind::BivariateSweep, true) => ((1..=40).map(|k| 100 * k).collect(), 100),
            (ExperimentKind::Multivariate, false) => (vec![10_000, 20_000], 20),
            (ExperimentKind::Multivariate, true) => (vec![10_000, 100_000], 100),
            (ExperimentKind::OracleSweep, _) => (vec![1], 20),
            (ExperimentKind::IdentifiabilitySweep, _) => (vec![1], 1),
        };
        ExperimentConfig {
            kind,
            graph: None,
            prior: None,
            envs,
            samples_per_env: 2,
            repeats,
            alpha: 0.05,
            seed: 0,
            max_nodes: 3,
            paper_scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.envs.is_empty() || self.envs.contains(&0) {
            return Err(Error::Config("environment grid must be nonempty and positive".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.samples_per_env < 2
            && matches!(self.kind, ExperimentKind::BivariateSweep | ExperimentKind::Multivariate)
        {
            return Err(Error::Config(
                "discovery needs at least 2 samples per environment".into(),
            ));
        }
        if let (Some(g), Some(p)) = (&self.graph, &self.prior) {
            p.validate(g)?;
        }
        Ok(())
    }

    /// Applies `key = value` settings; keys are the long CLI flag names.
    pub fn apply(&mut self, settings: &BTreeMap<String, String>) -> Result<()> {
        for (key, value) in settings {
            let bad = |what: &str| Error::Config(format!("{key}: {what} {value:?}"));
            match key.as_str() {
                "seed" => self.seed = value.parse().map_err(|_| bad("not an integer"))?,
                "alpha" => self.alpha = value.parse().map_err(|_| bad("not a number"))?,
                "envs" => {
                    self.envs = value
                        .split(',')
                        .map(|s| s.trim().parse().map_err(|_| bad("not an integer list")))
                        .collect::<Result<_>>()?
                }
                "samples-per-env" => {
                    self.samples_per_env = value.parse().map_err(|_| bad("not an integer"))?
                }
                "repeats" => self.repeats = value.parse().map_err(|_| bad("not an integer"))?,
                "max-nodes" => self.max_nodes = value.parse().map_err(|_| bad("not an integer"))?,
                "paper-scale" => {
                    self.paper_scale = value.parse().map_err(|_| bad("not a boolean"))?
                }
                "graph" => self.graph = Some(read_json_arg(value)?),
                "prior" => self.prior = Some(read_json_arg(value)?),
                "kind" => self.kind = value.parse()?,
                _ => return Err(Error::Config(format!("unknown key {key:?}"))),
            }
        }
        Ok(())
    }
}

/// Parses an inline JSON value, or reads it from a file when the argument
/// does not look like JSON.
pub fn read_json_arg<T: serde::de::DeserializeOwned>(arg: &str) -> Result<T> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        Ok(serde_json::from_str(trimmed)?)
    } else {
        Ok(serde_json::from_reader(std::fs::File::open(arg)?)?)
    }
}

/// Reads a flat `key = value` config file (`#` starts a comment). A JSON
/// file is accepted too: an experiment manifest's embedded `config`, or a
/// flat object.
pub fn read_config_file(path: &Path) -> Result<ConfigSource> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let cfg = v.get("config").cloned().unwrap_or(v);
        if cfg.get("kind").is_some() && cfg.get("envs").is_some_and(|e| e.is_array()) {
            return Ok(ConfigSource::Full(serde_json::from_value(cfg)?));
        }
        let obj = cfg
            .as_object()
            .ok_or_else(|| Error::Config("config JSON must be an object".into()))?;
        let flat = obj
            .iter()
            .map(|(k, v)| {
                let s = match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                (k.clone(), s)
            })
            .collect();
        return Ok(ConfigSource::Flat(flat));
    }
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(ConfigSource::Flat(out))
}

#[derive(Clone, Debug)]
pub enum ConfigSource {
    /// A complete config, e.g. from a manifest.
    Full(ExperimentConfig),
    /// Partial settings applied over defaults.
    Flat(BTreeMap<String, String>),
}

/// Output directory layout for an experiment.
pub fn output_paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{stem}.csv")), dir.join(format!("{stem}.json")))
}
