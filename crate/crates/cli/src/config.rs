//! The experiment configuration document shared by every subcommand.
//!
//! A `--config` file and the command-line flags fill the same flat document;
//! flags win. Unknown keys are rejected. The fully resolved document is echoed
//! with every run and can be fed back through `--config` to reproduce it.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use specmix_core::tester::{Constants, Profile};
use specmix_core::verify::Suite;
use specmix_core::FamilyId;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    P,
    Q,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<Profile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_cap: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Sample count for `sample`, point count for `hard-instance`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_tail: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_star: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hard_instance: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mlr_weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_budget: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate_cap: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vote_multiplier: Option<f64>,
    /// Partial overrides of the active constants (c_sigma, c_m, c_gamma, c_n, c_vote, pre_ratio, pre_root).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<BTreeMap<String, f64>>,
    /// Overrides for the general-family constants audited by `verify`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub general_constants: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suites: Option<Vec<Suite>>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("reading {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
    }

    /// Keys set in `over` replace those in `self`.
    pub fn overlay(self, over: &ExperimentConfig) -> Result<Self, CliError> {
        let mut base = to_map(&self);
        base.extend(to_map(over));
        serde_json::from_value(Value::Object(base)).map_err(|e| CliError::usage(e.to_string()))
    }

    pub fn require<T: Clone>(value: &Option<T>, key: &str) -> Result<T, CliError> {
        value.clone().ok_or_else(|| CliError::usage(format!("missing required setting `{key}`")))
    }

    pub fn profile(&self) -> Profile {
        self.profile.unwrap_or(Profile::Practical)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

fn to_map(c: &ExperimentConfig) -> Map<String, Value> {
    match serde_json::to_value(c) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    }
}

/// Applies named overrides to `base`; unknown names are usage errors.
pub fn apply_overrides(base: Constants, overrides: Option<&BTreeMap<String, f64>>) -> Result<Constants, CliError> {
    let Some(over) = overrides else { return Ok(base) };
    let mut map = to_object(&base);
    for (key, v) in over {
        if !map.contains_key(key) {
            let known: Vec<&String> = map.keys().collect();
            return Err(CliError::usage(format!("unknown constant `{key}`; known: {known:?}")));
        }
        map.insert(key.clone(), Value::from(*v));
    }
    serde_json::from_value(Value::Object(map)).map_err(|e| CliError::usage(e.to_string()))
}

/// The full constants as an override map, for echoing.
pub fn constants_map(c: &Constants) -> BTreeMap<String, f64> {
    to_object(c).into_iter().filter_map(|(k, v)| v.as_f64().map(|x| (k, x))).collect()
}

fn to_object(c: &Constants) -> Map<String, Value> {
    match serde_json::to_value(c) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    }
}
