//! Run configuration: every tunable default in one TOML document.
//!
//! Layering, lowest first: built-in defaults, the config file, `config`
//! lines in the scenario, command-line flags. Overrides use dotted keys
//! such as `memory.wm_capacity`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon::Json;
use crate::decide::DecideConfig;
use crate::memory::MemoryConfig;
use crate::metacog::MetacogConfig;
use crate::perceive::AttentionWeights;
use crate::world::SensorConfig;

/// Environment variable naming a config file.
pub const CONFIG_ENV: &str = "SIDE_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("config key {key}: {reason}")]
    Override { key: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceiveConfig {
    /// Bound objects scoring below this are dropped before reasoning.
    pub threshold: f64,
    pub weights: AttentionWeights,
    /// Observations kept for temporal feature extraction.
    pub window: usize,
    pub near_cells: f64,
}

impl Default for PerceiveConfig {
    fn default() -> Self {
        Self {
            threshold: 0.25,
            weights: AttentionWeights::uniform(),
            window: 16,
            near_cells: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReasonConfig {
    pub collision_eps: f64,
    /// Ticks of trajectory extrapolation for collision checks.
    pub horizon: u64,
    pub sequence_order: usize,
}

impl Default for ReasonConfig {
    fn default() -> Self {
        Self {
            collision_eps: 1.0,
            horizon: 3,
            sequence_order: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub max_ticks: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { max_ticks: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub perceive: PerceiveConfig,
    pub reason: ReasonConfig,
    pub metacog: MetacogConfig,
    pub memory: MemoryConfig,
    pub decide: DecideConfig,
    pub run: RunSection,
    pub sensor: SensorConfig,
}

/// `--config` wins over the environment variable.
pub fn resolve_path(flag: Option<PathBuf>) -> Option<PathBuf> {
    flag.or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Set one dotted key. The value is read as a TOML literal, falling
    /// back to a bare string.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let err = |reason: String| ConfigError::Override {
            key: key.to_string(),
            reason,
        };
        let mut doc = toml::Value::try_from(*self).map_err(|e| err(e.to_string()))?;
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let parts: Vec<&str> = key.split('.').collect();
        let (leaf, path) = parts.split_last().ok_or_else(|| err("empty key".into()))?;
        let mut node = &mut doc;
        for p in path {
            node = node
                .get_mut(*p)
                .ok_or_else(|| err(format!("no section {p:?}")))?;
        }
        let table = node.as_table_mut().ok_or_else(|| err("not a section".into()))?;
        let slot = table.entry(leaf.to_string()).or_insert(toml::Value::Boolean(false));
        // integers are accepted where floats are expected
        *slot = match (&*slot, parsed) {
            (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
            (_, v) => v,
        };
        let cfg: RunConfig = doc.try_into().map_err(|e: toml::de::Error| err(e.message().to_string()))?;
        cfg.validate()?;
        *self = cfg;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        self.perceive
            .weights
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !unit(self.perceive.threshold) {
            return bad("perceive.threshold must lie in [0, 1]");
        }
        if self.perceive.window < 2 {
            return bad("perceive.window must be at least 2");
        }
        if !(self.perceive.near_cells > 0.0) || !(self.reason.collision_eps > 0.0) {
            return bad("distances must be positive");
        }
        if self.reason.sequence_order == 0 {
            return bad("reason.sequence_order must be at least 1");
        }
        let m = &self.metacog;
        if !unit(m.prediction_threshold) || !unit(m.decay_factor) || m.decay_factor == 0.0 {
            return bad("metacog thresholds and factors must lie in (0, 1]");
        }
        if !(m.weight_min >= 0.0 && m.weight_min * 3.0 <= 1.0 && m.weight_max * 3.0 >= 1.0 && m.weight_max <= 1.0) {
            return bad("metacog weight clamps must admit the uniform weighting");
        }
        if self.memory.wm_capacity == 0 || !unit(self.memory.salience_decay) {
            return bad("memory.wm_capacity must be positive and salience_decay in [0, 1]");
        }
        if self.decide.replan_limit == 0 || !(self.decide.planner_timeout_secs > 0.0) {
            return bad("decide.replan_limit and planner_timeout_secs must be positive");
        }
        Ok(())
    }

    /// Canonical rendering for the trace header.
    pub fn echo(&self) -> Json {
        fn conv(v: &toml::Value) -> Json {
            match v {
                toml::Value::String(s) => Json::str(s.clone()),
                toml::Value::Integer(i) => Json::Int(*i),
                toml::Value::Float(f) => Json::Float(*f),
                toml::Value::Boolean(b) => Json::Bool(*b),
                toml::Value::Datetime(d) => Json::str(d.to_string()),
                toml::Value::Array(a) => Json::Arr(a.iter().map(conv).collect()),
                toml::Value::Table(t) => Json::Obj(t.iter().map(|(k, v)| (k.clone(), conv(v))).collect()),
            }
        }
        toml::Value::try_from(*self).map(|v| conv(&v)).unwrap_or(Json::Null)
    }
}
