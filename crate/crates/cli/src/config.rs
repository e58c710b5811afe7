//! Job configuration: the `thermoform-config/1` document plus flag overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thermoform::{build_cookie_cutter, Model, PotentialSpec};

pub const SCHEMA: &str = "thermoform-config/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Inclusive uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        thermoform::pressure::uniform_grid(self.lo, self.hi, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransientConfig {
    pub n: usize,
    pub samples: usize,
    pub bin_width: f64,
    pub bin_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    #[serde(default = "schema_id")]
    pub schema: String,
    #[serde(default = "default_model")]
    pub model: Model,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<PotentialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transient: Option<TransientConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<bool>,
}

fn schema_id() -> String {
    SCHEMA.to_string()
}

fn default_model() -> Model {
    Model::Map(build_cookie_cutter())
}

impl Default for JobConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("schema violation: {0}")]
    Schema(String),
}

impl JobConfig {
    /// Parses a config document. A bare model object is accepted as shorthand.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut v: Value = serde_json::from_str(text).map_err(|e| ConfigError::Schema(e.to_string()))?;
        if let Value::Object(map) = &v {
            let bare = !map.contains_key("schema") && (map.contains_key("kind") || map.contains_key("N"));
            if bare {
                v = serde_json::json!({ "schema": SCHEMA, "model": v });
            }
        }
        let cfg: JobConfig = serde_json::from_value(v).map_err(|e| ConfigError::Schema(e.to_string()))?;
        if cfg.schema != SCHEMA {
            return Err(ConfigError::Schema(format!(
                "unsupported schema {:?}, expected {SCHEMA:?}",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn depth(&self) -> usize {
        self.depth.expect("resolved")
    }

    pub fn tol(&self) -> f64 {
        self.tol.expect("resolved")
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("resolved")
    }

    pub fn format(&self) -> Format {
        self.format.expect("resolved")
    }

    /// Checks ranges that the type system does not.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Schema(m));
        if self.depth == Some(0) {
            return bad("depth must be at least 1".into());
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("tol must be positive, got {t}"));
            }
        }
        for (name, g) in [
            ("t_grid", self.t_grid),
            ("a_grid", self.a_grid),
            ("chi_grid", self.chi_grid),
        ] {
            if let Some(g) = g {
                if g.points == 0 || !g.lo.is_finite() || !g.hi.is_finite() || g.hi < g.lo {
                    return bad(format!("{name} needs finite lo <= hi and at least one point"));
                }
            }
        }
        if let Some(t) = self.transient {
            if t.bin_width.is_nan() || t.bin_width <= 0.0 || t.bin_pairs == 0 || t.n == 0 {
                return bad("transient needs n > 0, bin_width > 0 and bin_pairs > 0".into());
            }
        }
        for p in [&self.potential, &self.observable].into_iter().flatten() {
            p.validate(&self.model)
                .map_err(|e| ConfigError::Schema(e.to_string()))?;
        }
        Ok(())
    }
}
