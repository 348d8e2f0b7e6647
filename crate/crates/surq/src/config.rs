//! Benchmark configuration files and the built-in presets.
//!
//! A config file is a JSON object. It either names a preset and overrides
//! parts of it, or spells out the whole experiment:
//!
//! ```json
//! { "preset": "hartman-4d-a05", "sur": { "budget": 60 }, "replications": 3 }
//! ```
//!
//! Objects are merged key by key over the preset, so `"sur": {"budget": 60}`
//! changes only the budget. The fully resolved config is what
//! [`BenchmarkConfig::to_json`] writes, and it parses back to itself.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use surq_core::{ExperimentSpec, FunctionKind, InputDistribution, KernelFamily};

use crate::engine::{Candidates, Criterion, ModelSettings, SurConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Jsonl => "jsonl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Label written into every result row.
    pub name: String,
    pub experiment: ExperimentSpec,
    /// Design-loop settings; `sur.seed` is the master seed and `sur.criterion`
    /// is ignored in favour of `criteria`.
    pub sur: SurConfig,
    pub criteria: Vec<Criterion>,
    pub output_format: OutputFormat,
    /// Seed of the oracle sample. Independent of the master seed so that all
    /// runs of a preset share the same ground truth.
    pub oracle_seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config is empty")]
    Empty,
    #[error("malformed JSON: {0}")]
    Syntax(String),
    #[error("unknown preset `{0}` (see `surq presets`)")]
    UnknownPreset(String),
    #[error("invalid `{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), message: message.into() }
}

pub const PRESETS: [&str; 5] = ["branin-2d-a85", "hartman-4d-a05", "hartman-4d-a97", "ackley-6d-a15", "ackley-6d-a97"];

const ORACLE_SAMPLE: usize = 1_000_000;

/// The resolved config of a preset.
pub fn preset(name: &str) -> Option<BenchmarkConfig> {
    let (function, alpha) = match name {
        "branin-2d-a85" => return Some(branin_preset()),
        "hartman-4d-a05" => (FunctionKind::Hartman4, 0.05),
        "hartman-4d-a97" => (FunctionKind::Hartman4, 0.97),
        "ackley-6d-a15" => (FunctionKind::Ackley { dim: 6, first4: false }, 0.15),
        "ackley-6d-a97" => (FunctionKind::Ackley { dim: 6, first4: false }, 0.97),
        _ => return None,
    };
    let d = function.dim();
    Some(BenchmarkConfig {
        name: name.into(),
        experiment: ExperimentSpec {
            function,
            distribution: InputDistribution::exchangeable_normal(0.5, 0.1, 0.05, d),
            alpha,
            oracle_sample_size: ORACLE_SAMPLE,
            replications: 10,
        },
        sur: SurConfig {
            criterion: Criterion::Prob,
            n_initial: 30,
            budget: 90,
            cloud_size: 3000,
            cloud_renewal: true,
            candidates: Candidates::Pool { pool_size: 100_000, shortlist_size: 300 },
            local_refine: true,
            integration_points: Some(150),
            alpha,
            seed: 1,
            model: ModelSettings::default(),
        },
        criteria: Criterion::ALL.to_vec(),
        output_format: OutputFormat::Csv,
        oracle_seed: 7,
    })
}

fn branin_preset() -> BenchmarkConfig {
    let alpha = 0.85;
    BenchmarkConfig {
        name: "branin-2d-a85".into(),
        experiment: ExperimentSpec {
            function: FunctionKind::Branin2,
            distribution: InputDistribution::unit_cube(2),
            alpha,
            oracle_sample_size: ORACLE_SAMPLE,
            replications: 10,
        },
        sur: SurConfig {
            criterion: Criterion::Prob,
            n_initial: 7,
            budget: 18,
            cloud_size: 1000,
            cloud_renewal: false,
            candidates: Candidates::Cloud,
            local_refine: false,
            integration_points: Some(50),
            alpha,
            seed: 1,
            model: ModelSettings { kernel: KernelFamily::SquaredExponential, ..ModelSettings::default() },
        },
        criteria: Criterion::ALL.to_vec(),
        output_format: OutputFormat::Csv,
        oracle_seed: 7,
    }
}

/// Recursively overlays `patch` on `base`; objects merge, anything else
/// replaces.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

/// Shortcut keys accepted at the top level next to the resolved fields.
const PRESET_KEY: &str = "preset";
const REPLICATIONS_KEY: &str = "replications";

pub fn parse_config(path: &Path) -> Result<BenchmarkConfig, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<BenchmarkConfig, ConfigError> {
    if text.trim().is_empty() {
        return Err(ConfigError::Empty);
    }
    let raw: Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let Value::Object(mut raw) = raw else {
        return Err(ConfigError::Syntax("top level must be an object".into()));
    };
    if raw.is_empty() {
        return Err(ConfigError::Empty);
    }

    let mut resolved = match raw.remove(PRESET_KEY) {
        Some(Value::String(name)) => {
            let base = preset(&name).ok_or(ConfigError::UnknownPreset(name))?;
            serde_json::to_value(base).expect("presets serialize")
        }
        Some(_) => return Err(invalid(PRESET_KEY, "must be a string")),
        None => Value::Object(Map::new()),
    };
    let replications = raw.remove(REPLICATIONS_KEY);
    // a new experiment alpha carries over to the loop unless both are given
    let alpha_only_in_experiment = raw.get("experiment").and_then(|e| e.get("alpha")).is_some()
        && raw.get("sur").and_then(|s| s.get("alpha")).is_none();
    merge(&mut resolved, Value::Object(raw));
    if let Some(r) = replications {
        merge(&mut resolved, serde_json::json!({ "experiment": { "replications": r } }));
    }
    if alpha_only_in_experiment {
        let a = resolved["experiment"]["alpha"].clone();
        merge(&mut resolved, serde_json::json!({ "sur": { "alpha": a } }));
    }

    let config: BenchmarkConfig = serde_path_to_error::deserialize(resolved).map_err(|e| {
        let key = e.path().to_string();
        invalid(if key == "." { "config" } else { &key }, e.into_inner().to_string())
    })?;
    config.validate()?;
    Ok(config)
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        let e = &self.experiment;
        if e.replications == 0 {
            return Err(invalid("experiment.replications", "must be at least 1"));
        }
        if !(e.alpha > 0.0 && e.alpha < 1.0) {
            return Err(invalid("experiment.alpha", "must lie in (0, 1)"));
        }
        if e.oracle_sample_size < surq_core::testbed::MIN_ORACLE_SAMPLE {
            return Err(invalid(
                "experiment.oracle_sample_size",
                format!("must be at least {}", surq_core::testbed::MIN_ORACLE_SAMPLE),
            ));
        }
        if let Err(err) = e.function.validate() {
            return Err(invalid("experiment.function", err.to_string()));
        }
        if let Err(err) = e.distribution.validate() {
            return Err(invalid("experiment.distribution", err.to_string()));
        }
        if e.function.dim() != e.distribution.dim() {
            return Err(invalid(
                "experiment.distribution",
                format!("has dimension {} but the function has {}", e.distribution.dim(), e.function.dim()),
            ));
        }
        if self.sur.alpha != e.alpha {
            return Err(invalid(
                "sur.alpha",
                format!("{} differs from experiment.alpha = {}", self.sur.alpha, e.alpha),
            ));
        }
        if self.criteria.is_empty() {
            return Err(invalid("criteria", "must name at least one criterion"));
        }
        for (i, c) in self.criteria.iter().enumerate() {
            if self.criteria[..i].contains(c) {
                return Err(invalid("criteria", format!("`{}` listed twice", c.name())));
            }
        }
        let s = &self.sur;
        let d = e.function.dim();
        let checks: [(&str, bool, String); 6] = [
            ("sur.n_initial", s.n_initial >= d + 2, format!("must be at least dimension + 2 = {}", d + 2)),
            ("sur.budget", s.budget >= s.n_initial, format!("must be at least n_initial = {}", s.n_initial)),
            ("sur.cloud_size", s.cloud_size >= 2, "must be at least 2".into()),
            ("sur.integration_points", s.integration_points != Some(0), "must be positive".into()),
            (
                "sur.model.nugget",
                s.model.nugget >= 0.0 && s.model.nugget <= s.model.max_nugget,
                "must satisfy 0 <= nugget <= max_nugget".into(),
            ),
            (
                "sur.model",
                s.model.mle_starts > 0 && s.model.refit_every > 0,
                "mle_starts and refit_every must be positive".into(),
            ),
        ];
        for (key, ok, message) in checks {
            if !ok {
                return Err(invalid(key, message));
            }
        }
        if let Candidates::Pool { pool_size, shortlist_size } = s.candidates {
            if shortlist_size == 0 || shortlist_size > pool_size {
                return Err(invalid("sur.candidates.shortlist_size", format!("must lie in 1..={pool_size}")));
            }
        }
        Ok(())
    }

    /// Pretty JSON of the resolved config.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Loop settings for one replication and criterion.
    pub fn run_config(&self, criterion: Criterion, replication: usize) -> SurConfig {
        SurConfig { criterion, seed: self.replication_seed(replication), ..self.sur.clone() }
    }

    pub fn replication_seed(&self, replication: usize) -> u64 {
        self.sur.seed.wrapping_add(replication as u64)
    }

    /// Number of result rows a complete run produces.
    pub fn expected_rows(&self) -> usize {
        self.experiment.replications * self.criteria.len() * (self.sur.budget - self.sur.n_initial + 1)
    }
}
