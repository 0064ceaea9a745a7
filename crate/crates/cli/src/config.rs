//! Optional TOML configuration. Every field mirrors a command-line flag;
//! flags win over the file and the file wins over built-in defaults.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub extract: ExtractSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub train: Option<usize>,
    pub validation: Option<usize>,
    pub test: Option<usize>,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub min_objects: Option<usize>,
    pub max_objects: Option<usize>,
    pub min_radius: Option<f64>,
    pub max_radius: Option<f64>,
    pub background: Option<f64>,
    pub contrast: Option<f64>,
    pub noise: Option<f64>,
    pub kernel_radius: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub iterations: Option<usize>,
    pub candidates: Option<usize>,
    pub grammar: Option<String>,
    pub kernel: Option<String>,
    pub mode: Option<String>,
    pub rho: Option<f64>,
    pub alpha_max: Option<f64>,
    pub background_discount: Option<f64>,
    pub loss: Option<String>,
    pub validate: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractSection {
    pub method: Option<String>,
    pub smoothing_radius: Option<u32>,
    pub kde_radius: Option<f64>,
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub delta: Option<f64>,
    pub truncation: Option<f64>,
    pub partition: Option<String>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// First present value among flag and config, else the default.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}
