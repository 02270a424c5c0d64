//! Project configuration file (TOML or JSON) with CLI-flag overrides.
//!
//! Resolution order for every knob: explicit command-line flag, then the
//! config file, then the `WASA_SEED` environment variable for the seed,
//! then built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub selection: Selection,
    #[serde(default)]
    pub model: Model,
    #[serde(default)]
    pub train: Train,
    #[serde(default)]
    pub gen: Gen,
    #[serde(default)]
    pub trials: Trials,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Selection {
    pub fraction: Option<f64>,
    pub strategy: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Model {
    pub embed: Option<usize>,
    pub layers: Option<usize>,
    pub heads: Option<usize>,
    pub block_size: Option<usize>,
    pub frozen_layers: Option<usize>,
    pub target_vocab: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Train {
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub grad_accumulation: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gen {
    pub top_k_words: Option<usize>,
    pub temperature: Option<f64>,
    pub repetition_penalty: Option<f64>,
    pub length_penalty: Option<f64>,
    pub max_new_tokens: Option<usize>,
    pub beam_size: Option<usize>,
    pub top_k_watermarks: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trials {
    pub trials_per_provider: Option<usize>,
    pub prompt_chars: Option<usize>,
    pub gen_tokens: Option<usize>,
    pub k_list: Option<Vec<usize>>,
    pub enforce: Option<bool>,
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<ProjectConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        let cfg = if is_json {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        Ok(cfg)
    }

    pub fn load_opt(path: Option<&Path>) -> Result<ProjectConfig> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(ProjectConfig::default()),
        }
    }
}

/// Seed resolution: flag > config file > WASA_SEED > 0.
pub fn resolve_seed(flag: Option<u64>, config: &ProjectConfig) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(s) = config.seed {
        return Ok(s);
    }
    match std::env::var("WASA_SEED") {
        Ok(v) => v
            .parse::<u64>()
            .with_context(|| format!("WASA_SEED is not an integer: `{v}`")),
        Err(_) => Ok(0),
    }
}

pub fn pick<T: Clone>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
