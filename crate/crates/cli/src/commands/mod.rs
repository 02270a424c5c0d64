//! Command implementations.

mod data;
mod evalcmd;
mod modelcmd;

pub use data::{cmd_mark, cmd_registry, cmd_synthbench, cmd_vocab};
pub use evalcmd::{cmd_attack, cmd_baseline, cmd_evaluate, cmd_provenance};
pub use modelcmd::{cmd_attribute, cmd_generate, cmd_train};

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::config::ProjectConfig;
use wasa_core::model::WasaModel;
use wasa_core::registry::Registry;
use wasa_core::tokenizer::Vocab;

/// Resolve a required path from a flag or the config file's [paths] section.
pub fn required_path(
    flag: Option<&PathBuf>,
    file: Option<&PathBuf>,
    what: &str,
) -> Result<PathBuf> {
    match flag.or(file) {
        Some(p) => Ok(p.clone()),
        None => bail!("missing --{what} (not on the command line nor in the config file)"),
    }
}

pub fn load_registry(flag: Option<&PathBuf>, cfg: &ProjectConfig) -> Result<Registry> {
    let path = required_path(flag, cfg.paths.registry.as_ref(), "registry")?;
    Registry::load(&path).with_context(|| format!("loading registry {}", path.display()))
}

pub fn load_vocab(flag: Option<&PathBuf>, cfg: &ProjectConfig) -> Result<Vocab> {
    let path = required_path(flag, cfg.paths.vocab.as_ref(), "vocab")?;
    Vocab::load(&path).with_context(|| format!("loading vocab {}", path.display()))
}

pub fn load_model(flag: Option<&PathBuf>, cfg: &ProjectConfig) -> Result<WasaModel<f32>> {
    let path = required_path(flag, cfg.paths.checkpoint.as_ref(), "checkpoint")?;
    WasaModel::<f32>::load(&path).with_context(|| format!("loading checkpoint {}", path.display()))
}

/// Writes to the path when given, stdout otherwise; output always ends in a
/// newline so shell pipelines behave.
pub fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    let text = if content.ends_with('\n') {
        content.to_string()
    } else {
        format!("{content}\n")
    };
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Checks that the model, vocab, and registry agree on sizes.
pub fn check_artifacts(model: &WasaModel<f32>, vocab: &Vocab, registry: &Registry) -> Result<()> {
    if model.config.vocab_words != vocab.word_count()
        || model.config.vocab_watermarks != vocab.watermark_count()
    {
        bail!(
            "checkpoint vocabulary ({} + {}) does not match the vocab file ({} + {})",
            model.config.vocab_words,
            model.config.vocab_watermarks,
            vocab.word_count(),
            vocab.watermark_count()
        );
    }
    if registry.alphabet().codepoints() != vocab.watermark_chars() {
        bail!("registry alphabet does not match the vocab's watermark codepoints");
    }
    Ok(())
}
