//! Model-side commands: train, generate, attribute.

use anyhow::{bail, Context, Result};
use serde_json::json;

use super::{check_artifacts, emit, load_model, load_registry, load_vocab, required_path};
use crate::args::{AttributeArgs, GenerateArgs, TrainArgs};
use crate::config::{pick, ProjectConfig};
use wasa_core::generator::{enforce_watermark, generate, GenConfig};
use wasa_core::marking::{load_marked_corpus, strip_watermarks};
use wasa_core::model::{ModelConfig, WasaModel};
use wasa_core::registry::MatchMode;
use wasa_core::tokenizer::corpus_blocks;
use wasa_core::trainer::{train_with_progress, TrainConfig};

pub fn cmd_train(args: &TrainArgs, cfg: &ProjectConfig, seed: u64) -> Result<()> {
    let corpus_path = required_path(args.corpus.as_ref(), cfg.paths.corpus.as_ref(), "corpus")?;
    let marked = load_marked_corpus(&corpus_path)?;
    let vocab = load_vocab(args.vocab.as_ref(), cfg)?;

    let block_size = pick(args.block_size, cfg.model.block_size, 128);
    let blocks = corpus_blocks(&marked, &vocab, block_size)?;
    let model_cfg = ModelConfig {
        vocab_words: vocab.word_count(),
        vocab_watermarks: vocab.watermark_count(),
        embed: pick(args.embed, cfg.model.embed, 64),
        layers: pick(args.layers, cfg.model.layers, 2),
        heads: pick(args.heads, cfg.model.heads, 2),
        block_size,
        frozen_layers: pick(args.frozen_layers, cfg.model.frozen_layers, 0),
        seed,
    };
    let train_cfg = TrainConfig {
        learning_rate: pick(args.learning_rate, cfg.train.learning_rate, 5e-4),
        epochs: pick(args.epochs, cfg.train.epochs, 1),
        batch_size: pick(args.batch_size, cfg.train.batch_size, 8),
        grad_accumulation: pick(args.grad_accumulation, cfg.train.grad_accumulation, 1),
        seed,
        ..Default::default()
    };

    let mut model: WasaModel<f32> = WasaModel::init(model_cfg)?;
    let every = args.progress_every.unwrap_or(0);
    let log = train_with_progress(&mut model, &blocks, &train_cfg, |r| {
        if every > 0 && r.step % every == 0 {
            eprintln!("step {}: loss_lm {:.4} loss_wtm {:.4}", r.step, r.loss_lm, r.loss_wtm);
        }
    })?;
    model.save(&args.out)?;
    if let Some(path) = &args.log {
        log.save_jsonl(path)?;
    }
    let last = log.records.last();
    eprintln!(
        "trained {} steps on {} blocks; final loss_lm {:.4}, loss_wtm {:.4}; checkpoint at {}",
        log.records.len(),
        blocks.len(),
        last.map_or(f64::NAN, |r| r.loss_lm),
        last.map_or(f64::NAN, |r| r.loss_wtm),
        args.out.display()
    );
    Ok(())
}

fn gen_config(args: &GenerateArgs, cfg: &ProjectConfig, seed: u64) -> GenConfig {
    let defaults = GenConfig::default();
    GenConfig {
        top_k_words: pick(args.top_k_words, cfg.gen.top_k_words, defaults.top_k_words),
        temperature: pick(args.temperature, cfg.gen.temperature, defaults.temperature),
        repetition_penalty: cfg.gen.repetition_penalty.unwrap_or(defaults.repetition_penalty),
        length_penalty: cfg.gen.length_penalty.unwrap_or(defaults.length_penalty),
        max_new_tokens: pick(args.max_new_tokens, cfg.gen.max_new_tokens, defaults.max_new_tokens),
        beam_size: pick(args.beam_size, cfg.gen.beam_size, defaults.beam_size),
        top_k_watermarks: pick(
            args.top_k_watermarks,
            cfg.gen.top_k_watermarks,
            defaults.top_k_watermarks,
        ),
        seed,
    }
}

pub fn cmd_generate(args: &GenerateArgs, cfg: &ProjectConfig, seed: u64) -> Result<()> {
    let model = load_model(args.checkpoint.as_ref(), cfg)?;
    let vocab = load_vocab(args.vocab.as_ref(), cfg)?;
    let registry = load_registry(args.registry.as_ref(), cfg)?;
    check_artifacts(&model, &vocab, &registry)?;

    let prompt = match (&args.prompt, &args.prompt_file) {
        (Some(p), _) => p.clone(),
        (None, Some(path)) => std::fs::read_to_string(path)
            .with_context(|| format!("reading prompt {}", path.display()))?,
        (None, None) => bail!("a prompt is required (--prompt or --prompt-file)"),
    };
    let out = generate(&model, &vocab, &prompt, registry.length(), &gen_config(args, cfg, seed))?;

    if args.raw {
        // raw text carries the invisible codepoints; meant for files/pipes
        return emit(args.out.as_deref(), &out.text);
    }
    let (clean, runs) = strip_watermarks(&out.text, registry.alphabet());
    let rendered = json!({
        "text": clean,
        "runs": runs
            .iter()
            .map(|r| json!({"offset": r.offset, "codes": r.watermark().to_codes()}))
            .collect::<Vec<_>>(),
        "watermarks": out
            .watermarks
            .iter()
            .map(|w| json!({"codes": w.codes.to_codes(), "logprob": w.logprob}))
            .collect::<Vec<_>>(),
        "forced": out.forced,
    });
    emit(args.out.as_deref(), &serde_json::to_string_pretty(&rendered)?)
}

pub fn cmd_attribute(args: &AttributeArgs, cfg: &ProjectConfig) -> Result<()> {
    let model = load_model(args.checkpoint.as_ref(), cfg)?;
    let vocab = load_vocab(args.vocab.as_ref(), cfg)?;
    let registry = load_registry(args.registry.as_ref(), cfg)?;
    check_artifacts(&model, &vocab, &registry)?;

    let mode = match args.mode.as_str() {
        "exact" => MatchMode::Exact,
        "soft" => MatchMode::Soft,
        other => bail!("unknown match mode `{other}` (expected exact or soft)"),
    };
    let text = std::fs::read_to_string(&args.text)
        .with_context(|| format!("reading {}", args.text.display()))?;
    let (_, runs) = strip_watermarks(&text, registry.alphabet());
    let mut decoded: Vec<wasa_core::registry::Watermark> =
        runs.iter().map(|r| r.watermark()).collect();
    let mut forced = false;
    if decoded.is_empty() && args.enforce {
        let beam = args.beam_size.unwrap_or(cfg.gen.beam_size.unwrap_or(5));
        decoded.push(enforce_watermark(&model, &vocab, &text, registry.length(), beam)?);
        forced = true;
    }
    let matched = registry.match_generated(&decoded, mode);
    let rendered = json!({
        "provider": matched.provider.as_ref().map(|p| p.as_str()),
        "watermarks": decoded.iter().map(|w| w.to_codes()).collect::<Vec<_>>(),
        "mode": if mode == MatchMode::Exact { "exact" } else { "soft" },
        "forced": forced,
    });
    emit(args.out.as_deref(), &serde_json::to_string_pretty(&rendered)?)
}
