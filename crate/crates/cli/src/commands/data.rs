//! Data-side commands: registry, mark, vocab, synthbench.

use anyhow::{bail, Context, Result};

use super::{emit, required_path};
use crate::args::{MarkArgs, RegistryArgs, SynthbenchArgs, VocabArgs};
use crate::config::{pick, ProjectConfig};
use wasa_core::corpus::load_corpus;
use wasa_core::marking::{build_marked_corpus, save_marked_corpus, SelectionConfig};
use wasa_core::registry::{ProviderId, Registry, WatermarkAlphabet};
use wasa_core::synthbench::{self, BenchConfig};
use wasa_core::tokenizer::Vocab;

fn alphabet_of_size(n: usize) -> Result<WatermarkAlphabet> {
    match n {
        6 => Ok(WatermarkAlphabet::default_six()),
        2 => Ok(WatermarkAlphabet::pair()),
        other => bail!("alphabet size must be 6 or 2, got {other}"),
    }
}

pub fn cmd_registry(args: &RegistryArgs, cfg: &ProjectConfig, seed: u64) -> Result<()> {
    let providers: Vec<ProviderId> = match (&args.names, &args.corpus) {
        (Some(names), _) => names.iter().map(|n| n.as_str().into()).collect(),
        (None, Some(path)) => load_corpus(path)?
            .into_iter()
            .map(|c| c.provider)
            .collect(),
        (None, None) => {
            let path = required_path(None, cfg.paths.corpus.as_ref(), "corpus")?;
            load_corpus(&path)?.into_iter().map(|c| c.provider).collect()
        }
    };
    let registry = Registry::new(
        providers,
        args.length,
        alphabet_of_size(args.alphabet_size)?,
        seed,
        args.min_hamming,
    )?;
    registry.save(&args.registry)?;
    eprintln!(
        "registry: {} providers, length {}, written to {}",
        registry.len(),
        registry.length(),
        args.registry.display()
    );
    Ok(())
}

pub fn cmd_mark(args: &MarkArgs, cfg: &ProjectConfig, seed: u64) -> Result<()> {
    let corpus_path = required_path(args.corpus.as_ref(), cfg.paths.corpus.as_ref(), "corpus")?;
    let corpora = load_corpus(&corpus_path)?;
    let registry = super::load_registry(args.registry.as_ref(), cfg)?;
    let strategy = pick(
        args.strategy.clone(),
        cfg.selection.strategy.clone(),
        "tfidf".to_string(),
    )
    .parse()?;
    let selection = SelectionConfig {
        fraction: pick(args.fraction, cfg.selection.fraction, 0.20),
        strategy,
        seed,
    };
    let marked = build_marked_corpus(&corpora, &registry, &selection)?;
    save_marked_corpus(&marked, &args.out)?;
    eprintln!(
        "marked {} sentences across {} providers into {}",
        marked.manifest.len(),
        marked.corpora.len(),
        args.out.display()
    );
    Ok(())
}

pub fn cmd_vocab(args: &VocabArgs, cfg: &ProjectConfig) -> Result<()> {
    let corpus_path = required_path(args.corpus.as_ref(), cfg.paths.corpus.as_ref(), "corpus")?;
    let corpora = load_corpus(&corpus_path)?;
    let registry = super::load_registry(args.registry.as_ref(), cfg)?;
    let target_v = pick(args.target_v, cfg.model.target_vocab, 4096);
    let texts = corpora
        .iter()
        .flat_map(|c| c.documents.iter().map(|d| d.text.as_str()));
    let vocab = Vocab::build(texts, target_v, registry.alphabet())?;
    vocab.save(&args.out)?;
    eprintln!(
        "vocabulary: {} word tokens + {} watermark tokens, written to {}",
        vocab.word_count(),
        vocab.watermark_count(),
        args.out.display()
    );
    Ok(())
}

pub fn cmd_synthbench(args: &SynthbenchArgs, seed: u64) -> Result<()> {
    let bench = synthbench::generate(&BenchConfig {
        providers: args.providers,
        holdout_providers: args.holdout,
        overlap: args.overlap,
        docs_per_provider: args.docs,
        sentences_per_doc: args.sentences,
        eval_docs_per_provider: args.eval_docs,
        seed,
        ..Default::default()
    })?;
    synthbench::save_to_dir(&bench, &args.out)
        .with_context(|| format!("writing benchmark to {}", args.out.display()))?;
    let sentences: usize = bench
        .train
        .iter()
        .flat_map(|c| &c.documents)
        .map(|d| wasa_core::marking::segment_sentences(&d.text).len())
        .sum();
    emit(
        None,
        &format!(
            "benchmark: {} providers (+{} held out), {} training sentences, overlap {}, at {}",
            args.providers,
            args.holdout,
            sentences,
            args.overlap,
            args.out.display()
        ),
    )
}
