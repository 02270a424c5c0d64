//! Shared fixtures for the criterion benchmarks.

use wasa_core::marking::{build_marked_corpus, MarkedCorpus, SelectionConfig};
use wasa_core::model::{ModelConfig, WasaModel};
use wasa_core::registry::{Registry, WatermarkAlphabet};
use wasa_core::synthbench::{self, BenchConfig, SynthBench};
use wasa_core::tokenizer::{corpus_blocks, Block, Vocab};

pub struct Fixture {
    pub bench: SynthBench,
    pub registry: Registry,
    pub marked: MarkedCorpus,
    pub vocab: Vocab,
    pub blocks: Vec<Block>,
    pub model: WasaModel<f32>,
}

/// Small but realistic pipeline state: 5 providers, desk-scale model shape.
pub fn fixture() -> Fixture {
    let bench = synthbench::generate(&BenchConfig {
        providers: 5,
        docs_per_provider: 40,
        sentences_per_doc: 3,
        eval_docs_per_provider: 2,
        seed: 1,
        ..Default::default()
    })
    .expect("bench");
    let registry = Registry::new(
        bench.provider_names(),
        10,
        WatermarkAlphabet::default_six(),
        1,
        3,
    )
    .expect("registry");
    let marked = build_marked_corpus(
        &bench.train,
        &registry,
        &SelectionConfig {
            fraction: 0.2,
            seed: 1,
            ..Default::default()
        },
    )
    .expect("marking");
    let texts: Vec<String> = marked
        .corpora
        .iter()
        .flat_map(|c| c.documents.iter().map(|d| d.text.clone()))
        .collect();
    let vocab = Vocab::build(texts.iter(), 4096, registry.alphabet()).expect("vocab");
    let blocks = corpus_blocks(&marked, &vocab, 128).expect("blocks");
    let model = WasaModel::init(ModelConfig {
        vocab_words: vocab.word_count(),
        vocab_watermarks: vocab.watermark_count(),
        embed: 64,
        layers: 2,
        heads: 2,
        block_size: 128,
        frozen_layers: 0,
        seed: 1,
    })
    .expect("model");
    Fixture {
        bench,
        registry,
        marked,
        vocab,
        blocks,
        model,
    }
}
