//! Deterministic synthetic benchmark: providers with topic-skewed word
//! distributions over a shared filler vocabulary plus per-provider keyword
//! sets. An overlap knob moves keywords into a shared pool (0 = disjoint
//! topics), which controls attribution difficulty.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attacks::Lexicon;
use crate::corpus::{save_corpus_dir, Document, ProviderCorpus};
use crate::error::{Error, Result};
use crate::registry::ProviderId;
use crate::seed::rng_for;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub providers: usize,
    /// Extra providers that receive corpora and registry entries but are
    /// excluded from training; used for provenance experiments.
    pub holdout_providers: usize,
    /// Fraction of each provider's keywords drawn from a pool shared by all
    /// providers; 0 gives fully disjoint topics.
    pub overlap: f64,
    pub docs_per_provider: usize,
    pub sentences_per_doc: usize,
    pub eval_docs_per_provider: usize,
    pub words_per_sentence: (usize, usize),
    /// Sentences are topped up with filler words until this many chars.
    pub min_sentence_chars: usize,
    /// Per-sentence keyword density is drawn uniformly from this range.
    pub keyword_rate_range: (f64, f64),
    /// Each sentence focuses on a small random subset of the provider's
    /// keywords, mimicking a subtopic.
    pub keywords_per_sentence: (usize, usize),
    pub keywords_per_provider: usize,
    pub common_words: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            providers: 5,
            holdout_providers: 0,
            overlap: 0.0,
            docs_per_provider: 10,
            sentences_per_doc: 26,
            eval_docs_per_provider: 2,
            words_per_sentence: (30, 42),
            min_sentence_chars: 210,
            keyword_rate_range: (0.45, 0.90),
            keywords_per_sentence: (2, 3),
            keywords_per_provider: 24,
            common_words: 80,
            seed: 0,
        }
    }
}

impl BenchConfig {
    fn validate(&self) -> Result<()> {
        if self.providers == 0 {
            return Err(Error::InvalidConfig("benchmark needs at least one provider".into()));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::InvalidConfig(format!("overlap {} outside [0, 1]", self.overlap)));
        }
        if self.words_per_sentence.0 == 0 || self.words_per_sentence.0 > self.words_per_sentence.1 {
            return Err(Error::InvalidConfig("bad words-per-sentence range".into()));
        }
        if self.keywords_per_provider == 0 || self.common_words == 0 {
            return Err(Error::InvalidConfig("empty word pools".into()));
        }
        Ok(())
    }

    pub fn total_providers(&self) -> usize {
        self.providers + self.holdout_providers
    }
}

#[derive(Debug, Clone)]
pub struct SynthBench {
    /// Corpora of the providers meant for training, in provider order.
    pub train: Vec<ProviderCorpus>,
    /// Held-out documents of the same training providers.
    pub eval: Vec<ProviderCorpus>,
    /// Corpora of providers never trained on.
    pub holdout: Vec<ProviderCorpus>,
    /// Per-provider keyword sets (training providers then holdout).
    pub keywords: Vec<Vec<String>>,
    pub lexicon: Lexicon,
}

impl SynthBench {
    pub fn provider_names(&self) -> Vec<ProviderId> {
        self.train
            .iter()
            .chain(&self.holdout)
            .map(|c| c.provider.clone())
            .collect()
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

fn pseudo_word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
        w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
    }
    w
}

fn unique_words(rng: &mut ChaCha8Rng, count: usize, taken: &mut HashSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let syllables = rng.gen_range(2..=4);
        let w = pseudo_word(rng, syllables);
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Zipf-like draw over an ordered pool: weight of rank r is 1/(r+1).
fn zipf_pick<'a>(rng: &mut ChaCha8Rng, pool: &'a [String], total_weight: f64) -> &'a str {
    let mut draw = rng.gen::<f64>() * total_weight;
    for (i, w) in pool.iter().enumerate() {
        draw -= 1.0 / (i + 1) as f64;
        if draw <= 0.0 {
            return w;
        }
    }
    pool.last().unwrap()
}

pub fn generate(config: &BenchConfig) -> Result<SynthBench> {
    config.validate()?;
    let mut word_rng = rng_for(config.seed, &["bench-words"]);
    let mut taken = HashSet::new();
    let common = unique_words(&mut word_rng, config.common_words, &mut taken);
    let shared_pool = unique_words(&mut word_rng, config.keywords_per_provider, &mut taken);

    let n_total = config.total_providers();
    let shared_per_provider =
        ((config.overlap * config.keywords_per_provider as f64).round() as usize)
            .min(config.keywords_per_provider);
    let mut keywords: Vec<Vec<String>> = Vec::with_capacity(n_total);
    for p in 0..n_total {
        let mut rng = rng_for(config.seed, &["bench-keywords", &p.to_string()]);
        let mut set =
            unique_words(&mut word_rng, config.keywords_per_provider - shared_per_provider, &mut taken);
        let picks = rand::seq::index::sample(&mut rng, shared_pool.len(), shared_per_provider);
        set.extend(picks.iter().map(|i| shared_pool[i].clone()));
        keywords.push(set);
    }

    let common_weight: f64 = (0..common.len()).map(|i| 1.0 / (i + 1) as f64).sum();
    let sentence = |rng: &mut ChaCha8Rng, kws: &[String]| -> String {
        let len = rng.gen_range(config.words_per_sentence.0..=config.words_per_sentence.1);
        let rate = rng.gen_range(config.keyword_rate_range.0..config.keyword_rate_range.1);
        // subtopic focus: the sentence repeats a few of the provider's keywords
        let focus_size = rng
            .gen_range(config.keywords_per_sentence.0..=config.keywords_per_sentence.1)
            .min(kws.len());
        let focus = rand::seq::index::sample(rng, kws.len(), focus_size);
        let mut words: Vec<&str> = Vec::with_capacity(len + 8);
        let mut chars = 0usize;
        while words.len() < len || chars < config.min_sentence_chars {
            let w = if rng.gen::<f64>() < rate {
                kws[focus.index(rng.gen_range(0..focus_size))].as_str()
            } else {
                zipf_pick(rng, &common, common_weight)
            };
            chars += w.chars().count() + 1;
            words.push(w);
        }
        let mut s = words.join(" ");
        s.push('.');
        s
    };

    let make_doc = |provider: usize, split: &str, doc: usize, sentences: usize| -> Document {
        let mut rng = rng_for(
            config.seed,
            &["bench-doc", &provider.to_string(), split, &doc.to_string()],
        );
        let text: Vec<String> = (0..sentences).map(|_| sentence(&mut rng, &keywords[provider])).collect();
        Document {
            doc_id: format!("{split}-{doc:03}"),
            text: text.join(" "),
        }
    };

    let name = |p: usize| ProviderId(format!("provider-{p:02}"));
    let mut train = Vec::new();
    let mut eval = Vec::new();
    let mut holdout = Vec::new();
    for p in 0..n_total {
        let docs: Vec<Document> = (0..config.docs_per_provider)
            .map(|d| make_doc(p, "doc", d, config.sentences_per_doc))
            .collect();
        let corpus = ProviderCorpus {
            provider: name(p),
            documents: docs,
        };
        if p < config.providers {
            train.push(corpus);
            eval.push(ProviderCorpus {
                provider: name(p),
                documents: (0..config.eval_docs_per_provider)
                    .map(|d| make_doc(p, "eval", d, config.sentences_per_doc))
                    .collect(),
            });
        } else {
            holdout.push(corpus);
        }
    }

    // Synonym lexicon over filler words only: each maps to the next one in
    // the pool, so substitution stays in-vocabulary and keyword signal is
    // untouched.
    let mut lexicon = Lexicon::default();
    for (i, w) in common.iter().enumerate() {
        lexicon.insert_entry(w, vec![common[(i + 1) % common.len()].clone()]);
    }

    Ok(SynthBench {
        train,
        eval,
        holdout,
        keywords,
        lexicon,
    })
}

/// Writes `root/train/`, `root/eval/`, `root/holdout/` in the provider
/// directory layout plus `root/lexicon.tsv`.
pub fn save_to_dir(bench: &SynthBench, root: &Path) -> Result<()> {
    std::fs::create_dir_all(root).map_err(Error::io(root))?;
    save_corpus_dir(&bench.train, &root.join("train"))?;
    if !bench.eval.is_empty() {
        save_corpus_dir(&bench.eval, &root.join("eval"))?;
    }
    if !bench.holdout.is_empty() {
        save_corpus_dir(&bench.holdout, &root.join("holdout"))?;
    }
    bench.lexicon.save(&root.join("lexicon.tsv"))
}
