//! Corpus marking: sentence segmentation, TF-IDF sentence scoring, watermark
//! insertion at random word boundaries, and extraction of embedded
//! watermark runs from arbitrary text.
//!
//! Stripping all alphabet codepoints from a marked document reproduces the
//! original document byte for byte; the manifest records every insertion.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::ProviderCorpus;
use crate::error::{Error, Result};
use crate::registry::{ProviderId, Registry, Watermark, WatermarkAlphabet};
use crate::seed::{rng_for, seed_for};

/// A sentence with its span in the source text, in char indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub text: String,
    /// Half-open `[start, end)` char range in the source document.
    pub char_span: (usize, usize),
}

/// Splits on `.`, `!`, `?` followed by whitespace or end of text. Trailing
/// text without a terminator forms a final sentence. Abbreviation false
/// positives are accepted.
pub fn segment_sentences(text: &str) -> Vec<Sentence> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..chars.len() {
        let c = chars[i];
        if start.is_none() {
            if !c.is_whitespace() {
                start = Some(i);
            }
            continue;
        }
        if matches!(c, '.' | '!' | '?') && chars.get(i + 1).map_or(true, |n| n.is_whitespace()) {
            let s = start.take().unwrap();
            sentences.push(Sentence {
                text: chars[s..=i].iter().collect(),
                char_span: (s, i + 1),
            });
        }
    }
    if let Some(s) = start {
        let mut end = chars.len();
        while end > s && chars[end - 1].is_whitespace() {
            end -= 1;
        }
        sentences.push(Sentence {
            text: chars[s..end].iter().collect(),
            char_span: (s, end),
        });
    }
    sentences
}

/// Lowercased alphanumeric-run terms of a text.
pub fn terms(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// One scored sentence of a provider corpus.
#[derive(Debug, Clone)]
pub struct SentenceScore {
    pub doc_index: usize,
    pub doc_id: String,
    pub sentence_index: usize,
    pub score: f64,
}

/// Scores every sentence of the provider as the mean over its distinct terms
/// of tf·idf, with tf the within-sentence term frequency and
/// idf = ln((1+N)/(1+df)) + 1 over the provider's N sentences. Returns
/// sentences in descending score order, ties broken by (doc_id,
/// sentence_index).
pub fn tfidf_rank(corpus: &ProviderCorpus) -> Result<Vec<SentenceScore>> {
    let mut sentence_terms: Vec<(usize, usize, Vec<String>)> = Vec::new();
    for (doc_index, doc) in corpus.documents.iter().enumerate() {
        for (sentence_index, s) in segment_sentences(&doc.text).iter().enumerate() {
            sentence_terms.push((doc_index, sentence_index, terms(&s.text)));
        }
    }
    if sentence_terms.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let n = sentence_terms.len() as f64;
    let mut df: HashMap<&str, usize> = HashMap::new();
    for (_, _, ts) in &sentence_terms {
        let mut seen: Vec<&str> = Vec::new();
        for t in ts {
            if !seen.contains(&t.as_str()) {
                seen.push(t);
                *df.entry(t).or_insert(0) += 1;
            }
        }
    }

    let mut scored: Vec<SentenceScore> = sentence_terms
        .iter()
        .map(|(doc_index, sentence_index, ts)| {
            let token_count = ts.len() as f64;
            let mut counts: HashMap<&str, usize> = HashMap::new();
            for t in ts {
                *counts.entry(t).or_insert(0) += 1;
            }
            let score = if counts.is_empty() {
                0.0
            } else {
                let sum: f64 = counts
                    .iter()
                    .map(|(t, &c)| {
                        let tf = c as f64 / token_count;
                        let idf = ((1.0 + n) / (1.0 + df[t] as f64)).ln() + 1.0;
                        tf * idf
                    })
                    .sum();
                sum / counts.len() as f64
            };
            SentenceScore {
                doc_index: *doc_index,
                doc_id: corpus.documents[*doc_index].doc_id.clone(),
                sentence_index: *sentence_index,
                score,
            }
        })
        .collect();

    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
            .then_with(|| a.sentence_index.cmp(&b.sentence_index))
    });
    Ok(scored)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    TfIdf,
    Random,
}

impl std::str::FromStr for SelectionStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tfidf" => Ok(Self::TfIdf),
            "random" => Ok(Self::Random),
            other => Err(Error::InvalidConfig(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub fraction: f64,
    pub strategy: SelectionStrategy,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            fraction: 0.20,
            strategy: SelectionStrategy::TfIdf,
            seed: 0,
        }
    }
}

impl SelectionConfig {
    fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "marking fraction {} outside (0, 1]",
                self.fraction
            )));
        }
        Ok(())
    }
}

/// Picks `ceil(fraction · N)` sentences: the top of the ranking for the
/// TF-IDF strategy, a seeded uniform sample without replacement for the
/// random strategy. Returns `(doc_index, sentence_index)` keys.
pub fn select_for_marking(ranked: &[SentenceScore], config: &SelectionConfig) -> Result<Vec<(usize, usize)>> {
    config.validate()?;
    if ranked.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let take = (config.fraction * ranked.len() as f64).ceil() as usize;
    let take = take.clamp(1, ranked.len());
    let chosen: Vec<&SentenceScore> = match config.strategy {
        SelectionStrategy::TfIdf => ranked.iter().take(take).collect(),
        SelectionStrategy::Random => {
            let mut rng = rng_for(config.seed, &["select"]);
            let idx = rand::seq::index::sample(&mut rng, ranked.len(), take);
            idx.iter().map(|i| &ranked[i]).collect()
        }
    };
    let mut keys: Vec<(usize, usize)> = chosen
        .iter()
        .map(|s| (s.doc_index, s.sentence_index))
        .collect();
    keys.sort_unstable();
    Ok(keys)
}

/// Inserts the watermark as one contiguous run at a uniformly chosen
/// interior whitespace boundary, attached to the end of the preceding word.
/// Sentences with fewer than two words get the run appended after the single
/// word. Returns the marked text and the char offset of the run.
pub fn insert_watermark<R: Rng>(sentence: &str, w: &Watermark, rng: &mut R) -> (String, usize) {
    let chars: Vec<char> = sentence.chars().collect();
    // End index (exclusive) of every whitespace-delimited word.
    let mut word_ends: Vec<usize> = Vec::new();
    let mut in_word = false;
    for (i, c) in chars.iter().enumerate() {
        if c.is_whitespace() {
            in_word = false;
        } else {
            if in_word {
                *word_ends.last_mut().unwrap() = i + 1;
            } else {
                word_ends.push(i + 1);
            }
            in_word = true;
        }
    }
    let offset = match word_ends.len() {
        0 => chars.len(),
        1 => word_ends[0],
        n => word_ends[rng.gen_range(0..n - 1)],
    };
    let mut out: String = chars[..offset].iter().collect();
    out.push_str(&w.as_text());
    out.extend(&chars[offset..]);
    (out, offset)
}

/// A maximal contiguous run of alphabet codepoints found in a text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WatermarkRun {
    /// Char offset of the run start in the original text.
    pub offset: usize,
    pub chars: Vec<char>,
}

impl WatermarkRun {
    pub fn watermark(&self) -> Watermark {
        Watermark::new(self.chars.clone())
    }
}

/// Removes every alphabet codepoint, returning the visible text and the
/// maximal runs in order. Reinserting the runs at their offsets reproduces
/// the input exactly.
pub fn strip_watermarks(text: &str, alphabet: &WatermarkAlphabet) -> (String, Vec<WatermarkRun>) {
    let mut clean = String::with_capacity(text.len());
    let mut runs: Vec<WatermarkRun> = Vec::new();
    let mut current: Option<WatermarkRun> = None;
    for (i, c) in text.chars().enumerate() {
        if alphabet.contains(c) {
            current
                .get_or_insert_with(|| WatermarkRun {
                    offset: i,
                    chars: Vec::new(),
                })
                .chars
                .push(c);
        } else {
            if let Some(run) = current.take() {
                runs.push(run);
            }
            clean.push(c);
        }
    }
    if let Some(run) = current.take() {
        runs.push(run);
    }
    (clean, runs)
}

/// One watermark insertion, as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkRecord {
    pub provider: ProviderId,
    pub doc_id: String,
    /// Sentence index within the document.
    pub sentence_index: usize,
    /// Char offset of the run start within the marked document.
    pub char_offset: usize,
    pub watermark: Watermark,
}

/// Provider corpora with watermarks embedded, plus the insertion manifest.
#[derive(Debug, Clone)]
pub struct MarkedCorpus {
    pub corpora: Vec<ProviderCorpus>,
    pub manifest: Vec<MarkRecord>,
}

/// Ranks, selects, and marks every provider corpus with its registry
/// watermark. Insertion randomness is split per (provider, document) from
/// the config seed, so output is independent of evaluation order.
pub fn build_marked_corpus(
    corpora: &[ProviderCorpus],
    registry: &Registry,
    config: &SelectionConfig,
) -> Result<MarkedCorpus> {
    config.validate()?;
    let mut marked_corpora = Vec::with_capacity(corpora.len());
    let mut manifest = Vec::new();
    for corpus in corpora {
        corpus.validate(registry.alphabet())?;
        let watermark = registry.watermark_of(&corpus.provider)?.clone();
        let ranked = tfidf_rank(corpus)?;
        let per_provider = SelectionConfig {
            seed: seed_for(config.seed, &["select", corpus.provider.as_str()]),
            ..config.clone()
        };
        let selected = select_for_marking(&ranked, &per_provider)?;

        let mut marked_docs = Vec::with_capacity(corpus.documents.len());
        for (doc_index, doc) in corpus.documents.iter().enumerate() {
            let chosen: Vec<usize> = selected
                .iter()
                .filter(|(d, _)| *d == doc_index)
                .map(|(_, s)| *s)
                .collect();
            if chosen.is_empty() {
                marked_docs.push(doc.clone());
                continue;
            }
            let sentences = segment_sentences(&doc.text);
            let mut rng = rng_for(config.seed, &["mark", corpus.provider.as_str(), &doc.doc_id]);
            let doc_chars: Vec<char> = doc.text.chars().collect();
            let mut out = String::with_capacity(doc.text.len());
            let mut consumed = 0usize; // chars of the original doc copied so far
            let mut emitted = 0usize; // chars of the marked doc emitted so far
            for &sentence_index in &chosen {
                let sentence = &sentences[sentence_index];
                let (marked_sentence, in_sentence) =
                    insert_watermark(&sentence.text, &watermark, &mut rng);
                let (span_start, span_end) = sentence.char_span;
                out.extend(&doc_chars[consumed..span_start]);
                emitted += span_start - consumed;
                manifest.push(MarkRecord {
                    provider: corpus.provider.clone(),
                    doc_id: doc.doc_id.clone(),
                    sentence_index,
                    char_offset: emitted + in_sentence,
                    watermark: watermark.clone(),
                });
                out.push_str(&marked_sentence);
                emitted += marked_sentence.chars().count();
                consumed = span_end;
            }
            out.extend(&doc_chars[consumed..]);
            marked_docs.push(crate::corpus::Document {
                doc_id: doc.doc_id.clone(),
                text: out,
            });
        }
        marked_corpora.push(ProviderCorpus {
            provider: corpus.provider.clone(),
            documents: marked_docs,
        });
    }
    Ok(MarkedCorpus {
        corpora: marked_corpora,
        manifest,
    })
}

/// Writes `root/<provider>/*.txt` plus `root/manifest.jsonl`.
pub fn save_marked_corpus(marked: &MarkedCorpus, root: &Path) -> Result<()> {
    crate::corpus::save_corpus_dir(&marked.corpora, root)?;
    save_manifest(&marked.manifest, &root.join("manifest.jsonl"))
}

pub fn save_manifest(manifest: &[MarkRecord], path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(Error::io(path))?;
    for record in manifest {
        let line = serde_json::to_string(record).expect("manifest serialization");
        writeln!(f, "{line}").map_err(Error::io(path))?;
    }
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<Vec<MarkRecord>> {
    let f = fs::File::open(path).map_err(Error::io(path))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(Error::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::format("manifest", format!("line {}: {e}", lineno + 1)))?,
        );
    }
    Ok(out)
}

/// Loads a marked corpus directory written by [`save_marked_corpus`].
pub fn load_marked_corpus(root: &Path) -> Result<MarkedCorpus> {
    let corpora = crate::corpus::load_corpus_dir(root)?;
    let manifest = load_manifest(&root.join("manifest.jsonl"))?;
    Ok(MarkedCorpus { corpora, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use proptest::prelude::*;

    fn corpus(provider: &str, docs: &[(&str, &str)]) -> ProviderCorpus {
        ProviderCorpus {
            provider: provider.into(),
            documents: docs
                .iter()
                .map(|(id, text)| Document {
                    doc_id: id.to_string(),
                    text: text.to_string(),
                })
                .collect(),
        }
    }

    #[test]
    fn segments_on_terminator_before_whitespace() {
        let s = segment_sentences("A b. C d!");
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].text, "A b.");
        assert_eq!(s[0].char_span, (0, 4));
        assert_eq!(s[1].text, "C d!");
        assert_eq!(s[1].char_span, (5, 9));
    }

    #[test]
    fn unterminated_text_is_one_sentence() {
        let s = segment_sentences("no terminator here");
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].text, "no terminator here");
    }

    #[test]
    fn empty_text_has_no_sentences() {
        assert!(segment_sentences("").is_empty());
        assert!(segment_sentences("   \n ").is_empty());
    }

    #[test]
    fn mid_token_period_does_not_split() {
        let s = segment_sentences("pi is 3.14 now. done");
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].text, "pi is 3.14 now.");
    }

    #[test]
    fn single_sentence_scores_finite_positive() {
        let ranked = tfidf_rank(&corpus("p", &[("d", "only one sentence")])).unwrap();
        assert_eq!(ranked.len(), 1);
        assert!(ranked[0].score > 0.0 && ranked[0].score.is_finite());
    }

    // Corpus: "zeta gamma. beta gamma. beta gamma." with N = 3 sentences.
    //   df(zeta)=1, df(beta)=2, df(gamma)=3
    //   idf(zeta)=ln(4/2)+1, idf(beta)=ln(4/3)+1, idf(gamma)=ln(4/4)+1
    // Sentence 0 score = ((1/2)(ln 2 + 1) + (1/2)(1)) / 2 = 0.6732867951399863
    // Sentences 1,2   = ((1/2)(ln(4/3) + 1) + (1/2)(1)) / 2 = 0.5719205181129452
    #[test]
    fn tfidf_hand_computed_scores() {
        let ranked = tfidf_rank(&corpus("p", &[("d", "zeta gamma. beta gamma. beta gamma.")])).unwrap();
        assert_eq!(ranked[0].sentence_index, 0, "unique-term sentence ranks first");
        assert!((ranked[0].score - 0.673_286_795_139_986_3).abs() < 1e-12);
        assert!((ranked[1].score - 0.571_920_518_112_945_2).abs() < 1e-12);
        assert!((ranked[2].score - 0.571_920_518_112_945_2).abs() < 1e-12);
        // tie broken by sentence index
        assert_eq!(ranked[1].sentence_index, 1);
        assert_eq!(ranked[2].sentence_index, 2);
    }

    #[test]
    fn tfidf_scores_invariant_under_document_permutation() {
        let a = corpus("p", &[("a", "zeta gamma. beta gamma."), ("b", "beta gamma. lone word here.")]);
        let b = corpus("p", &[("b", "beta gamma. lone word here."), ("a", "zeta gamma. beta gamma.")]);
        let ra = tfidf_rank(&a).unwrap();
        let rb = tfidf_rank(&b).unwrap();
        assert_eq!(ra.len(), rb.len());
        for (x, y) in ra.iter().zip(&rb) {
            assert_eq!((x.doc_id.as_str(), x.sentence_index), (y.doc_id.as_str(), y.sentence_index));
            assert!((x.score - y.score).abs() < 1e-15);
        }
    }

    fn ranked_fixture(n: usize) -> Vec<SentenceScore> {
        (0..n)
            .map(|i| SentenceScore {
                doc_index: 0,
                doc_id: "d".into(),
                sentence_index: i,
                score: 1.0 - i as f64 / n as f64,
            })
            .collect()
    }

    #[test]
    fn selection_takes_ceil_of_fraction() {
        let ranked = ranked_fixture(10);
        let cfg = SelectionConfig { fraction: 0.2, strategy: SelectionStrategy::TfIdf, seed: 0 };
        assert_eq!(select_for_marking(&ranked, &cfg).unwrap(), vec![(0, 0), (0, 1)]);
        let cfg = SelectionConfig { fraction: 0.05, ..cfg };
        assert_eq!(select_for_marking(&ranked, &cfg).unwrap().len(), 1);
    }

    #[test]
    fn random_selection_is_seed_deterministic() {
        let ranked = ranked_fixture(20);
        let cfg = SelectionConfig { fraction: 0.3, strategy: SelectionStrategy::Random, seed: 5 };
        let a = select_for_marking(&ranked, &cfg).unwrap();
        let b = select_for_marking(&ranked, &cfg).unwrap();
        assert_eq!(a, b);
        let c = select_for_marking(&ranked, &SelectionConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn tfidf_selection_grows_monotonically_with_fraction() {
        let ranked = ranked_fixture(17);
        let mut previous: Vec<(usize, usize)> = Vec::new();
        for f in [0.1, 0.25, 0.5, 0.8, 1.0] {
            let cfg = SelectionConfig { fraction: f, strategy: SelectionStrategy::TfIdf, seed: 0 };
            let sel = select_for_marking(&ranked, &cfg).unwrap();
            assert!(previous.iter().all(|k| sel.contains(k)), "selection at larger fraction must contain smaller");
            previous = sel;
        }
    }

    fn test_watermark() -> Watermark {
        let a = WatermarkAlphabet::default_six();
        Watermark::new((0..10).map(|i| a.char_at(i % a.len())).collect())
    }

    #[test]
    fn insertion_gap_frequencies_are_uniform() {
        let w = test_watermark();
        let mut at_first = 0usize;
        let mut at_second = 0usize;
        for seed in 0..10_000u64 {
            let mut rng = rng_for(seed, &["t"]);
            let (_, offset) = insert_watermark("alpha beta gamma", &w, &mut rng);
            match offset {
                5 => at_first += 1,
                10 => at_second += 1,
                other => panic!("offset {other} is not an interior gap"),
            }
        }
        let p = at_first as f64 / 10_000.0;
        assert!((p - 0.5).abs() < 0.03, "gap frequency {p}");
        assert_eq!(at_first + at_second, 10_000);
    }

    // Chi-squared goodness of fit against the uniform distribution over the
    // 5 interior gaps of a 6-word sentence; critical value for df=4 at the
    // 0.01 level is 13.277.
    #[test]
    fn insertion_positions_pass_chi_squared_uniformity() {
        let w = test_watermark();
        let sentence = "one two three four five six";
        let mut counts: HashMap<usize, usize> = HashMap::new();
        let samples = 20_000usize;
        for seed in 0..samples as u64 {
            let mut rng = rng_for(seed, &["chi"]);
            let (_, offset) = insert_watermark(sentence, &w, &mut rng);
            *counts.entry(offset).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 5);
        let expected = samples as f64 / 5.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 13.277, "chi-squared statistic {chi2}");
    }

    #[test]
    fn single_word_sentence_appends_run() {
        let w = test_watermark();
        let mut rng = rng_for(0, &["t"]);
        let (marked, offset) = insert_watermark("hello", &w, &mut rng);
        assert_eq!(offset, 5);
        assert_eq!(marked, format!("hello{}", w.as_text()));
    }

    #[test]
    fn strip_reports_runs_and_reconstructs() {
        let a = WatermarkAlphabet::default_six();
        let w = test_watermark();
        let text = format!("alpha{} beta {}end", w.as_text(), a.char_at(0).to_string().repeat(3));
        let (clean, runs) = strip_watermarks(&text, &a);
        assert_eq!(clean, "alpha beta end");
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[0].chars.len(), 10);
        assert_eq!(runs[0].offset, 5);
        assert_eq!(runs[1].chars.len(), 3);
        assert_eq!(reconstruct(&clean, &runs), text);

        let (clean, runs) = strip_watermarks("no runs at all", &a);
        assert_eq!(clean, "no runs at all");
        assert!(runs.is_empty());
    }

    /// Inverse of strip: reinsert runs at their original offsets.
    fn reconstruct(clean: &str, runs: &[WatermarkRun]) -> String {
        let mut out = String::new();
        let mut chars = clean.chars();
        let mut emitted = 0usize;
        for run in runs {
            while emitted < run.offset {
                out.push(chars.next().expect("offset within text"));
                emitted += 1;
            }
            out.extend(run.chars.iter());
            emitted += run.chars.len();
        }
        out.extend(chars);
        out
    }

    fn registry_for(names: &[&str]) -> Registry {
        Registry::new(
            names.iter().map(|&n| n.into()).collect(),
            10,
            WatermarkAlphabet::default_six(),
            77,
            3,
        )
        .unwrap()
    }

    #[test]
    fn marked_corpus_counts_and_roundtrip() {
        let sentences: Vec<String> = (0..10).map(|i| format!("word{i} common tail sentence {i}.")).collect();
        let corpora = vec![corpus("p", &[("d", &sentences.join(" "))])];
        let registry = registry_for(&["p"]);
        let cfg = SelectionConfig { fraction: 0.2, strategy: SelectionStrategy::TfIdf, seed: 3 };
        let marked = build_marked_corpus(&corpora, &registry, &cfg).unwrap();
        assert_eq!(marked.manifest.len(), 2);
        let expected = registry.watermark_of(&"p".into()).unwrap();
        for record in &marked.manifest {
            assert_eq!(&record.watermark, expected);
        }
        let (clean, runs) = strip_watermarks(&marked.corpora[0].documents[0].text, registry.alphabet());
        assert_eq!(clean, corpora[0].documents[0].text);
        assert_eq!(runs.len(), 2);
        // manifest offsets and contents equal the stripped runs
        for (record, run) in marked.manifest.iter().zip(&runs) {
            assert_eq!(record.char_offset, run.offset);
            assert_eq!(record.watermark.chars(), run.chars.as_slice());
        }
    }

    #[test]
    fn providers_never_share_watermarks() {
        let corpora = vec![
            corpus("p", &[("d", "alpha one. alpha two. alpha three. alpha four. alpha five.")]),
            corpus("q", &[("d", "beta one. beta two. beta three. beta four. beta five.")]),
        ];
        let registry = registry_for(&["p", "q"]);
        let cfg = SelectionConfig { fraction: 0.4, strategy: SelectionStrategy::TfIdf, seed: 3 };
        let marked = build_marked_corpus(&corpora, &registry, &cfg).unwrap();
        let wp = registry.watermark_of(&"p".into()).unwrap();
        let wq = registry.watermark_of(&"q".into()).unwrap();
        for record in &marked.manifest {
            let expected = if record.provider == "p".into() { wp } else { wq };
            assert_eq!(&record.watermark, expected);
        }
    }

    #[test]
    fn manifest_jsonl_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let corpora = vec![corpus("p", &[("d", "aa bb. cc dd. ee ff. gg hh. ii jj.")])];
        let registry = registry_for(&["p"]);
        let cfg = SelectionConfig { fraction: 0.4, strategy: SelectionStrategy::TfIdf, seed: 3 };
        let marked = build_marked_corpus(&corpora, &registry, &cfg).unwrap();
        save_marked_corpus(&marked, dir.path()).unwrap();
        let loaded = load_marked_corpus(dir.path()).unwrap();
        assert_eq!(loaded.manifest, marked.manifest);
        assert_eq!(loaded.corpora[0].documents[0].text, marked.corpora[0].documents[0].text);
        // manifest file never contains raw invisible codepoints
        let text = std::fs::read_to_string(dir.path().join("manifest.jsonl")).unwrap();
        assert!(!text.chars().any(|c| registry.alphabet().contains(c)));
    }

    proptest! {
        #[test]
        fn strip_of_insert_is_identity(
            words in proptest::collection::vec("[a-z]{1,8}", 1..12),
            seed in 0u64..1000,
        ) {
            let sentence = words.join(" ");
            let w = test_watermark();
            let mut rng = rng_for(seed, &["prop"]);
            let (marked, offset) = insert_watermark(&sentence, &w, &mut rng);
            let (clean, runs) = strip_watermarks(&marked, &WatermarkAlphabet::default_six());
            prop_assert_eq!(clean, sentence);
            prop_assert_eq!(runs.len(), 1);
            prop_assert_eq!(runs[0].offset, offset);
            prop_assert_eq!(&runs[0].chars, &w.chars().to_vec());
        }
    }
}
