//! Text generation with watermark emission.
//!
//! Word tokens are drawn by temperature + top-k multinomial sampling with a
//! repetition penalty. Whenever `[WTM]` is sampled, a fixed-length pure beam
//! search runs over the watermark head, the best beam's codepoints are
//! appended to the text, and word sampling resumes. Enforced generation
//! appends `[WTM]` to a prompt to force exactly one watermark out of it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DecodeSession, Scalar, WasaModel};
use crate::registry::Watermark;
use crate::seed::rng_for;
use crate::tokenizer::{Vocab, BOS, WTM};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub top_k_words: usize,
    pub temperature: f64,
    /// Logits of previously generated ids are divided by this when positive
    /// and multiplied when negative. Applied to word logits only.
    pub repetition_penalty: f64,
    /// Recorded for config compatibility; watermark beams are fixed-length
    /// and word decoding is sampling, so no length normalization applies.
    pub length_penalty: f64,
    pub max_new_tokens: usize,
    pub beam_size: usize,
    /// Beams returned per watermark event (top-k attribution).
    pub top_k_watermarks: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            top_k_words: 60,
            temperature: 0.7,
            repetition_penalty: 1.2,
            length_penalty: 2.0,
            max_new_tokens: 100,
            beam_size: 5,
            top_k_watermarks: 1,
            seed: 0,
        }
    }
}

impl GenConfig {
    fn validate(&self) -> Result<()> {
        if self.temperature <= 0.0 {
            return Err(Error::InvalidConfig("temperature must be positive".into()));
        }
        if self.beam_size == 0 || self.top_k_watermarks == 0 || self.beam_size < self.top_k_watermarks {
            return Err(Error::InvalidConfig(format!(
                "beam size {} must cover top-k {}",
                self.beam_size, self.top_k_watermarks
            )));
        }
        if self.top_k_words == 0 {
            return Err(Error::InvalidConfig("top-k word filter must be at least 1".into()));
        }
        Ok(())
    }
}

/// A watermark with its joint log-probability under the watermark head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredWatermark {
    pub codes: Watermark,
    pub logprob: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenOutput {
    /// The full synthetic sentence: prompt continuation rendered behind the
    /// prompt, with embedded watermark codepoints.
    pub text: String,
    /// The newly generated part alone.
    pub continuation: String,
    /// Best beam per watermark event, in emission order.
    pub watermarks: Vec<ScoredWatermark>,
    /// Top-k beams per watermark event, in emission order.
    pub runs_topk: Vec<Vec<ScoredWatermark>>,
    pub forced: bool,
}

/// Watermark length is fixed by the registry; generation needs it to size
/// beams. Kept explicit so the generator does not depend on a registry.
pub const DEFAULT_WATERMARK_TOKENS: usize = crate::registry::DEFAULT_WATERMARK_LEN;

fn capacity_check(model: &WasaModel<f32>, tokens: usize, reserve: usize) -> Result<()> {
    let max = model.config.block_size - 1 - reserve;
    if tokens > max {
        return Err(Error::PromptTooLong { tokens, max });
    }
    Ok(())
}

/// Pure beam search of exactly `m` steps over the watermark head, starting
/// from a session whose last pushed id is `[WTM]`. Returns the best `k`
/// complete beams by summed log-probability, ties broken by lexicographic
/// codepoint order; fully deterministic.
pub fn watermark_beam(
    session: &DecodeSession<'_, f32>,
    vocab: &Vocab,
    m: usize,
    beam_size: usize,
    k: usize,
) -> Result<Vec<ScoredWatermark>> {
    debug_assert_eq!(session.ids().last(), Some(&WTM));
    struct Beam<'m2> {
        session: DecodeSession<'m2, f32>,
        chars: Vec<usize>, // alphabet indices
        score: f64,
    }
    let mut beams = vec![Beam {
        session: session.clone(),
        chars: Vec::new(),
        score: 0.0,
    }];
    let v = vocab.word_count() as u32;
    for _ in 0..m {
        let mut candidates: Vec<(usize, usize, f64)> = Vec::new(); // (beam, char, score)
        for (bi, beam) in beams.iter().enumerate() {
            let log_probs = beam.session.watermark_log_probs();
            for (ci, &lp) in log_probs.iter().enumerate() {
                candidates.push((bi, ci, beam.score + lp));
            }
        }
        candidates.sort_by(|a, b| {
            b.2.total_cmp(&a.2).then_with(|| {
                let seq_a = (&beams[a.0].chars, a.1);
                let seq_b = (&beams[b.0].chars, b.1);
                seq_a.cmp(&seq_b)
            })
        });
        candidates.truncate(beam_size);
        let mut next = Vec::with_capacity(candidates.len());
        for (bi, ci, score) in candidates {
            let mut session = beams[bi].session.clone();
            session.push(v + ci as u32)?;
            let mut chars = beams[bi].chars.clone();
            chars.push(ci);
            next.push(Beam { session, chars, score });
        }
        beams = next;
    }
    beams.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.chars.cmp(&b.chars)));
    Ok(beams
        .into_iter()
        .take(k)
        .map(|b| ScoredWatermark {
            codes: Watermark::new(b.chars.iter().map(|&c| vocab.watermark_chars()[c]).collect()),
            logprob: b.score,
        })
        .collect())
}

fn sample_word(
    logits: &[f32],
    generated: &[u32],
    cfg: &GenConfig,
    rng: &mut impl Rng,
) -> u32 {
    let mut adjusted: Vec<f64> = logits.iter().map(|&z| Scalar::to_f64(z)).collect();
    let mut seen: Vec<u32> = generated.to_vec();
    seen.sort_unstable();
    seen.dedup();
    for &id in &seen {
        if let Some(z) = adjusted.get_mut(id as usize) {
            if *z > 0.0 {
                *z /= cfg.repetition_penalty;
            } else {
                *z *= cfg.repetition_penalty;
            }
        }
    }
    for z in adjusted.iter_mut() {
        *z /= cfg.temperature;
    }
    // top-k filter
    let mut order: Vec<usize> = (0..adjusted.len()).collect();
    order.sort_by(|&a, &b| adjusted[b].total_cmp(&adjusted[a]).then(a.cmp(&b)));
    order.truncate(cfg.top_k_words.min(order.len()));
    let max = adjusted[order[0]];
    let weights: Vec<f64> = order.iter().map(|&i| (adjusted[i] - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut draw = rng.gen::<f64>() * total;
    for (&i, &w) in order.iter().zip(&weights) {
        draw -= w;
        if draw <= 0.0 {
            return i as u32;
        }
    }
    *order.last().unwrap() as u32
}

/// Autoregressive generation from a prompt. The context starts with `[BOS]`
/// plus the tokenized prompt; when it would outgrow the positional table the
/// session re-anchors to its most recent half. Watermark runs are atomic:
/// a run begun near the token limit completes before generation stops.
pub fn generate(
    model: &WasaModel<f32>,
    vocab: &Vocab,
    prompt: &str,
    m: usize,
    cfg: &GenConfig,
) -> Result<GenOutput> {
    cfg.validate()?;
    let prompt_ids = vocab.encode(prompt).ids;
    capacity_check(model, prompt_ids.len() + 1, 0)?;

    let mut session = DecodeSession::new(model);
    session.push(BOS)?;
    session.prime(&prompt_ids)?;

    let mut rng = rng_for(cfg.seed, &["generate"]);
    let mut generated: Vec<u32> = Vec::new();
    let mut watermarks = Vec::new();
    let mut runs_topk = Vec::new();
    let k = model.config.block_size;

    while generated.len() < cfg.max_new_tokens {
        if session.remaining() == 0 {
            session.reanchor(k / 2)?;
        }
        let id = sample_word(&session.word_logits(), &generated, cfg, &mut rng);
        if id == BOS {
            break;
        }
        if id == WTM {
            // the whole [WTM]+run must fit before the positional table ends
            if session.remaining() < m + 1 {
                session.reanchor(k / 2)?;
            }
            session.push(WTM)?;
            generated.push(WTM);
            let beams = watermark_beam(&session, vocab, m, cfg.beam_size, cfg.top_k_watermarks)?;
            let best = beams[0].clone();
            for &c in best.codes.chars() {
                let id = vocab.id_of_watermark_char(c).expect("beam chars in alphabet");
                session.push(id)?;
                generated.push(id);
            }
            watermarks.push(best);
            runs_topk.push(beams);
            continue;
        }
        session.push(id)?;
        generated.push(id);
    }

    let mut full_ids = prompt_ids;
    full_ids.extend(&generated);
    Ok(GenOutput {
        text: vocab.decode(&full_ids, true)?,
        continuation: vocab.decode(&generated, true)?,
        watermarks,
        runs_topk,
        forced: false,
    })
}

/// Strips any runs from the text, appends `[WTM]` after the tokenized
/// remainder, and beam-searches one watermark. This is the enforced
/// generation path and the regeneration defense primitive.
pub fn enforce_watermark_topk(
    model: &WasaModel<f32>,
    vocab: &Vocab,
    text: &str,
    m: usize,
    beam_size: usize,
    k: usize,
) -> Result<Vec<ScoredWatermark>> {
    let alphabet = crate::registry::WatermarkAlphabet::new(vocab.watermark_chars().to_vec())?;
    let (clean, _) = crate::marking::strip_watermarks(text, &alphabet);
    let ids = vocab.encode(&clean).ids;
    capacity_check(model, ids.len() + 2, m)?;
    enforce_watermark_topk_ids(model, vocab, &ids, m, beam_size, k)
}

/// Forced watermark from a pre-tokenized word context; the context keeps
/// its leading tokens (the prompt region carries the strongest source
/// signal) and is truncated on the right to fit the positional table, so
/// evaluation paths that feed whole generations never fail on length.
pub fn enforce_watermark_topk_ids(
    model: &WasaModel<f32>,
    vocab: &Vocab,
    ids: &[u32],
    m: usize,
    beam_size: usize,
    k: usize,
) -> Result<Vec<ScoredWatermark>> {
    let max_ctx = model.config.block_size.saturating_sub(2 + m);
    let head = &ids[..ids.len().min(max_ctx)];
    let mut session = DecodeSession::new(model);
    session.push(BOS)?;
    session.prime(head)?;
    session.push(WTM)?;
    watermark_beam(&session, vocab, m, beam_size, k)
}

pub fn enforce_watermark(
    model: &WasaModel<f32>,
    vocab: &Vocab,
    text: &str,
    m: usize,
    beam_size: usize,
) -> Result<Watermark> {
    Ok(enforce_watermark_topk(model, vocab, text, m, beam_size, 1)?
        .remove(0)
        .codes)
}
