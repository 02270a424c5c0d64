//! Evaluation protocol: trial construction from marked sentences,
//! source-attribution accuracy with top-k and macro F1, fine-grained error
//! split, data-provenance checks, robustness sweeps under attack, and
//! distinct-n text diversity.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{apply_attack, AttackSpec, AttackTarget, Lexicon};
use crate::error::{Error, Result};
use crate::generator::{enforce_watermark_topk_ids, generate, GenConfig, ScoredWatermark};
use crate::marking::{segment_sentences, strip_watermarks, MarkedCorpus};
use crate::model::WasaModel;
use crate::registry::{MatchMode, ProviderId, Registry, Watermark};
use crate::seed::seed_for;
use crate::tokenizer::Vocab;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialSpec {
    pub trials_per_provider: usize,
    /// Visible chars taken from the start of each selected sentence.
    pub prompt_chars: usize,
    pub gen_tokens: usize,
    pub k_list: Vec<usize>,
    /// Force a watermark with `[WTM]` when none is generated naturally.
    pub enforce: bool,
}

impl Default for TrialSpec {
    fn default() -> Self {
        Self {
            trials_per_provider: 50,
            prompt_chars: 200,
            gen_tokens: 100,
            k_list: vec![1, 3, 5],
            enforce: true,
        }
    }
}

impl TrialSpec {
    fn validate(&self) -> Result<()> {
        if self.trials_per_provider == 0 || self.prompt_chars == 0 || self.gen_tokens == 0 {
            return Err(Error::InvalidConfig("trial counts must be at least 1".into()));
        }
        if self.k_list.is_empty() || self.k_list.iter().any(|&k| k == 0) {
            return Err(Error::InvalidConfig("k list must hold positive entries".into()));
        }
        Ok(())
    }

    pub fn max_k(&self) -> usize {
        self.k_list.iter().copied().max().unwrap_or(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub provider: ProviderId,
    pub prompt: String,
}

/// Builds prompts from watermark-selected sentences: per provider, the first
/// qualifying marked sentences in manifest order, stripped of watermarks and
/// cut to `prompt_chars` visible characters. The sentence's provider is the
/// trial's ground truth.
pub fn build_trials(
    marked: &MarkedCorpus,
    registry: &Registry,
    spec: &TrialSpec,
) -> Result<Vec<Trial>> {
    spec.validate()?;
    let alphabet = registry.alphabet();
    let mut trials = Vec::new();
    for corpus in &marked.corpora {
        let mut sentences_by_doc: std::collections::HashMap<&str, Vec<String>> =
            std::collections::HashMap::new();
        let mut per_provider = Vec::new();
        for record in marked.manifest.iter().filter(|r| r.provider == corpus.provider) {
            if per_provider.len() == spec.trials_per_provider {
                break;
            }
            let sentences = match sentences_by_doc.get(record.doc_id.as_str()) {
                Some(s) => s,
                None => {
                    let doc = corpus
                        .documents
                        .iter()
                        .find(|d| d.doc_id == record.doc_id)
                        .ok_or_else(|| {
                            Error::format("manifest", format!("unknown document `{}`", record.doc_id))
                        })?;
                    let texts = segment_sentences(&doc.text)
                        .into_iter()
                        .map(|s| s.text)
                        .collect();
                    sentences_by_doc.entry(record.doc_id.as_str()).or_insert(texts)
                }
            };
            let sentence = sentences.get(record.sentence_index).ok_or_else(|| {
                Error::format(
                    "manifest",
                    format!("sentence {} out of range in `{}`", record.sentence_index, record.doc_id),
                )
            })?;
            let (clean, _) = strip_watermarks(sentence, alphabet);
            let visible: Vec<char> = clean.chars().collect();
            if visible.len() < spec.prompt_chars {
                continue;
            }
            // cut at the budget, then back off to a word boundary so the
            // prompt never ends in a word fragment the tokenizer has
            // never seen
            let mut cut = spec.prompt_chars;
            if !visible[cut - 1].is_whitespace() && cut < visible.len() && !visible[cut].is_whitespace() {
                while cut > 0 && !visible[cut - 1].is_whitespace() {
                    cut -= 1;
                }
            }
            if cut == 0 {
                cut = spec.prompt_chars;
            }
            per_provider.push(Trial {
                provider: corpus.provider.clone(),
                prompt: visible[..cut].iter().collect::<String>().trim_end().to_string(),
            });
        }
        if per_provider.len() < spec.trials_per_provider {
            return Err(Error::InsufficientData {
                provider: corpus.provider.0.clone(),
                available: per_provider.len(),
                needed: spec.trials_per_provider,
            });
        }
        trials.extend(per_provider);
    }
    Ok(trials)
}

/// Resolved outcome of one trial, the unit the report is assembled from.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub provider: ProviderId,
    /// A watermark was emitted during natural generation.
    pub natural: bool,
    /// k=1 attribution decision (unanimous exact match over decoded runs,
    /// or the forced watermark's exact match).
    pub decision: Option<ProviderId>,
    /// Every decoded watermark exactly matches some registered provider.
    pub all_bound: bool,
    /// Top beams of the first watermark event (natural or forced).
    pub beams: Vec<ScoredWatermark>,
    pub run_lengths: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProviderReport {
    pub provider: ProviderId,
    pub n_trials: usize,
    pub n_watermarked_naturally: usize,
    pub n_forced: usize,
    pub matches_per_k: Vec<usize>,
    pub accuracy_per_k: Vec<f64>,
    pub misclassified: usize,
    pub incorrect_watermark: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetStats {
    pub n: usize,
    pub matches: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributionReport {
    pub k_list: Vec<usize>,
    pub providers: Vec<ProviderReport>,
    pub overall_accuracy_per_k: Vec<f64>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// k=1 accuracy over trials whose watermark was naturally generated.
    pub natural: SubsetStats,
    /// k=1 accuracy over trials that needed enforced generation.
    pub forced: SubsetStats,
}

impl AttributionReport {
    pub fn accuracy_at(&self, k: usize) -> Option<f64> {
        self.k_list
            .iter()
            .position(|&x| x == k)
            .map(|i| self.overall_accuracy_per_k[i])
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serialization");
        out.push('\n');
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(Error::io(path))
    }

    pub fn load(path: &Path) -> Result<AttributionReport> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        serde_json::from_str(&text).map_err(|e| Error::format("report", e.to_string()))
    }
}

/// Correctness of one trial at top-k: k=1 uses the unanimous-match decision;
/// larger k asks whether the true watermark appears among the first k beams.
fn hit_at_k(outcome: &TrialOutcome, truth: &Watermark, k: usize) -> bool {
    if k == 1 {
        outcome.decision.as_ref() == Some(&outcome.provider)
    } else {
        outcome.beams.iter().take(k).any(|b| &b.codes == truth)
    }
}

/// Aggregates outcomes into the report. Pure; the metric fixtures run
/// against this directly.
pub fn assemble_report(
    outcomes: &[TrialOutcome],
    registry: &Registry,
    k_list: &[usize],
) -> AttributionReport {
    let providers: Vec<ProviderId> = registry
        .providers()
        .iter()
        .filter(|p| outcomes.iter().any(|o| &o.provider == *p))
        .cloned()
        .collect();

    let mut reports = Vec::with_capacity(providers.len());
    let mut attributed_to = vec![0usize; providers.len()];
    let mut correct = vec![0usize; providers.len()];
    for o in outcomes {
        if let Some(d) = &o.decision {
            if let Some(i) = providers.iter().position(|p| p == d) {
                attributed_to[i] += 1;
                if d == &o.provider {
                    correct[i] += 1;
                }
            }
        }
    }

    let mut overall_matches = vec![0usize; k_list.len()];
    let mut natural = SubsetStats { n: 0, matches: 0, accuracy: 0.0 };
    let mut forced = SubsetStats { n: 0, matches: 0, accuracy: 0.0 };
    for provider in providers.iter() {
        let truth = registry.watermark_of(provider).expect("provider bound").clone();
        let mine: Vec<&TrialOutcome> = outcomes.iter().filter(|o| &o.provider == provider).collect();
        let mut matches_per_k = vec![0usize; k_list.len()];
        let mut misclassified = 0usize;
        let mut incorrect = 0usize;
        let mut n_natural = 0usize;
        for o in &mine {
            for (ki, &k) in k_list.iter().enumerate() {
                if hit_at_k(o, &truth, k) {
                    matches_per_k[ki] += 1;
                    overall_matches[ki] += 1;
                }
            }
            let hit1 = hit_at_k(o, &truth, 1);
            if o.natural {
                n_natural += 1;
                natural.n += 1;
                natural.matches += usize::from(hit1);
            } else {
                forced.n += 1;
                forced.matches += usize::from(hit1);
            }
            if !hit1 {
                if o.all_bound {
                    misclassified += 1;
                } else {
                    incorrect += 1;
                }
            }
        }
        let n = mine.len();
        reports.push(ProviderReport {
            provider: provider.clone(),
            n_trials: n,
            n_watermarked_naturally: n_natural,
            n_forced: n - n_natural,
            accuracy_per_k: matches_per_k.iter().map(|&m| m as f64 / n as f64).collect(),
            matches_per_k,
            misclassified,
            incorrect_watermark: incorrect,
        });
    }

    let total = outcomes.len().max(1);
    let precision: Vec<f64> = providers
        .iter()
        .enumerate()
        .map(|(i, _)| {
            if attributed_to[i] == 0 {
                0.0
            } else {
                correct[i] as f64 / attributed_to[i] as f64
            }
        })
        .collect();
    let recall: Vec<f64> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| correct[i] as f64 / r.n_trials.max(1) as f64)
        .collect();
    let macro_precision = precision.iter().sum::<f64>() / precision.len().max(1) as f64;
    let macro_recall = recall.iter().sum::<f64>() / recall.len().max(1) as f64;
    let macro_f1 = if macro_precision + macro_recall > 0.0 {
        2.0 * macro_precision * macro_recall / (macro_precision + macro_recall)
    } else {
        0.0
    };
    natural.accuracy = if natural.n > 0 { natural.matches as f64 / natural.n as f64 } else { 0.0 };
    forced.accuracy = if forced.n > 0 { forced.matches as f64 / forced.n as f64 } else { 0.0 };

    AttributionReport {
        k_list: k_list.to_vec(),
        providers: reports,
        overall_accuracy_per_k: overall_matches.iter().map(|&m| m as f64 / total as f64).collect(),
        macro_precision,
        macro_recall,
        macro_f1,
        natural,
        forced,
    }
}

fn trial_gen_config(base: &GenConfig, spec: &TrialSpec, index: usize) -> GenConfig {
    GenConfig {
        seed: seed_for(base.seed, &["trial", &index.to_string()]),
        max_new_tokens: spec.gen_tokens,
        top_k_watermarks: spec.max_k(),
        beam_size: base.beam_size.max(spec.max_k()),
        ..base.clone()
    }
}

fn resolve_outcome(
    registry: &Registry,
    provider: &ProviderId,
    natural_runs: Vec<Watermark>,
    beams: Vec<ScoredWatermark>,
    natural: bool,
) -> TrialOutcome {
    let (decision, all_bound) = if natural {
        let m = registry.match_generated(&natural_runs, MatchMode::Exact);
        let bound = natural_runs
            .iter()
            .all(|w| registry.provider_of(w, MatchMode::Exact).is_some());
        (m.provider, bound)
    } else {
        let best = &beams[0].codes;
        let p = registry.provider_of(best, MatchMode::Exact).cloned();
        let bound = p.is_some();
        (p, bound)
    };
    TrialOutcome {
        provider: provider.clone(),
        natural,
        decision,
        all_bound,
        run_lengths: natural_runs.iter().map(|w| w.len()).collect(),
        beams,
    }
}

fn attribution_outcome(
    model: &WasaModel<f32>,
    vocab: &Vocab,
    registry: &Registry,
    trial: &Trial,
    cfg: &GenConfig,
    spec: &TrialSpec,
) -> Result<(TrialOutcome, String)> {
    let m = registry.length();
    let out = generate(model, vocab, &trial.prompt, m, cfg)?;
    let (_, runs) = strip_watermarks(&out.text, registry.alphabet());
    if runs.is_empty() && spec.enforce {
        // force a watermark from the full generated sentence
        let ids = vocab.encode(&out.text).ids;
        let beams = enforce_watermark_topk_ids(model, vocab, &ids, m, cfg.beam_size, spec.max_k())?;
        return Ok((
            resolve_outcome(registry, &trial.provider, Vec::new(), beams, false),
            out.text,
        ));
    }
    let watermarks: Vec<Watermark> = runs.iter().map(|r| r.watermark()).collect();
    let beams = out.runs_topk.into_iter().next().unwrap_or_default();
    Ok((
        resolve_outcome(registry, &trial.provider, watermarks, beams, true),
        out.text,
    ))
}

/// Runs every trial (in parallel, with per-trial derived seeds), decodes or
/// enforces watermarks, and assembles the report.
pub fn run_attribution(
    model: &WasaModel<f32>,
    vocab: &Vocab,
    registry: &Registry,
    trials: &[Trial],
    gen_config: &GenConfig,
    spec: &TrialSpec,
) -> Result<AttributionReport> {
    Ok(run_attribution_outcomes(model, vocab, registry, trials, gen_config, spec)?.1)
}

/// Like [`run_attribution`], also returning the per-trial outcomes.
pub fn run_attribution_outcomes(
    model: &WasaModel<f32>,
    vocab: &Vocab,
    registry: &Registry,
    trials: &[Trial],
    gen_config: &GenConfig,
    spec: &TrialSpec,
) -> Result<(Vec<TrialOutcome>, AttributionReport)> {
    spec.validate()?;
    let outcomes: Vec<Result<(TrialOutcome, String)>> = trials
        .par_iter()
        .enumerate()
        .map(|(i, trial)| {
            let cfg = trial_gen_config(gen_config, spec, i);
            attribution_outcome(model, vocab, registry, trial, &cfg, spec)
        })
        .collect();
    let mut resolved = Vec::with_capacity(trials.len());
    for o in outcomes {
        resolved.push(o?.0);
    }
    let report = assemble_report(&resolved, registry, &spec.k_list);
    Ok((resolved, report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProvenanceRow {
    pub provider: ProviderId,
    pub n_texts: usize,
    pub n_match: usize,
    pub in_training: bool,
}

/// Data-provenance check: each provider prompts the model with its own
/// (unwatermarked) texts and counts exact regenerations of its own
/// watermark. Texts beyond `max_texts` per provider are ignored.
pub fn provenance_check(
    model: &WasaModel<f32>,
    vocab: &Vocab,
    registry: &Registry,
    provider_texts: &[(ProviderId, Vec<String>)],
    max_texts: usize,
    beam_size: usize,
) -> Result<Vec<ProvenanceRow>> {
    let m = registry.length();
    let mut rows = Vec::with_capacity(provider_texts.len());
    for (provider, texts) in provider_texts {
        let own = registry.watermark_of(provider)?.clone();
        let texts: Vec<&String> = texts.iter().take(max_texts).collect();
        let matches: Vec<Result<bool>> = texts
            .par_iter()
            .map(|text| {
                let (clean, _) = strip_watermarks(text, registry.alphabet());
                let ids = vocab.encode(&clean).ids;
                let beams = enforce_watermark_topk_ids(model, vocab, &ids, m, beam_size, 1)?;
                Ok(beams[0].codes == own)
            })
            .collect();
        let mut n_match = 0usize;
        for r in matches {
            n_match += usize::from(r?);
        }
        rows.push(ProvenanceRow {
            provider: provider.clone(),
            n_texts: texts.len(),
            n_match,
            in_training: n_match > 0,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: String,
    pub mode: String,
    pub target: AttackTarget,
    pub strength: f64,
    pub report: AttributionReport,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// CSV with one line per (attack, strength, k).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("attack,mode,target,strength,k,accuracy\n");
        for row in &self.rows {
            for (ki, &k) in row.report.k_list.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{:.6}\n",
                    row.family,
                    row.mode,
                    match row.target {
                        AttackTarget::GeneratedText => "generated_text",
                        AttackTarget::Prompt => "prompt",
                    },
                    row.strength,
                    k,
                    row.report.overall_accuracy_per_k[ki],
                ));
            }
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(Error::io(path))
    }
}

/// Attribution of one attacked generated text through the regeneration
/// defense: strip, re-derive the watermark from the cleaned text, and match
/// it exactly.
fn regenerated_outcome(
    model: &WasaModel<f32>,
    vocab: &Vocab,
    registry: &Registry,
    provider: &ProviderId,
    attacked_text: &str,
    beam_size: usize,
    max_k: usize,
) -> Result<TrialOutcome> {
    let (clean, _) = strip_watermarks(attacked_text, registry.alphabet());
    let ids = vocab.encode(&clean).ids;
    let beams = enforce_watermark_topk_ids(model, vocab, &ids, registry.length(), beam_size, max_k)?;
    Ok(resolve_outcome(registry, provider, Vec::new(), beams, false))
}

/// Sweeps attacks over the attribution benchmark. Generated-text attacks
/// share one set of baseline generations: generate, attack the text, then
/// attribute through the regeneration defense (the 0%-strength row also uses
/// regeneration). Prompt attacks perturb the prompt and rerun the normal
/// attribution pipeline.
pub fn robustness_sweep(
    model: &WasaModel<f32>,
    vocab: &Vocab,
    registry: &Registry,
    trials: &[Trial],
    attack_specs: &[AttackSpec],
    lexicon: &Lexicon,
    gen_config: &GenConfig,
    spec: &TrialSpec,
) -> Result<SweepTable> {
    spec.validate()?;
    let needs_generations = attack_specs.iter().any(|a| a.target == AttackTarget::GeneratedText);
    let baseline: Vec<(TrialOutcome, String)> = if needs_generations {
        let results: Vec<Result<(TrialOutcome, String)>> = trials
            .par_iter()
            .enumerate()
            .map(|(i, trial)| {
                let cfg = trial_gen_config(gen_config, spec, i);
                attribution_outcome(model, vocab, registry, trial, &cfg, spec)
            })
            .collect();
        let mut v = Vec::with_capacity(trials.len());
        for r in results {
            v.push(r?);
        }
        v
    } else {
        Vec::new()
    };

    let mut table = SweepTable::default();
    for attack in attack_specs {
        let kind = attack.kind()?;
        let outcomes: Vec<TrialOutcome> = match attack.target {
            AttackTarget::GeneratedText => {
                let results: Vec<Result<TrialOutcome>> = baseline
                    .par_iter()
                    .enumerate()
                    .map(|(i, (_, text))| {
                        let seed = seed_for(attack.seed, &["sweep", &i.to_string()]);
                        let attacked = if attack.strength == 0.0 && kind.family() != "watermark" {
                            text.clone()
                        } else {
                            apply_attack(text, kind, attack.strength, lexicon, seed, registry.alphabet())?
                        };
                        regenerated_outcome(
                            model,
                            vocab,
                            registry,
                            &trials[i].provider,
                            &attacked,
                            gen_config.beam_size.max(spec.max_k()),
                            spec.max_k(),
                        )
                    })
                    .collect();
                let mut v = Vec::with_capacity(trials.len());
                for r in results {
                    v.push(r?);
                }
                v
            }
            AttackTarget::Prompt => {
                let results: Vec<Result<TrialOutcome>> = trials
                    .par_iter()
                    .enumerate()
                    .map(|(i, trial)| {
                        let seed = seed_for(attack.seed, &["sweep-prompt", &i.to_string()]);
                        let prompt = if attack.strength == 0.0 {
                            trial.prompt.clone()
                        } else {
                            apply_attack(&trial.prompt, kind, attack.strength, lexicon, seed, registry.alphabet())?
                        };
                        let attacked = Trial {
                            provider: trial.provider.clone(),
                            prompt,
                        };
                        let cfg = trial_gen_config(gen_config, spec, i);
                        attribution_outcome(model, vocab, registry, &attacked, &cfg, spec).map(|(o, _)| o)
                    })
                    .collect();
                let mut v = Vec::with_capacity(trials.len());
                for r in results {
                    v.push(r?);
                }
                v
            }
        };
        table.rows.push(SweepRow {
            family: attack.family.clone(),
            mode: match &attack.submode {
                Some(s) => format!("{}-{s}", attack.mode),
                None => attack.mode.clone(),
            },
            target: attack.target,
            strength: attack.strength,
            report: assemble_report(&outcomes, registry, &spec.k_list),
        });
    }
    Ok(table)
}

/// Unique word n-grams across all texts divided by total n-grams, after
/// stripping watermark codepoints; 0 when no n-grams exist.
pub fn distinct_n(texts: &[String], n: usize, alphabet: &crate::registry::WatermarkAlphabet) -> f64 {
    let mut seen = std::collections::HashSet::new();
    let mut total = 0usize;
    for text in texts {
        let (clean, _) = strip_watermarks(text, alphabet);
        let words = crate::marking::terms(&clean);
        if words.len() < n {
            continue;
        }
        for gram in words.windows(n) {
            seen.insert(gram.join(" "));
            total += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        seen.len() as f64 / total as f64
    }
}
