//! Evaluation-side commands: evaluate, provenance, baseline, attack.

use anyhow::{Context, Result};
use serde_json::json;

use super::{check_artifacts, emit, load_model, load_registry, load_vocab, required_path};
use crate::args::{AttackArgs, BaselineBuildArgs, BaselineCmd, BaselineQueryArgs, EvaluateArgs, ProvenanceArgs};
use crate::config::{pick, ProjectConfig};
use wasa_core::attacks::{apply_attack, AttackSpec, Lexicon};
use wasa_core::bm25::Bm25Index;
use wasa_core::corpus::load_corpus;
use wasa_core::eval::{build_trials, distinct_n, provenance_check, robustness_sweep, run_attribution, TrialSpec};
use wasa_core::generator::{generate, GenConfig};
use wasa_core::marking::load_marked_corpus;
use wasa_core::registry::WatermarkAlphabet;
use wasa_core::seed::seed_for;
use wasa_core::tokenizer::corpus_blocks;
use wasa_core::trainer::perplexity;

fn trial_spec(args: &EvaluateArgs, cfg: &ProjectConfig) -> TrialSpec {
    let d = TrialSpec::default();
    TrialSpec {
        trials_per_provider: pick(args.trials, cfg.trials.trials_per_provider, d.trials_per_provider),
        prompt_chars: pick(args.prompt_chars, cfg.trials.prompt_chars, d.prompt_chars),
        gen_tokens: pick(args.gen_tokens, cfg.trials.gen_tokens, d.gen_tokens),
        k_list: pick(args.k.clone(), cfg.trials.k_list.clone(), d.k_list),
        enforce: if args.no_enforce { false } else { cfg.trials.enforce.unwrap_or(true) },
    }
}

fn gen_defaults(cfg: &ProjectConfig, seed: u64) -> GenConfig {
    let d = GenConfig::default();
    GenConfig {
        top_k_words: cfg.gen.top_k_words.unwrap_or(d.top_k_words),
        temperature: cfg.gen.temperature.unwrap_or(d.temperature),
        repetition_penalty: cfg.gen.repetition_penalty.unwrap_or(d.repetition_penalty),
        length_penalty: cfg.gen.length_penalty.unwrap_or(d.length_penalty),
        max_new_tokens: cfg.gen.max_new_tokens.unwrap_or(d.max_new_tokens),
        beam_size: cfg.gen.beam_size.unwrap_or(d.beam_size),
        top_k_watermarks: cfg.gen.top_k_watermarks.unwrap_or(d.top_k_watermarks),
        seed,
    }
}

pub fn cmd_evaluate(args: &EvaluateArgs, cfg: &ProjectConfig, seed: u64) -> Result<()> {
    let marked = load_marked_corpus(&args.marked)?;
    let model = load_model(args.checkpoint.as_ref(), cfg)?;
    let vocab = load_vocab(args.vocab.as_ref(), cfg)?;
    let registry = load_registry(args.registry.as_ref(), cfg)?;
    check_artifacts(&model, &vocab, &registry)?;

    let spec = trial_spec(args, cfg);
    let gen = gen_defaults(cfg, seed);
    let trials = build_trials(&marked, &registry, &spec)?;
    let report = run_attribution(&model, &vocab, &registry, &trials, &gen, &spec)?;
    report.save(&args.out)?;
    eprintln!(
        "attribution over {} trials: top-{} accuracy {:.2}%, macro F1 {:.3}; report at {}",
        trials.len(),
        report.k_list[0],
        report.overall_accuracy_per_k[0] * 100.0,
        report.macro_f1,
        args.out.display()
    );

    if let Some(sweep_path) = &args.sweep {
        let text = std::fs::read_to_string(sweep_path)
            .with_context(|| format!("reading sweep spec {}", sweep_path.display()))?;
        let specs: Vec<AttackSpec> = serde_json::from_str(&text)
            .with_context(|| format!("parsing sweep spec {}", sweep_path.display()))?;
        let lexicon = match &args.lexicon {
            Some(p) => Lexicon::load(p)?,
            None => Lexicon::from_words(vocab.words().iter().skip(4).cloned()),
        };
        let table = robustness_sweep(&model, &vocab, &registry, &trials, &specs, &lexicon, &gen, &spec)?;
        match &args.csv {
            Some(path) => table.save_csv(path)?,
            None => print!("{}", table.to_csv()),
        }
    }

    if let Some(quality_out) = &args.quality_out {
        let eval_path = args
            .eval_corpus
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("--quality-out needs --eval-corpus"))?;
        let eval_corpora = load_corpus(eval_path)?;
        let eval_marked = wasa_core::marking::MarkedCorpus {
            corpora: eval_corpora,
            manifest: Vec::new(),
        };
        let blocks = corpus_blocks(&eval_marked, &vocab, model.config.block_size)?;
        let ppl = perplexity(&model, &blocks)?;

        // diversity of fresh generations from the trial prompts
        let texts: Vec<String> = trials
            .iter()
            .take(50)
            .enumerate()
            .map(|(i, t)| {
                let mut g = gen.clone();
                g.seed = seed_for(seed, &["quality", &i.to_string()]);
                generate(&model, &vocab, &t.prompt, registry.length(), &g).map(|o| o.text)
            })
            .collect::<wasa_core::Result<_>>()?;
        let quality = json!({
            "perplexity": ppl,
            "distinct_1": distinct_n(&texts, 1, registry.alphabet()),
            "distinct_2": distinct_n(&texts, 2, registry.alphabet()),
            "generations_measured": texts.len(),
        });
        emit(Some(quality_out), &serde_json::to_string_pretty(&quality)?)?;
    }
    Ok(())
}

pub fn cmd_provenance(args: &ProvenanceArgs, cfg: &ProjectConfig) -> Result<()> {
    let model = load_model(args.checkpoint.as_ref(), cfg)?;
    let vocab = load_vocab(args.vocab.as_ref(), cfg)?;
    let registry = load_registry(args.registry.as_ref(), cfg)?;
    check_artifacts(&model, &vocab, &registry)?;

    let corpus_path = required_path(args.corpus.as_ref(), cfg.paths.corpus.as_ref(), "corpus")?;
    let corpora = load_corpus(&corpus_path)?;
    let texts: Vec<(wasa_core::registry::ProviderId, Vec<String>)> = corpora
        .iter()
        .map(|c| {
            let sentences: Vec<String> = c
                .documents
                .iter()
                .flat_map(|d| wasa_core::marking::segment_sentences(&d.text))
                .map(|s| s.text)
                .collect();
            (c.provider.clone(), sentences)
        })
        .collect();
    let beam = args.beam_size.unwrap_or(cfg.gen.beam_size.unwrap_or(5));
    let rows = provenance_check(&model, &vocab, &registry, &texts, args.max_texts, beam)?;
    emit(args.out.as_deref(), &serde_json::to_string_pretty(&rows)?)
}

pub fn cmd_baseline(cmd: &BaselineCmd, cfg: &ProjectConfig) -> Result<()> {
    match cmd {
        BaselineCmd::Build(args) => cmd_baseline_build(args, cfg),
        BaselineCmd::Query(args) => cmd_baseline_query(args, cfg),
    }
}

fn cmd_baseline_build(args: &BaselineBuildArgs, cfg: &ProjectConfig) -> Result<()> {
    let corpus_path = required_path(args.corpus.as_ref(), cfg.paths.corpus.as_ref(), "corpus")?;
    let corpora = load_corpus(&corpus_path)?;
    let index = Bm25Index::build(&corpora)?;
    index.save(&args.out)?;
    eprintln!("indexed {} documents at {}", index.doc_count(), args.out.display());
    Ok(())
}

fn cmd_baseline_query(args: &BaselineQueryArgs, cfg: &ProjectConfig) -> Result<()> {
    let index = Bm25Index::load(&args.index)?;
    let text = std::fs::read_to_string(&args.text)
        .with_context(|| format!("reading {}", args.text.display()))?;
    let alphabet = match &args.registry {
        Some(_) => super::load_registry(args.registry.as_ref(), cfg)?.alphabet().clone(),
        None => WatermarkAlphabet::default_six(),
    };
    let ranked = index.attribute(&text, args.k, &alphabet);
    let rendered: Vec<_> = ranked
        .iter()
        .map(|(p, s)| json!({"provider": p.as_str(), "score": s}))
        .collect();
    emit(args.out.as_deref(), &serde_json::to_string_pretty(&rendered)?)
}

pub fn cmd_attack(args: &AttackArgs, cfg: &ProjectConfig, seed: u64) -> Result<()> {
    let spec_text = match args.attack.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?,
        None => args.attack.clone(),
    };
    let mut spec: AttackSpec =
        serde_json::from_str(&spec_text).context("parsing the attack spec JSON")?;
    if spec.seed == 0 {
        spec.seed = seed;
    }
    let kind = spec.kind()?;

    let lexicon = match args.lexicon.as_ref().or(spec.lexicon.as_ref()) {
        Some(p) => Lexicon::load(p)?,
        None => Lexicon::default(),
    };
    let alphabet = match &args.registry {
        Some(_) => super::load_registry(args.registry.as_ref(), cfg)?.alphabet().clone(),
        None => WatermarkAlphabet::default_six(),
    };
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let attacked = apply_attack(&text, kind, spec.strength, &lexicon, spec.seed, &alphabet)?;
    std::fs::write(&args.out, attacked).with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!("{} applied at strength {}; output at {}", kind.label(), spec.strength, args.out.display());
    Ok(())
}
