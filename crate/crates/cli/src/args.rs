//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "wasa",
    about = "Invisible-watermark source attribution for language-model training data",
    version
)]
pub struct Cli {
    /// Project config file (TOML or JSON); flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; falls back to the config file, then WASA_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a watermark registry binding one watermark per provider.
    Registry(RegistryArgs),
    /// Embed provider watermarks into a corpus.
    Mark(MarkArgs),
    /// Build the word vocabulary from a corpus.
    Vocab(VocabArgs),
    /// Train the watermark-aware model on a marked corpus.
    Train(TrainArgs),
    /// Generate text with embedded watermarks from a prompt.
    Generate(GenerateArgs),
    /// Attribute a text file to its source provider.
    Attribute(AttributeArgs),
    /// Apply an adversarial attack to a text file.
    Attack(AttackArgs),
    /// Run the source-attribution evaluation protocol.
    Evaluate(EvaluateArgs),
    /// Check data provenance for providers' own texts.
    Provenance(ProvenanceArgs),
    /// BM25 retrieval baseline: index a corpus or rank providers.
    #[command(subcommand)]
    Baseline(BaselineCmd),
    /// Generate the deterministic synthetic benchmark corpus.
    Synthbench(SynthbenchArgs),
}

#[derive(Debug, Args)]
pub struct RegistryArgs {
    /// Corpus whose provider names get watermarks (directory or JSONL).
    #[arg(long, required_unless_present = "names")]
    pub corpus: Option<PathBuf>,
    /// Comma-separated provider names, instead of reading a corpus.
    #[arg(long, value_delimiter = ',')]
    pub names: Option<Vec<String>>,
    /// Output registry file.
    #[arg(long)]
    pub registry: PathBuf,
    /// Watermark length.
    #[arg(long, default_value_t = 10)]
    pub length: usize,
    /// Minimum pairwise Hamming distance between watermarks.
    #[arg(long, default_value_t = 3)]
    pub min_hamming: usize,
    /// Alphabet size: 6 (default codepoints) or 2 (reduced).
    #[arg(long, default_value_t = 6)]
    pub alphabet_size: usize,
}

#[derive(Debug, Args)]
pub struct MarkArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Fraction of sentences to watermark, in (0, 1].
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Sentence selection strategy: tfidf or random.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Output directory for the marked corpus and manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Word vocabulary size including the four specials.
    #[arg(long)]
    pub target_v: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Marked corpus directory (with manifest.jsonl).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-step loss log (JSONL), if wanted.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub grad_accumulation: Option<usize>,
    #[arg(long)]
    pub embed: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long)]
    pub frozen_layers: Option<usize>,
    /// Print a progress line every N steps.
    #[arg(long)]
    pub progress_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Prompt text.
    #[arg(long, required_unless_present = "prompt_file")]
    pub prompt: Option<String>,
    #[arg(long)]
    pub prompt_file: Option<PathBuf>,
    #[arg(long)]
    pub max_new_tokens: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub top_k_words: Option<usize>,
    #[arg(long)]
    pub beam_size: Option<usize>,
    #[arg(long)]
    pub top_k_watermarks: Option<usize>,
    /// Print the raw generated text (invisible codepoints included) instead
    /// of JSON; meant for piping into files.
    #[arg(long)]
    pub raw: bool,
    /// Write the output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AttributeArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Text file to attribute.
    #[arg(long)]
    pub text: PathBuf,
    /// Matching mode: exact or soft.
    #[arg(long, default_value = "exact")]
    pub mode: String,
    /// Regenerate a watermark when the text carries none.
    #[arg(long)]
    pub enforce: bool,
    #[arg(long)]
    pub beam_size: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// Input text file.
    #[arg(long, name = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Attack spec as inline JSON or @file.json.
    #[arg(long)]
    pub attack: String,
    /// Synonym/fill lexicon (word<TAB>synonym[,synonym...]).
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub registry: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Marked corpus directory (with manifest.jsonl).
    #[arg(long)]
    pub marked: PathBuf,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub prompt_chars: Option<usize>,
    #[arg(long)]
    pub gen_tokens: Option<usize>,
    /// Comma-separated top-k list, e.g. 1,3,5.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Disable enforced watermark generation for trials without one.
    #[arg(long)]
    pub no_enforce: bool,
    /// Attribution report output (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Robustness sweep: JSON file with a list of attack specs.
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    /// CSV output for the sweep (attack, mode, target, strength, k, accuracy).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Unwatermarked held-out corpus for text-quality metrics.
    #[arg(long)]
    pub eval_corpus: Option<PathBuf>,
    /// Where to write perplexity and distinct-n (JSON).
    #[arg(long)]
    pub quality_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProvenanceArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Corpus of provider texts to check (directory or JSONL).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Texts checked per provider.
    #[arg(long, default_value_t = 50)]
    pub max_texts: usize,
    #[arg(long)]
    pub beam_size: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum BaselineCmd {
    /// Index an unwatermarked corpus.
    Build(BaselineBuildArgs),
    /// Rank providers for a query text.
    Query(BaselineQueryArgs),
}

#[derive(Debug, Args)]
pub struct BaselineBuildArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselineQueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub text: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthbenchArgs {
    #[arg(long, default_value_t = 5)]
    pub providers: usize,
    #[arg(long, default_value_t = 0)]
    pub holdout: usize,
    /// Keyword overlap between providers in [0, 1]; 0 = disjoint topics.
    #[arg(long, default_value_t = 0.0)]
    pub overlap: f64,
    #[arg(long, default_value_t = 60)]
    pub docs: usize,
    #[arg(long, default_value_t = 3)]
    pub sentences: usize,
    #[arg(long, default_value_t = 6)]
    pub eval_docs: usize,
    #[arg(long)]
    pub out: PathBuf,
}
