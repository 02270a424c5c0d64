//! `wasa`: registry creation, corpus marking, training, generation,
//! attribution, attacks, and evaluation from one binary.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

mod args;
mod commands;
mod config;

use clap::Parser;

use args::{Cli, Command};
use config::{resolve_seed, ProjectConfig};
use wasa_core::Error as CoreError;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message (including --help/--version)
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(&cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(classify(&e));
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = ProjectConfig::load_opt(cli.config.as_deref())?;
    let seed = resolve_seed(cli.seed, &cfg)?;
    match &cli.command {
        Command::Registry(a) => commands::cmd_registry(a, &cfg, seed),
        Command::Mark(a) => commands::cmd_mark(a, &cfg, seed),
        Command::Vocab(a) => commands::cmd_vocab(a, &cfg),
        Command::Train(a) => commands::cmd_train(a, &cfg, seed),
        Command::Generate(a) => commands::cmd_generate(a, &cfg, seed),
        Command::Attribute(a) => commands::cmd_attribute(a, &cfg),
        Command::Attack(a) => commands::cmd_attack(a, &cfg, seed),
        Command::Evaluate(a) => commands::cmd_evaluate(a, &cfg, seed),
        Command::Provenance(a) => commands::cmd_provenance(a, &cfg),
        Command::Baseline(a) => commands::cmd_baseline(a, &cfg),
        Command::Synthbench(a) => commands::cmd_synthbench(a, seed),
    }
}

/// Usage errors are misconfigurations the caller can fix on the command
/// line; data errors are problems with the referenced files or corpora;
/// everything else is internal.
fn classify(e: &anyhow::Error) -> i32 {
    if let Some(core) = e.downcast_ref::<CoreError>() {
        return match core {
            CoreError::InvalidConfig(_) => 1,
            CoreError::ShapeMismatch(_) | CoreError::NonFiniteLoss { .. } => 3,
            _ => 2,
        };
    }
    // anyhow context chains around file/parse problems
    for cause in e.chain() {
        if cause.downcast_ref::<std::io::Error>().is_some()
            || cause.downcast_ref::<serde_json::Error>().is_some()
        {
            return 2;
        }
    }
    if e.to_string().starts_with("missing --") || e.to_string().contains("is required") {
        return 1;
    }
    2
}
