//! `storyprior` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "storyprior", version, about = "Storyboard layout prior: encode, train, sample, evaluate, render")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set train.lr_max=1e-3` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleMode {
    Unconditional,
    Synopsis,
    Instruction,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic annotation corpus (JSON lines).
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check annotation records; exits 1 when any storyboard is invalid.
    Validate {
        /// Record file (.json / .jsonl) or manifest (.txt).
        #[arg(long)]
        input: PathBuf,
    },
    /// Serialize storyboards into a token corpus, one sequence per line.
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Build a vocabulary from the encoded corpus and write it here.
        #[arg(long)]
        vocab_out: Option<PathBuf>,
        /// Per-record error report [default: <out>.errors.json].
        #[arg(long)]
        errors: Option<PathBuf>,
    },
    /// Parse sequences back into storyboards; exits 1 when any line fails.
    Decode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-line error report [default: <out>.errors.json].
        #[arg(long)]
        errors: Option<PathBuf>,
    },
    /// Train a model; writes model.ckpt and loss.csv into the output directory.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Sample sequences from a checkpoint.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long, value_enum, default_value = "unconditional")]
        mode: SampleMode,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        /// Condensed synopsis to condition on (repeatable; cycled).
        #[arg(long)]
        synopsis: Vec<String>,
        /// Instruction to condition on (repeatable; cycled).
        #[arg(long)]
        instruction: Vec<String>,
        /// Take synopses or summative annotations from these records instead.
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Compute metrics and write an EvalReport JSON.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        /// Token corpus for perplexity.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Reference records for FID and Rouge-L.
        #[arg(long)]
        references: Option<PathBuf>,
        /// Score these sequences instead of fresh samples.
        #[arg(long)]
        sequences: Option<PathBuf>,
        /// Trained feature extractor; trained on the references when absent.
        #[arg(long)]
        extractor: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render each shot of each storyboard as an SVG.
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let cfg = RunConfig::load(cli.config.as_deref())?.apply_overrides(&cli.overrides)?;
    cfg.check()?;
    match cli.command {
        Command::GenSynthetic { out, count, seed } => commands::gen_synthetic(&cfg, &out, count, seed),
        Command::Validate { input } => commands::validate(&input),
        Command::Encode {
            input,
            out,
            vocab_out,
            errors,
        } => commands::encode(&cfg, &input, &out, vocab_out.as_deref(), errors.as_deref()),
        Command::Decode { input, out, errors } => commands::decode(&cfg, &input, &out, errors.as_deref()),
        Command::Train { corpus, vocab, out_dir } => commands::train(&cfg, &corpus, &vocab, &out_dir),
        Command::Sample {
            checkpoint,
            vocab,
            mode,
            n,
            out,
            synopsis,
            instruction,
            from,
        } => commands::sample(
            &cfg,
            commands::SampleArgs {
                checkpoint: &checkpoint,
                vocab: &vocab,
                mode,
                n,
                out: &out,
                synopses: &synopsis,
                instructions: &instruction,
                from: from.as_deref(),
            },
        ),
        Command::Eval {
            checkpoint,
            vocab,
            corpus,
            references,
            sequences,
            extractor,
            out,
        } => commands::eval(
            &cfg,
            commands::EvalArgs {
                checkpoint: &checkpoint,
                vocab: &vocab,
                corpus: corpus.as_deref(),
                references: references.as_deref(),
                sequences: sequences.as_deref(),
                extractor: extractor.as_deref(),
                out: &out,
            },
        ),
        Command::Render { input, out_dir } => commands::render(&input, &out_dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
