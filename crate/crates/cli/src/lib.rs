//! Command-line front end: config loading, per-stage seeding and the six
//! subcommands. `main.rs` only parses arguments and reports errors.

pub mod commands;
pub mod config;
pub mod seen_bank;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

pub use config::RunConfig;

pub const THREADS_VAR: &str = "TAXOZSL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "taxozsl", version, about = "Taxonomy-regularized generative zero-shot learning")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed (overrides `seed` in the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides `paths.out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Override any config key, e.g. `--set train.iterations=500`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    pub sets: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic taxonomy and feature files.
    SynthData,
    /// TF-IDF semantic vectors from a directory of per-species documents.
    Featurize {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        vocab_limit: Option<usize>,
    },
    /// Train on the seen classes and write a checkpoint and log.
    Train,
    /// Zero-shot and generalized evaluation of a checkpoint.
    Eval,
    /// Ranked retrieval from synthesized unseen class centers.
    Retrieve,
    /// Compare analytic gradients with finite differences.
    Gradcheck {
        #[arg(long)]
        cases: Option<usize>,
    },
}

impl Cli {
    /// The config file with every flag applied on top.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut sets = self.sets.clone();
        if let Some(s) = self.seed {
            sets.push(format!("seed={s}"));
        }
        if let Some(o) = &self.out {
            sets.push(format!("paths.out={}", toml_string(&o.display().to_string())));
        }
        match &self.command {
            Command::Featurize { corpus, vocab_limit } => {
                if let Some(c) = corpus {
                    sets.push(format!("paths.corpus={}", toml_string(&c.display().to_string())));
                }
                if let Some(v) = vocab_limit {
                    sets.push(format!("featurize.vocab_limit={v}"));
                }
            }
            Command::Gradcheck { cases: Some(c) } => sets.push(format!("gradcheck.cases={c}")),
            _ => {}
        }
        RunConfig::load(self.config.as_deref(), &sets)
    }
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// Caps the global worker pool when `TAXOZSL_THREADS` is set.
pub fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("{THREADS_VAR}={raw:?} is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .with_context(|| format!("applying {THREADS_VAR}"))
}

/// Runs one parsed command line, printing a short summary to stdout.
pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.run_config()?;
    match &cli.command {
        Command::SynthData => {
            let s = commands::cmd_synth_data(&cfg)?;
            println!(
                "{} classes, {} samples, visual dim {}, semantic dim {}",
                s.classes, s.samples, s.visual_dim, s.semantic_dim
            );
            for f in &s.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Featurize { .. } => {
            let (path, docs) = commands::cmd_featurize(&cfg)?;
            println!("{docs} documents -> {}", path.display());
        }
        Command::Train => {
            let s = commands::cmd_train(&cfg)?;
            println!(
                "trained {} iterations on {} samples of seen classes {:?} (unseen {:?})",
                s.iterations, s.samples, s.seen, s.unseen
            );
            println!("wrote {}", s.checkpoint.display());
        }
        Command::Eval => {
            let r = commands::cmd_eval(&cfg)?;
            println!("zsl_top1 = {:.4}", r.zsl_top1);
            println!("gzsl_seen = {:.4}", r.gzsl_seen);
            println!("gzsl_unseen = {:.4}", r.gzsl_unseen);
            match r.harmonic {
                Some(h) => println!("h = {h:.4}"),
                None => println!("h = undefined"),
            }
            println!("ausuc = {:.4}", r.ausuc);
        }
        Command::Retrieve => {
            for (f, map) in commands::cmd_retrieve(&cfg)? {
                println!("{:>4}%  mAP {map:.4}", f * 100.0);
            }
        }
        Command::Gradcheck { .. } => {
            for r in commands::cmd_gradcheck(&cfg)? {
                println!("{:<30} {:.3e}  pass", r.name, r.max_relative_error);
            }
        }
    }
    Ok(())
}
