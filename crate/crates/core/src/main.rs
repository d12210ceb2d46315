use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use story_events::cli::{
    cmd_augment, cmd_eval, cmd_ingest, cmd_predict, cmd_stats, cmd_sweep, cmd_train, cmd_validate, load_corpus,
    AugmentOutcome, AugmentStep, RunConfig,
};
use story_events::Result;

#[derive(Parser)]
#[command(name = "story-events", version, about = "Event trigger detection and classification for short stories")]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// detect | classify
    #[arg(long, global = true)]
    mode: Option<String>,
    /// span | span+class, optionally suffixed with ~overlap
    #[arg(long, global = true)]
    criterion: Option<String>,
    /// Use the toy backbone.
    #[arg(long, global = true)]
    toy: bool,
    /// Override any config key (`--set prompt.epochs=20`).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, validate and align a BRAT directory into JSONL.
    Ingest {
        raw_dir: PathBuf,
    },
    /// Corpus statistics and trigger tables.
    Stats,
    /// Report every annotation problem in a BRAT directory.
    Validate {
        dir: PathBuf,
    },
    Train,
    /// Score the checkpoint on the test split.
    Eval,
    /// Predict events for a `.txt` file or a directory of them.
    Predict {
        input: PathBuf,
    },
    /// Synthetic labelling and review loop.
    Augment {
        #[arg(value_parser = ["label", "export", "merge", "benchmark"])]
        step: String,
    },
    /// Train once per value of a config key.
    Sweep {
        #[arg(long)]
        key: Option<String>,
        /// Comma-separated values.
        #[arg(long)]
        values: Option<String>,
    },
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for pair in &cli.overrides {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| story_events::Error::Config(format!("--set expects KEY=VALUE, got {pair:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(mode) = &cli.mode {
        cfg.set("mode", mode)?;
    }
    if let Some(c) = &cli.criterion {
        cfg.set("criterion", c)?;
    }
    if cli.toy {
        cfg.set("toy", "true")?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = build_config(&cli)?;
    match &cli.command {
        Command::Ingest { raw_dir } => {
            let s = cmd_ingest(raw_dir, &cfg.out)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{} stories, {} sentences, {} mentions -> {}",
                s.stories,
                s.sentences,
                s.mentions,
                s.jsonl.display()
            );
        }
        Command::Stats => {
            let stats = cmd_stats(&load_corpus(&cfg)?, &cfg.out)?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
        }
        Command::Validate { dir } => {
            let problems = cmd_validate(dir)?;
            for p in &problems {
                println!("{p}");
            }
            if !problems.is_empty() {
                eprintln!("{} problem(s)", problems.len());
                return Ok(false);
            }
        }
        Command::Train => {
            let t = cmd_train(&cfg)?;
            println!(
                "final loss {:.4}, best dev {:?} at epoch {:?} -> {}",
                t.log.epoch_losses.last().copied().unwrap_or(f64::NAN),
                t.log.best_dev_score,
                t.log.best_epoch,
                t.checkpoint.display()
            );
        }
        Command::Eval => {
            let e = cmd_eval(&cfg)?;
            println!(
                "detection F1 {:.4}, classification macro-F1 {:.4}, {} F1 {:.4}",
                e.detection.detection.f1, e.classification.macro_f1, e.criterion, e.configured.overall.f1
            );
        }
        Command::Predict { input } => {
            let p = cmd_predict(&cfg, input)?;
            println!("{} stories, {} mentions -> {}", p.stories, p.mentions, p.jsonl.display());
        }
        Command::Augment { step } => match cmd_augment(&cfg, step.parse::<AugmentStep>()?)? {
            AugmentOutcome::Labelled { stories, mentions, failures, jsonl } => {
                for (id, why) in &failures {
                    eprintln!("failed: {id}: {why}");
                }
                println!("{stories} stories, {mentions} mentions -> {}", jsonl.display());
            }
            AugmentOutcome::Exported(batch) => println!("exported {} stories for review", batch.story_ids.len()),
            AugmentOutcome::Merged { reviewed, jsonl } => {
                println!("{reviewed} reviewed stories -> {}", jsonl.display())
            }
            AugmentOutcome::Benchmarked(report) => {
                print!("{}\n{}", report.detection_table(), report.classification_table())
            }
        },
        Command::Sweep { key, values } => {
            let key = key.clone().unwrap_or_else(|| cfg.sweep.key.clone());
            let values: Vec<String> = match values {
                Some(v) => v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
                None => cfg.sweep.value_list(),
            };
            if key.is_empty() {
                return Err(story_events::Error::Config("no sweep key (use --key or `sweep.key`)".into()));
            }
            for row in cmd_sweep(&cfg, &key, &values)? {
                println!(
                    "{key} = {:<10} macro-F1 {:.4}  detection F1 {:.4}",
                    row.value, row.macro_f1, row.detection_f1
                );
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
