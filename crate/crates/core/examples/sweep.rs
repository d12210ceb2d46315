//! Sweep the prompt model's learning rate on a synthetic corpus. Each value
//! gets its own run directory; the summary lands in `reports/sweep.csv`.
//!
//! `cargo run --release --example sweep -- [values]`, e.g. `-- 1e-4,5e-4,1e-3`.

use std::path::PathBuf;

use story_events::cli::{cmd_sweep, RunConfig};
use story_events::corpus::synthetic::synthetic_corpus;
use story_events::corpus::{split_corpus, write_brat_dir, write_split_manifest};

fn main() -> story_events::Result<()> {
    let values = std::env::args().nth(1).unwrap_or_else(|| "1e-4,5e-4,1e-3".into());
    let out = PathBuf::from("runs/sweep-demo");

    let corpus = synthetic_corpus(10, 5, 21);
    let ids: Vec<String> = corpus.stories.iter().map(|s| s.id.clone()).collect();
    let corpus = split_corpus(corpus, &ids[..6], &ids[6..8], &ids[8..])?;
    let data = out.join("data");
    write_brat_dir(&corpus.stories, &data)?;
    write_split_manifest(&corpus, &data)?;

    let mut cfg = RunConfig { corpus: Some(data), out: out.clone(), ..RunConfig::default() };
    cfg.set("toy", "true")?;
    cfg.set("prompt.epochs", "40")?;

    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
    println!("{:<10} {:>9} {:>12} {:>6}", "lr", "macro-F1", "detect F1", "best");
    for row in cmd_sweep(&cfg, "prompt.learning_rate", &values)? {
        println!(
            "{:<10} {:>9.4} {:>12.4} {:>6}",
            row.value,
            row.macro_f1,
            row.detection_f1,
            row.best_epoch.map_or("-".into(), |e| e.to_string())
        );
    }
    Ok(())
}
