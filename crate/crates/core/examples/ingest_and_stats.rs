//! Write a synthetic BRAT corpus, ingest it to JSONL and print its statistics.
//!
//! `cargo run --example ingest_and_stats -- [out_dir]`

use std::path::PathBuf;

use story_events::cli::{cmd_ingest, cmd_stats, read_jsonl_corpus};
use story_events::corpus::synthetic::synthetic_corpus;
use story_events::corpus::write_brat_dir;

fn main() -> story_events::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs/ingest-demo"));
    let raw = out.join("raw");
    write_brat_dir(&synthetic_corpus(12, 6, 1).stories, &raw)?;

    let summary = cmd_ingest(&raw, &out)?;
    println!(
        "ingested {} stories, {} sentences, {} mentions ({} warnings)",
        summary.stories,
        summary.sentences,
        summary.mentions,
        summary.warnings.len()
    );

    let corpus = read_jsonl_corpus(&summary.jsonl)?;
    let stats = cmd_stats(&corpus, &out)?;
    println!("{} tokens, {} sentences, {} events", stats.total_tokens, stats.total_sentences, stats.total_events);
    for (class, n) in &stats.per_class_counts {
        println!("  {:<4} {n}", class.code());
    }
    println!("tables in {}", out.join("reports").display());
    Ok(())
}
