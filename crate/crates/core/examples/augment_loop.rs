//! The synthetic-data loop end to end: train on a small labelled corpus, label
//! unannotated stories with it, export them for review, merge the reviewed
//! copies back and compare models trained with and without them.
//!
//! `cargo run --release --example augment_loop -- [out_dir]`

use std::path::{Path, PathBuf};

use story_events::cli::{cmd_augment, cmd_train, AugmentOutcome, AugmentStep, RunConfig};
use story_events::corpus::synthetic::{synthetic_corpus, synthetic_unlabeled};
use story_events::corpus::{split_corpus, write_brat_dir, write_split_manifest};

const CONFIG: &str = "
model = prompt
toy = true
seed = 7
prompt.epochs = 15
prompt.learning_rate = 1e-3
augment.sample_sizes = 4,8
";

fn main() -> story_events::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs/augment-demo"));

    let corpus = synthetic_corpus(15, 5, 11);
    let ids: Vec<String> = corpus.stories.iter().map(|s| s.id.clone()).collect();
    let corpus = split_corpus(corpus, &ids[..9], &ids[9..12], &ids[12..])?;
    let labelled = out.join("labelled");
    write_brat_dir(&corpus.stories, &labelled)?;
    write_split_manifest(&corpus, &labelled)?;
    let unlabeled = out.join("unlabeled");
    write_brat_dir(&synthetic_unlabeled(8, 5, 12), &unlabeled)?;

    let mut cfg = RunConfig::default();
    cfg.apply_text(CONFIG, Path::new("augment_loop.rs"))?;
    cfg.corpus = Some(labelled);
    cfg.out = out.join("run");
    cfg.set("augment.unlabeled", unlabeled.to_str().unwrap())?;
    cmd_train(&cfg)?;

    for step in [AugmentStep::Label, AugmentStep::Export, AugmentStep::Merge, AugmentStep::Benchmark] {
        match cmd_augment(&cfg, step)? {
            AugmentOutcome::Labelled { stories, mentions, failures, .. } => {
                println!("labelled {stories} stories with {mentions} mentions, {} failures", failures.len())
            }
            AugmentOutcome::Exported(batch) => {
                // a reviewer would edit the exported .ann files here
                println!("exported {} stories for review", batch.story_ids.len())
            }
            AugmentOutcome::Merged { reviewed, .. } => println!("merged {reviewed} reviewed stories"),
            AugmentOutcome::Benchmarked(report) => {
                println!("\n{}\n{}", report.detection_table(), report.classification_table())
            }
        }
    }
    Ok(())
}
