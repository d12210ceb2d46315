//! Fit the prompt model on 50 synthetic sentences and report how many gold
//! spans it recovers on that same data.
//!
//! `cargo run --release --example prompt_overfit -- [classify|detect] [epochs] [lr]`

use std::time::Instant;

use story_events::corpus::synthetic::synthetic_corpus;
use story_events::corpus::{split_corpus, LabelMode, Split};
use story_events::promptee::{span_recovery, train_prompt_model_with, BackboneSpec, PromptModelConfig};

fn main() -> story_events::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode: LabelMode = args.first().map(|s| s.parse()).transpose()?.unwrap_or(LabelMode::Classify);
    let epochs = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let lr = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-3);

    let corpus = synthetic_corpus(10, 5, 2);
    let ids: Vec<String> = corpus.stories.iter().map(|s| s.id.clone()).collect();
    let corpus = split_corpus(corpus, &ids, &[], &[])?;
    println!("{} training sentences", corpus.sentences_in(Split::Train).count());

    let config = PromptModelConfig { mode, epochs, learning_rate: lr, ..PromptModelConfig::default() };
    let started = Instant::now();
    let (model, log) = train_prompt_model_with(&config, &corpus, &BackboneSpec::toy(), |epoch, log| {
        if (epoch + 1) % 20 == 0 {
            println!("epoch {:>4}  loss {:.4}", epoch + 1, log.epoch_losses[epoch]);
        }
    })?;
    let recovered = span_recovery(&model, corpus.sentences_in(Split::Train))?;
    println!(
        "final loss {:.4}, exact-span recovery {:.1}% after {:.1}s",
        log.epoch_losses.last().unwrap(),
        100.0 * recovered,
        started.elapsed().as_secs_f64()
    );
    Ok(())
}
