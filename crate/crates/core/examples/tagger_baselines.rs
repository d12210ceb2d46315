//! Train the BiLSTM tagger with and without a CRF output layer on a small
//! synthetic corpus and compare them on its test split.
//!
//! `cargo run --release --example tagger_baselines -- [epochs]`

use story_events::corpus::synthetic::synthetic_corpus;
use story_events::corpus::{seeded_split, split_corpus, LabelMode, Split};
use story_events::eval::MatchCriterion;
use story_events::tagging::{evaluate_tagger, train_tagger_with, TaggerConfig};

fn main() -> story_events::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let corpus = synthetic_corpus(30, 6, 8);
    let ids: Vec<String> = corpus.stories.iter().map(|s| s.id.clone()).collect();
    let (train, dev, test) = seeded_split(&ids, 18, 6, 6, 8)?;
    let corpus = split_corpus(corpus, &train, &dev, &test)?;

    for use_crf in [false, true] {
        let config = TaggerConfig {
            use_crf,
            use_char_cnn: true,
            label_scheme: LabelMode::Classify,
            hidden_dim: 32,
            word_dim: 32,
            epochs,
            ..TaggerConfig::default()
        };
        let (model, log) = train_tagger_with(&config, &corpus, |epoch, log| {
            log::debug!("epoch {epoch} loss {:.4}", log.epoch_losses[epoch]);
        })?;
        let r = evaluate_tagger(&model, &corpus, Split::Test, MatchCriterion::SPAN_AND_CLASS)?;
        println!(
            "{:<12} best dev epoch {:?}  test detection F1 {:.3}  macro-F1 {:.3}",
            if use_crf { "BiLSTM-CRF" } else { "BiLSTM" },
            log.best_epoch,
            r.detection.f1,
            r.macro_f1
        );
    }
    Ok(())
}
