//! Train the prompt model briefly on synthetic stories, then extract events
//! from a new story and show each slot's chosen span and confidence.
//!
//! `cargo run --release --example prompt_extraction -- [classify|detect] [epochs]`

use story_events::corpus::synthetic::synthetic_corpus;
use story_events::corpus::{segment_story, split_corpus, LabelMode, Story};
use story_events::promptee::{train_prompt_model, BackboneSpec, PromptModelConfig};

const STORY: &str = "Meera walked to the river. She told her brother about the old boat. \
                     He thought it was lost and laughed.";

fn main() -> story_events::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode: LabelMode = args.first().map(|s| s.parse()).transpose()?.unwrap_or(LabelMode::Classify);
    let epochs = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(60);

    let corpus = synthetic_corpus(12, 5, 3);
    let ids: Vec<String> = corpus.stories.iter().map(|s| s.id.clone()).collect();
    let corpus = split_corpus(corpus, &ids, &[], &[])?;
    let config = PromptModelConfig { mode, epochs, learning_rate: 1e-3, ..PromptModelConfig::default() };
    let (model, log) = train_prompt_model(&config, &corpus, &BackboneSpec::toy())?;
    println!("trained {epochs} epochs, final loss {:.4}", log.epoch_losses.last().unwrap());

    let story = segment_story(Story::new("demo", STORY))?;
    for sentence in &story.sentences {
        println!("\n{}", sentence.text);
        let (mentions, traces) = model.extract_events_traced(sentence)?;
        for t in &traces {
            let p = &t.prediction;
            if p.start == 0 && p.end == 0 {
                continue;
            }
            println!(
                "  slot {:?} pass {}: tokens {}..{} p_start {:.2} p_end {:.2}",
                t.label, t.pass, p.start, p.end, t.p_start[p.start], t.p_end[p.end]
            );
        }
        for m in &mentions {
            let class = m.event_class.map_or("EVENT", |c| c.code());
            println!("  -> {:?} {class} score {:.2}", m.span.surface, m.score);
        }
    }
    Ok(())
}
