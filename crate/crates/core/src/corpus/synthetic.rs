//! Seeded generator of small annotated stories for tests, examples and
//! toy-scale runs. Each sentence holds at most one trigger per class.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{segment_story, Corpus, EventClass, EventMention, Source, Story};

const NAMES: &[&str] = &["Ravi", "Sita", "Meena", "Arjun", "Gopal", "Lakshmi", "Raju", "Kamala", "Mohan", "Tara"];
const OBJECTS: &[&str] = &[
    "the mango",
    "the letter",
    "the basket",
    "the old lamp",
    "the cart",
    "the rice",
    "the drum",
    "the kite",
    "the book",
    "the bell",
];
const PLACES: &[&str] =
    &["the market", "the village", "the river", "the forest", "the temple", "the school", "the well", "the hill"];
const ANIMALS: &[&str] = &["the tiger", "the snake", "the thief", "the wolf", "the crow"];
const FILLERS: &[&str] = &[
    "The village was quiet that evening",
    "It was a small house near the river",
    "The sky over the hill was grey",
    "Everyone in the family was at home",
    "The road to the market was long",
];

fn triggers(class: EventClass) -> &'static [&'static str] {
    match class {
        EventClass::Communication => &["said", "asked", "told", "replied", "shouted", "whispered"],
        EventClass::Movement => &["went", "came", "ran", "walked", "returned", "climbed"],
        EventClass::CognitiveMentalState => &["thought", "wondered", "remembered", "feared", "hoped"],
        EventClass::GeneralActivity => &["took", "brought", "painted", "cooked", "opened", "carried"],
        EventClass::LifeEvent => &["died", "married", "passed away", "fell ill"],
        EventClass::Conflict => &["fought", "attacked", "shot dead", "struck"],
        EventClass::Others => &["rained", "happened", "broke", "burned"],
    }
}

fn complement<R: Rng>(class: EventClass, rng: &mut R) -> String {
    let pick = |xs: &[&str], rng: &mut R| xs.choose(rng).unwrap().to_string();
    match class {
        EventClass::Communication => format!("to {}", pick(NAMES, rng)),
        EventClass::Movement => format!("to {}", pick(PLACES, rng)),
        EventClass::CognitiveMentalState => format!("about {}", pick(OBJECTS, rng)),
        EventClass::GeneralActivity => pick(OBJECTS, rng),
        EventClass::LifeEvent => format!("near {}", pick(PLACES, rng)),
        EventClass::Conflict => pick(ANIMALS, rng),
        EventClass::Others => format!("at {}", pick(PLACES, rng)),
    }
}

/// Builds text and mentions together so offsets are exact by construction.
struct Writer {
    text: String,
    chars: usize,
    mentions: Vec<EventMention>,
}

impl Writer {
    fn push(&mut self, s: &str) {
        self.text.push_str(s);
        self.chars += s.chars().count();
    }

    fn push_trigger(&mut self, s: &str, class: EventClass) {
        let start = self.chars;
        self.push(s);
        self.mentions.push(EventMention::new(start, self.chars, s, class));
    }
}

fn sentence<R: Rng>(w: &mut Writer, rng: &mut R, with_labels: bool) {
    if rng.gen_bool(0.15) {
        w.push(FILLERS.choose(rng).unwrap());
        w.push(".");
        return;
    }
    let clauses = rng.gen_range(1..=3);
    let mut classes = EventClass::ALL.to_vec();
    classes.shuffle(rng);
    for (i, &class) in classes.iter().take(clauses).enumerate() {
        if i > 0 {
            w.push(if rng.gen_bool(0.5) { " and " } else { ", then " });
        }
        w.push(NAMES.choose(rng).unwrap());
        w.push(" ");
        let trig = triggers(class).choose(rng).unwrap();
        if with_labels {
            w.push_trigger(trig, class);
        } else {
            w.push(trig);
        }
        w.push(" ");
        w.push(&complement(class, rng));
    }
    w.push(".");
}

/// One story of `sentences` sentences; `id` prefixes determine the source.
pub fn synthetic_story(id: &str, sentences: usize, seed: u64, with_labels: bool) -> Story {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Writer { text: String::new(), chars: 0, mentions: Vec::new() };
    for i in 0..sentences {
        if i > 0 {
            w.push(if i % 6 == 0 { "\n\n" } else { " " });
        }
        sentence(&mut w, &mut rng, with_labels);
    }
    w.push("\n");
    let mut story = Story::new(id, w.text);
    story.mentions = w.mentions;
    story.source = Source::infer(std::path::Path::new(id));
    segment_story(story).expect("generated stories always align")
}

/// `n` annotated stories, cycling through the eight source codes.
pub fn synthetic_corpus(n: usize, sentences_per_story: usize, seed: u64) -> Corpus {
    Corpus::new(
        (0..n)
            .map(|i| {
                let src = Source::KNOWN[i % Source::KNOWN.len()].code();
                synthetic_story(
                    &format!("{src}_{i:03}"),
                    sentences_per_story,
                    seed.wrapping_mul(1_000_003).wrapping_add(i as u64),
                    true,
                )
            })
            .collect(),
    )
}

/// Same generator without annotations, standing in for unlabeled stories.
pub fn synthetic_unlabeled(n: usize, sentences_per_story: usize, seed: u64) -> Vec<Story> {
    (0..n)
        .map(|i| {
            synthetic_story(
                &format!("UL_{i:03}"),
                sentences_per_story,
                seed.wrapping_mul(7_000_001).wrapping_add(i as u64),
                false,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::validate_annotations;

    #[test]
    fn generated_corpus_is_clean_and_deterministic() {
        let a = synthetic_corpus(4, 8, 1);
        let b = synthetic_corpus(4, 8, 1);
        assert_eq!(a, b);
        for story in &a.stories {
            assert!(validate_annotations(story).is_empty());
            assert_eq!(story.sentences.len(), 8);
            for s in &story.sentences {
                let mut classes: Vec<_> = s.gold().map(|m| m.event_class).collect();
                let n = classes.len();
                classes.dedup();
                classes.sort();
                classes.dedup();
                assert_eq!(classes.len(), n);
            }
        }
        assert_eq!(a.stories[0].source, Source::PT);
        assert!(a.num_mentions() > 0);
    }

    #[test]
    fn unlabeled_stories_have_no_mentions() {
        let u = synthetic_unlabeled(2, 5, 3);
        assert!(u.iter().all(|s| s.mentions.is_empty()));
        assert_eq!(u[0].sentences.len(), 5);
    }
}
