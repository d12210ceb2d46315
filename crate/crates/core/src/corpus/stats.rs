use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{Corpus, EventClass, Source, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub stories: usize,
    pub total_tokens: usize,
    pub unique_tokens: usize,
    pub total_sentences: usize,
    pub avg_tokens_per_story: f64,
    pub avg_sentences_per_story: f64,
    pub avg_tokens_per_sentence: f64,
    pub total_events: usize,
    pub avg_events_per_story: f64,
    pub per_class_counts: BTreeMap<EventClass, usize>,
    pub per_split_class_counts: BTreeMap<Split, BTreeMap<EventClass, usize>>,
    pub per_source: BTreeMap<Source, SourceCounts>,
    pub top_triggers: Vec<TriggerRate>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceCounts {
    pub stories: usize,
    pub events: usize,
}

/// How often a (lower-cased) word is annotated as a trigger, against how
/// often it appears as a token at all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerRate {
    pub surface: String,
    pub count: usize,
    pub occurrences: usize,
    pub event_rate: f64,
}

pub const DEFAULT_TOP_K: usize = 15;

pub fn compute_stats(corpus: &Corpus) -> Result<DatasetStats> {
    compute_stats_top_k(corpus, DEFAULT_TOP_K)
}

pub fn compute_stats_top_k(corpus: &Corpus, top_k: usize) -> Result<DatasetStats> {
    if corpus.stories.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let n = corpus.stories.len() as f64;
    let mut total_tokens = 0;
    let mut total_sentences = 0;
    let mut vocab: HashSet<&str> = HashSet::new();
    let mut word_occurrences: HashMap<String, usize> = HashMap::new();
    let mut trigger_counts: HashMap<String, usize> = HashMap::new();
    let mut per_class: BTreeMap<EventClass, usize> = EventClass::ALL.iter().map(|&c| (c, 0)).collect();
    let mut per_split: BTreeMap<Split, BTreeMap<EventClass, usize>> = BTreeMap::new();
    let mut per_source: BTreeMap<Source, SourceCounts> = BTreeMap::new();

    for story in &corpus.stories {
        total_sentences += story.sentences.len();
        for sentence in &story.sentences {
            total_tokens += sentence.tokens.len();
            for t in &sentence.tokens {
                vocab.insert(&t.surface);
                *word_occurrences.entry(t.surface.to_lowercase()).or_default() += 1;
            }
            for am in &sentence.mentions {
                if am.tokens.is_some_and(|(a, b)| a == b) {
                    *trigger_counts.entry(am.mention.span.surface.to_lowercase()).or_default() += 1;
                }
            }
        }
        for m in &story.mentions {
            *per_class.entry(m.event_class).or_default() += 1;
            if let Some(split) = corpus.split_of(&story.id) {
                let row = per_split.entry(split).or_insert_with(|| EventClass::ALL.iter().map(|&c| (c, 0)).collect());
                *row.entry(m.event_class).or_default() += 1;
            }
        }
        let src = per_source.entry(story.source).or_default();
        src.stories += 1;
        src.events += story.mentions.len();
    }

    let total_events: usize = per_class.values().sum();
    let mut top: Vec<TriggerRate> = trigger_counts
        .into_iter()
        .map(|(surface, count)| {
            let occurrences = word_occurrences.get(&surface).copied().unwrap_or(count).max(count);
            TriggerRate { event_rate: count as f64 / occurrences as f64, surface, count, occurrences }
        })
        .collect();
    top.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.surface.cmp(&b.surface)));
    top.truncate(top_k);

    Ok(DatasetStats {
        stories: corpus.stories.len(),
        total_tokens,
        unique_tokens: vocab.len(),
        total_sentences,
        avg_tokens_per_story: total_tokens as f64 / n,
        avg_sentences_per_story: total_sentences as f64 / n,
        avg_tokens_per_sentence: if total_sentences == 0 { 0.0 } else { total_tokens as f64 / total_sentences as f64 },
        total_events,
        avg_events_per_story: total_events as f64 / n,
        per_class_counts: per_class,
        per_split_class_counts: per_split,
        per_source,
        top_triggers: top,
    })
}
