//! One-record-per-sentence JSON-lines interchange.
//!
//! ```json
//! {"story_id":"PT_01","sentence_index":0,"sentence_text":"He said so.","char_offset":0,
//!  "mentions":[{"start":3,"end":7,"surface":"said","class":"COMMUNICATION"}]}
//! ```
//!
//! Mention offsets are story-level characters, like BRAT. Prediction files
//! add `predicted_mentions`, whose entries carry a `score` and may omit
//! `class` (detection-only models).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::text::tokenize;
use super::{
    align_spans, AlignedMention, AnnotatedSentence, Corpus, EventClass, EventMention, Provenance, SentenceKey, Source,
    Split, Story, Token, TriggerSpan,
};
use crate::error::{Error, Result};

/// A predicted trigger. `event_class` is `None` for detection-only models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedMention {
    pub span: TriggerSpan,
    pub event_class: Option<EventClass>,
    pub score: f64,
}

impl PredictedMention {
    pub fn from_gold(m: &EventMention) -> Self {
        Self { span: m.span.clone(), event_class: Some(m.event_class), score: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionRecord {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<EventClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl From<&EventMention> for MentionRecord {
    fn from(m: &EventMention) -> Self {
        Self {
            start: m.span.start,
            end: m.span.end,
            surface: m.span.surface.clone(),
            class: Some(m.event_class),
            score: None,
        }
    }
}

impl From<&PredictedMention> for MentionRecord {
    fn from(m: &PredictedMention) -> Self {
        Self {
            start: m.span.start,
            end: m.span.end,
            surface: m.span.surface.clone(),
            class: m.event_class,
            score: Some(m.score),
        }
    }
}

impl MentionRecord {
    pub fn to_predicted(&self) -> PredictedMention {
        PredictedMention {
            span: TriggerSpan::new(self.start, self.end, self.surface.clone()),
            event_class: self.class,
            score: self.score.unwrap_or(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub story_id: String,
    pub sentence_index: usize,
    pub sentence_text: String,
    pub char_offset: usize,
    pub mentions: Vec<MentionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_mentions: Option<Vec<MentionRecord>>,
}

pub fn corpus_records(corpus: &Corpus) -> Vec<SentenceRecord> {
    let mut out = Vec::new();
    for story in &corpus.stories {
        for (i, s) in story.sentences.iter().enumerate() {
            out.push(SentenceRecord {
                story_id: story.id.clone(),
                sentence_index: i,
                sentence_text: s.text.clone(),
                char_offset: s.offset,
                mentions: s.gold().map(MentionRecord::from).collect(),
                split: corpus.split_of(&story.id),
                source: Some(story.source),
                provenance: Some(story.provenance),
                predicted_mentions: None,
            });
        }
    }
    out
}

pub fn write_jsonl<W: Write>(mut w: W, records: &[SentenceRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io("<jsonl>", e))?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<SentenceRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<jsonl>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SentenceRecord =
            serde_json::from_str(&line).map_err(|e| Error::Data(format!("jsonl line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Rebuild a corpus from sentence records. Story text is reassembled by
/// placing each sentence at its offset; gaps become spaces.
pub fn corpus_from_records(records: &[SentenceRecord]) -> Result<Corpus> {
    let mut order: Vec<String> = Vec::new();
    let mut grouped: BTreeMap<String, Vec<&SentenceRecord>> = BTreeMap::new();
    for r in records {
        if !grouped.contains_key(&r.story_id) {
            order.push(r.story_id.clone());
        }
        grouped.entry(r.story_id.clone()).or_default().push(r);
    }
    let mut corpus = Corpus::default();
    for id in order {
        let mut recs = grouped.remove(&id).unwrap_or_default();
        recs.sort_by_key(|r| r.sentence_index);
        let mut text: Vec<char> = Vec::new();
        let mut sentences = Vec::new();
        let mut mentions = Vec::new();
        for r in &recs {
            if r.char_offset < text.len() {
                return Err(Error::Data(format!(
                    "story {id}: sentence {} overlaps the previous one",
                    r.sentence_index
                )));
            }
            text.resize(r.char_offset, ' ');
            text.extend(r.sentence_text.chars());
            let tokens = tokenize(&r.sentence_text)
                .into_iter()
                .map(|t| Token { surface: t.surface, start: t.start + r.char_offset, end: t.end + r.char_offset })
                .collect();
            let sent_mentions: Vec<AlignedMention> = r
                .mentions
                .iter()
                .map(|m| {
                    let class =
                        m.class.ok_or_else(|| Error::Data(format!("story {id}: gold mention without class")))?;
                    Ok(AlignedMention {
                        mention: EventMention::new(m.start, m.end, m.surface.clone(), class),
                        tokens: None,
                    })
                })
                .collect::<Result<_>>()?;
            mentions.extend(sent_mentions.iter().map(|m| m.mention.clone()));
            sentences.push(align_spans(AnnotatedSentence {
                text: r.sentence_text.clone(),
                offset: r.char_offset,
                tokens,
                mentions: sent_mentions,
            })?);
        }
        mentions.sort_by_key(EventMention::sort_key);
        let first = recs.first();
        let mut story = Story::new(id.clone(), text.into_iter().collect::<String>());
        story.source = first.and_then(|r| r.source).unwrap_or(Source::Unknown);
        story.provenance = first.and_then(|r| r.provenance).unwrap_or_default();
        story.mentions = mentions;
        story.sentences = sentences;
        if let Some(split) = first.and_then(|r| r.split) {
            corpus.split.insert(id.clone(), split);
        }
        corpus.stories.push(story);
    }
    Ok(corpus)
}

/// Collect `predicted_mentions` keyed by sentence.
pub fn predictions_from_records(records: &[SentenceRecord]) -> BTreeMap<SentenceKey, Vec<PredictedMention>> {
    records
        .iter()
        .map(|r| {
            (
                SentenceKey { story_id: r.story_id.clone(), sentence: r.sentence_index },
                r.predicted_mentions.iter().flatten().map(MentionRecord::to_predicted).collect(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_brat, segment_story};

    #[test]
    fn corpus_survives_jsonl() {
        let text = "He said no. She ran home.";
        let ann = "T1\tCOMMUNICATION 3 7\tsaid\nT2\tMOVEMENT 16 19\tran\n";
        let mut story = segment_story(parse_brat("PT_1", text, ann).unwrap()).unwrap();
        story.source = Source::PT;
        story.provenance = Provenance::Synthetic;
        let mut corpus = Corpus::new(vec![story]);
        corpus.split.insert("PT_1".into(), Split::Dev);

        let mut buf = Vec::new();
        write_jsonl(&mut buf, &corpus_records(&corpus)).unwrap();
        let back = corpus_from_records(&read_jsonl(buf.as_slice()).unwrap()).unwrap();
        assert_eq!(back, corpus);
    }

    #[test]
    fn predictions_keep_scores_and_optional_class() {
        let line = r#"{"story_id":"s","sentence_index":0,"sentence_text":"Go.","char_offset":0,"mentions":[],"predicted_mentions":[{"start":0,"end":2,"surface":"Go","score":0.5}]}"#;
        let recs = read_jsonl(line.as_bytes()).unwrap();
        let preds = predictions_from_records(&recs);
        let p = &preds[&SentenceKey { story_id: "s".into(), sentence: 0 }][0];
        assert_eq!(p.event_class, None);
        assert_eq!(p.score, 0.5);
    }

    #[test]
    fn bad_line_reports_position() {
        let err = read_jsonl("\n{oops}\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }
}
