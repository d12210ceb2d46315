use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EventClass;
use crate::error::Error;

/// Character-offset trigger span: `start` inclusive, `end` exclusive, counted
/// in Unicode scalar values (the BRAT convention).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TriggerSpan {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

impl TriggerSpan {
    pub fn new(start: usize, end: usize, surface: impl Into<String>) -> Self {
        Self { start, end, surface: surface.into() }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &TriggerSpan) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn same_bounds(&self, other: &TriggerSpan) -> bool {
        self.start == other.start && self.end == other.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventMention {
    pub span: TriggerSpan,
    pub event_class: EventClass,
}

impl EventMention {
    pub fn new(start: usize, end: usize, surface: impl Into<String>, class: EventClass) -> Self {
        Self { span: TriggerSpan::new(start, end, surface), event_class: class }
    }

    pub(crate) fn sort_key(&self) -> (usize, usize, EventClass) {
        (self.span.start, self.span.end, self.event_class)
    }
}

impl fmt::Display for EventMention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}..{} {:?}", self.event_class.code(), self.span.start, self.span.end, self.span.surface)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

/// A mention placed inside a sentence. `tokens` is the inclusive token-index
/// range once [`super::align_spans`] has run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedMention {
    pub mention: EventMention,
    pub tokens: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub text: String,
    /// Character offset of `text` within the story.
    pub offset: usize,
    /// Tokens with story-level character offsets.
    pub tokens: Vec<Token>,
    pub mentions: Vec<AlignedMention>,
}

impl AnnotatedSentence {
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn end(&self) -> usize {
        self.offset + self.char_len()
    }

    pub fn gold(&self) -> impl Iterator<Item = &EventMention> {
        self.mentions.iter().map(|m| &m.mention)
    }
}

/// Collection a story was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    PT,
    CP,
    TR,
    AB,
    BP,
    HP,
    JT,
    SB,
    #[serde(rename = "UNKNOWN")]
    Unknown,
}

impl Source {
    pub const KNOWN: [Source; 8] =
        [Source::PT, Source::CP, Source::TR, Source::AB, Source::BP, Source::HP, Source::JT, Source::SB];

    pub fn code(self) -> &'static str {
        match self {
            Source::PT => "PT",
            Source::CP => "CP",
            Source::TR => "TR",
            Source::AB => "AB",
            Source::BP => "BP",
            Source::HP => "HP",
            Source::JT => "JT",
            Source::SB => "SB",
            Source::Unknown => "UNKNOWN",
        }
    }

    /// Infer the source from a file path: the file stem is tried first, then
    /// each parent directory name. A name matches a source when it equals the
    /// code or starts with the code followed by a non-letter (`PT_03`,
    /// `hp-12`).
    pub fn infer(path: &Path) -> Source {
        let stem = path.file_stem().and_then(|s| s.to_str());
        let parents = path.ancestors().skip(1).filter_map(|p| p.file_name().and_then(|s| s.to_str()));
        stem.into_iter().chain(parents).find_map(Self::from_name).unwrap_or(Source::Unknown)
    }

    fn from_name(name: &str) -> Option<Source> {
        let upper = name.to_ascii_uppercase();
        Source::KNOWN.into_iter().find(|s| {
            let code = s.code();
            upper == code
                || (upper.starts_with(code)
                    && upper[code.len()..].chars().next().is_some_and(|c| !c.is_ascii_alphabetic()))
        })
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "UNKNOWN" {
            return Ok(Source::Unknown);
        }
        Source::KNOWN.into_iter().find(|k| k.code() == s).ok_or_else(|| Error::Data(format!("unknown source {s:?}")))
    }
}

/// Where a story's annotations came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    #[default]
    Gold,
    Synthetic,
    HumanReviewed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Story {
    pub id: String,
    pub source: Source,
    pub text: String,
    /// Story-level mentions sorted by `(start, end, class)`.
    pub mentions: Vec<EventMention>,
    /// Filled by [`super::segment_story`]; empty right after parsing.
    pub sentences: Vec<AnnotatedSentence>,
    pub provenance: Provenance,
}

impl Story {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            source: Source::Unknown,
            text: text.into(),
            mentions: Vec::new(),
            sentences: Vec::new(),
            provenance: Provenance::Gold,
        }
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::Split(format!("unknown split {other:?}"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identifies one sentence in a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SentenceKey {
    pub story_id: String,
    pub sentence: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub stories: Vec<Story>,
    pub split: BTreeMap<String, Split>,
}

impl Corpus {
    pub fn new(stories: Vec<Story>) -> Self {
        Self { stories, split: BTreeMap::new() }
    }

    pub fn story(&self, id: &str) -> Option<&Story> {
        self.stories.iter().find(|s| s.id == id)
    }

    pub fn split_of(&self, id: &str) -> Option<Split> {
        self.split.get(id).copied()
    }

    pub fn stories_in(&self, split: Split) -> impl Iterator<Item = &Story> {
        self.stories.iter().filter(move |s| self.split.get(&s.id) == Some(&split))
    }

    pub fn ids_in(&self, split: Split) -> Vec<String> {
        self.stories_in(split).map(|s| s.id.clone()).collect()
    }

    /// Every sentence of the given split, in story then sentence order.
    pub fn sentences_in(&self, split: Split) -> impl Iterator<Item = (SentenceKey, &AnnotatedSentence)> {
        self.stories_in(split).flat_map(|story| {
            story
                .sentences
                .iter()
                .enumerate()
                .map(|(i, s)| (SentenceKey { story_id: story.id.clone(), sentence: i }, s))
        })
    }

    pub fn all_sentences(&self) -> impl Iterator<Item = (SentenceKey, &AnnotatedSentence)> {
        self.stories.iter().flat_map(|story| {
            story
                .sentences
                .iter()
                .enumerate()
                .map(|(i, s)| (SentenceKey { story_id: story.id.clone(), sentence: i }, s))
        })
    }

    pub fn num_mentions(&self) -> usize {
        self.stories.iter().map(|s| s.mentions.len()).sum()
    }

    /// Sub-corpus holding only the stories of `split`, with their assignment.
    pub fn subset(&self, split: Split) -> Corpus {
        let stories: Vec<Story> = self.stories_in(split).cloned().collect();
        let map = stories.iter().map(|s| (s.id.clone(), split)).collect();
        Corpus { stories, split: map }
    }
}

/// Character-index to byte-offset table for one string.
pub(crate) struct CharIndex<'a> {
    text: &'a str,
    bytes: Vec<usize>,
}

impl<'a> CharIndex<'a> {
    pub fn new(text: &'a str) -> Self {
        let mut bytes: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        bytes.push(text.len());
        Self { text, bytes }
    }

    pub fn char_len(&self) -> usize {
        self.bytes.len() - 1
    }

    pub fn slice(&self, start: usize, end: usize) -> Option<&'a str> {
        if start > end || end > self.char_len() {
            return None;
        }
        Some(&self.text[self.bytes[start]..self.bytes[end]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_inference_from_paths() {
        assert_eq!(Source::infer(Path::new("data/PT_03.txt")), Source::PT);
        assert_eq!(Source::infer(Path::new("data/hp/story12.txt")), Source::HP);
        assert_eq!(Source::infer(Path::new("JT/x.txt")), Source::JT);
        assert_eq!(Source::infer(Path::new("data/party.txt")), Source::Unknown);
        assert_eq!(Source::infer(Path::new("story.txt")), Source::Unknown);
    }

    #[test]
    fn char_index_handles_multibyte_text() {
        let idx = CharIndex::new("“Go,” she said.");
        assert_eq!(idx.slice(1, 3), Some("Go"));
        assert_eq!(idx.slice(10, 14), Some("said"));
        assert_eq!(idx.slice(3, 100), None);
    }
}
