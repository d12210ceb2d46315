//! BIO2 label sequences over sentence tokens.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AnnotatedSentence, EventClass};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    /// `B-EVT`, `I-EVT`, `O`
    Detect,
    /// `B-c`, `I-c` for each class, and `O`
    Classify,
}

impl std::str::FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "detect" => Ok(LabelMode::Detect),
            "classify" => Ok(LabelMode::Classify),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelMode::Detect => "detect",
            LabelMode::Classify => "classify",
        })
    }
}

/// What a span is tagged as: a bare event, or an event of a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    Event,
    Class(EventClass),
}

impl Tag {
    pub fn class(self) -> Option<EventClass> {
        match self {
            Tag::Event => None,
            Tag::Class(c) => Some(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BioLabel {
    O,
    B(Tag),
    I(Tag),
}

impl fmt::Display for BioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = |t: &Tag| match t {
            Tag::Event => "EVT",
            Tag::Class(c) => c.code(),
        };
        match self {
            BioLabel::O => f.write_str("O"),
            BioLabel::B(t) => write!(f, "B-{}", tag(t)),
            BioLabel::I(t) => write!(f, "I-{}", tag(t)),
        }
    }
}

impl LabelMode {
    pub fn num_labels(self) -> usize {
        match self {
            LabelMode::Detect => 3,
            LabelMode::Classify => 1 + 2 * EventClass::ALL.len(),
        }
    }

    /// Dense index: `O = 0`, then `B`/`I` pairs.
    pub fn index(self, label: BioLabel) -> usize {
        let pair = |t: Tag| match t {
            Tag::Event => 0,
            Tag::Class(c) => c.index(),
        };
        match label {
            BioLabel::O => 0,
            BioLabel::B(t) => 1 + 2 * pair(t),
            BioLabel::I(t) => 2 + 2 * pair(t),
        }
    }

    pub fn label(self, index: usize) -> BioLabel {
        if index == 0 {
            return BioLabel::O;
        }
        let k = (index - 1) / 2;
        let tag = match self {
            LabelMode::Detect => Tag::Event,
            LabelMode::Classify => Tag::Class(EventClass::ALL[k]),
        };
        if (index - 1) % 2 == 0 {
            BioLabel::B(tag)
        } else {
            BioLabel::I(tag)
        }
    }

    pub fn tag_for(self, class: EventClass) -> Tag {
        match self {
            LabelMode::Detect => Tag::Event,
            LabelMode::Classify => Tag::Class(class),
        }
    }
}

/// A labelled token span, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenSpan {
    pub first: usize,
    pub last: usize,
    pub tag: Tag,
}

/// Encode the aligned mentions of a sentence as BIO2 labels.
///
/// With `single_token` set, each mention labels only its first token.
pub fn to_label_sequence(sentence: &AnnotatedSentence, mode: LabelMode, single_token: bool) -> Result<Vec<BioLabel>> {
    let mut labels = vec![BioLabel::O; sentence.tokens.len()];
    let mut owner: Vec<Option<usize>> = vec![None; sentence.tokens.len()];
    for (mi, am) in sentence.mentions.iter().enumerate() {
        let (first, mut last) = am.tokens.ok_or_else(|| Error::Alignment {
            mention: am.mention.to_string(),
            reason: "sentence has not been aligned".into(),
        })?;
        if single_token {
            last = first;
        }
        for t in first..=last {
            if let Some(other) = owner[t] {
                return Err(Error::Overlap(sentence.mentions[other].mention.to_string(), am.mention.to_string()));
            }
            owner[t] = Some(mi);
        }
        let tag = mode.tag_for(am.mention.event_class);
        labels[first] = BioLabel::B(tag);
        for l in &mut labels[first + 1..=last] {
            *l = BioLabel::I(tag);
        }
    }
    Ok(labels)
}

/// Decode BIO labels into spans. An `I-x` that does not continue an open
/// `x` span starts a new one.
pub fn decode_label_sequence(labels: &[BioLabel]) -> Vec<TokenSpan> {
    let mut spans = Vec::new();
    let mut open: Option<TokenSpan> = None;
    for (i, label) in labels.iter().enumerate() {
        match *label {
            BioLabel::O => {
                spans.extend(open.take());
            }
            BioLabel::B(tag) => {
                spans.extend(open.take());
                open = Some(TokenSpan { first: i, last: i, tag });
            }
            BioLabel::I(tag) => match &mut open {
                Some(span) if span.tag == tag => span.last = i,
                _ => {
                    spans.extend(open.take());
                    open = Some(TokenSpan { first: i, last: i, tag });
                }
            },
        }
    }
    spans.extend(open);
    spans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{align_spans, tokenize, AlignedMention, EventMention};

    fn sent(text: &str, mentions: &[(usize, usize, EventClass)]) -> AnnotatedSentence {
        let chars: Vec<char> = text.chars().collect();
        let s = AnnotatedSentence {
            text: text.into(),
            offset: 0,
            tokens: tokenize(text),
            mentions: mentions
                .iter()
                .map(|&(a, b, c)| AlignedMention {
                    mention: EventMention::new(a, b, chars[a..b].iter().collect::<String>(), c),
                    tokens: None,
                })
                .collect(),
        };
        align_spans(s).unwrap()
    }

    #[test]
    fn single_trigger() {
        let s = sent("He painted the fence .", &[(3, 10, EventClass::GeneralActivity)]);
        let labels = to_label_sequence(&s, LabelMode::Classify, false).unwrap();
        let shown: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
        assert_eq!(shown, ["O", "B-GA", "O", "O", "O"]);
        let d = to_label_sequence(&s, LabelMode::Detect, false).unwrap();
        assert_eq!(d[1], BioLabel::B(Tag::Event));
    }

    #[test]
    fn multi_word_trigger() {
        let s = sent("shot dead", &[(0, 9, EventClass::Conflict)]);
        let labels = to_label_sequence(&s, LabelMode::Classify, false).unwrap();
        let shown: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
        assert_eq!(shown, ["B-CON", "I-CON"]);
        let single = to_label_sequence(&s, LabelMode::Classify, true).unwrap();
        assert_eq!(single[1], BioLabel::O);
        assert_eq!(
            decode_label_sequence(&labels),
            vec![TokenSpan { first: 0, last: 1, tag: Tag::Class(EventClass::Conflict) }]
        );
    }

    #[test]
    fn overlapping_mentions_are_rejected() {
        let s = sent("shot dead", &[(0, 9, EventClass::Conflict), (0, 4, EventClass::Others)]);
        assert!(matches!(to_label_sequence(&s, LabelMode::Classify, false), Err(Error::Overlap(..))));
    }

    #[test]
    fn adjacent_mentions_stay_separate() {
        let s = sent("ran jumped", &[(0, 3, EventClass::Movement), (4, 10, EventClass::Movement)]);
        let labels = to_label_sequence(&s, LabelMode::Classify, false).unwrap();
        assert_eq!(decode_label_sequence(&labels).len(), 2);
    }

    #[test]
    fn illegal_inside_is_repaired_as_begin() {
        let mov = Tag::Class(EventClass::Movement);
        let com = Tag::Class(EventClass::Communication);
        let spans = decode_label_sequence(&[BioLabel::O, BioLabel::I(mov), BioLabel::I(mov), BioLabel::I(com)]);
        assert_eq!(spans, vec![TokenSpan { first: 1, last: 2, tag: mov }, TokenSpan { first: 3, last: 3, tag: com },]);
    }

    #[test]
    fn dense_indices_are_a_bijection() {
        for mode in [LabelMode::Detect, LabelMode::Classify] {
            for i in 0..mode.num_labels() {
                assert_eq!(mode.index(mode.label(i)), i);
            }
        }
    }
}
