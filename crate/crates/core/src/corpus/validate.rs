//! Machine-checkable annotation constraints. Violations are data: nothing
//! here mutates its input or fails.

use std::fmt;

use serde::Serialize;

use super::brat::{raw_records, surface_matches};
use super::segment::sentence_ranges;
use super::types::CharIndex;
use super::{EventClass, Story};
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Malformed,
    OffsetOutOfBounds,
    SurfaceMismatch,
    UnknownClass,
    Duplicate,
    Overlap,
    CrossesSentence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub story_id: String,
    /// 1-based `.ann` line when known.
    pub line: Option<usize>,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {:?}: {}", self.story_id, l, self.kind, self.message),
            None => write!(f, "{}: {:?}: {}", self.story_id, self.kind, self.message),
        }
    }
}

/// Check a parsed story: offsets, surfaces, duplicates, overlaps and
/// sentence-crossing mentions.
pub fn validate_annotations(story: &Story) -> Vec<Violation> {
    let index = CharIndex::new(&story.text);
    let mut out = Vec::new();
    let v = |kind, message: String| Violation { story_id: story.id.clone(), line: None, kind, message };
    for m in &story.mentions {
        match index.slice(m.span.start, m.span.end) {
            Some(s) if m.span.start < m.span.end => {
                if !surface_matches(&m.span.surface, s) {
                    out.push(v(ViolationKind::SurfaceMismatch, format!("{m}: text is {s:?}")));
                }
            }
            _ => out.push(v(ViolationKind::OffsetOutOfBounds, m.to_string())),
        }
    }
    let mut sorted: Vec<_> = story.mentions.iter().collect();
    sorted.sort_by_key(|m| m.sort_key());
    for (i, a) in sorted.iter().enumerate() {
        for b in &sorted[i + 1..] {
            if b.span.start >= a.span.end {
                break;
            }
            if a.span.same_bounds(&b.span) && a.event_class == b.event_class {
                out.push(v(ViolationKind::Duplicate, a.to_string()));
            } else {
                out.push(v(ViolationKind::Overlap, format!("{a} overlaps {b}")));
            }
        }
    }
    let (_, crossing) = sentence_ranges(&story.text, &story.mentions);
    for m in crossing {
        out.push(v(ViolationKind::CrossesSentence, format!("{m} crosses a sentence boundary")));
    }
    out
}

/// Check a raw `.txt`/`.ann` pair, reporting every problem with its line
/// instead of stopping at the first.
pub fn validate_brat(story_id: &str, text: &str, ann: &str) -> Vec<Violation> {
    let index = CharIndex::new(text);
    let records = match raw_records(ann) {
        Ok(r) => r,
        Err(e) => {
            let (line, message) = match e {
                Error::Malformed { line, reason } => (Some(line), reason),
                other => (None, other.to_string()),
            };
            return vec![Violation { story_id: story_id.into(), line, kind: ViolationKind::Malformed, message }];
        }
    };
    let mut out = Vec::new();
    let mut story = Story::new(story_id, text);
    for rec in records {
        let v = |kind, message: String| Violation { story_id: story_id.into(), line: Some(rec.line), kind, message };
        let class = match rec.class.parse::<EventClass>() {
            Ok(c) => c,
            Err(_) => {
                out.push(v(ViolationKind::UnknownClass, rec.class.clone()));
                continue;
            }
        };
        let Some(expected) = index.slice(rec.start, rec.end).filter(|_| rec.start < rec.end) else {
            out.push(v(
                ViolationKind::OffsetOutOfBounds,
                format!("{}..{} in {} characters", rec.start, rec.end, index.char_len()),
            ));
            continue;
        };
        if !surface_matches(&rec.surface, expected) {
            out.push(v(ViolationKind::SurfaceMismatch, format!("{:?} vs text {:?}", rec.surface, expected)));
            continue;
        }
        story.mentions.push(super::EventMention::new(rec.start, rec.end, expected, class));
    }
    out.extend(validate_annotations(&story));
    out
}
