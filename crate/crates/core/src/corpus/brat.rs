//! BRAT standoff I/O for trigger annotations.
//!
//! Only text-bound `T` records are consumed:
//!
//! ```text
//! T1<TAB>COMMUNICATION 10 14<TAB>said
//! ```
//!
//! Other record kinds (`E`, `A`, `R`, `#`, ...) are skipped with a warning.

use std::fmt::Write as _;

use log::warn;

use super::types::CharIndex;
use super::{EventClass, EventMention, Story};
use crate::error::{Error, Result};

/// One `T` record before any checks against the text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct RawRecord {
    pub line: usize,
    pub class: String,
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

pub(crate) fn raw_records(ann: &str) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (idx, line) in ann.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        if !line.starts_with('T') {
            warn!("line {line_no}: ignoring non-trigger record {:?}", first_field(line));
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let _id = fields.next();
        let (Some(body), Some(surface)) = (fields.next(), fields.next()) else {
            return Err(Error::Malformed { line: line_no, reason: "expected three tab-separated fields".into() });
        };
        let mut parts = body.split(' ');
        let class = parts.next().unwrap_or_default().to_string();
        let offsets: Vec<&str> = parts.collect();
        if offsets.len() != 2 || offsets.iter().any(|o| o.contains(';')) {
            return Err(Error::Malformed {
                line: line_no,
                reason: format!("expected `CLASS start end`, found {body:?}"),
            });
        }
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Malformed { line: line_no, reason: format!("bad offset {s:?}") })
        };
        out.push(RawRecord {
            line: line_no,
            class,
            start: parse(offsets[0])?,
            end: parse(offsets[1])?,
            surface: surface.to_string(),
        });
    }
    Ok(out)
}

fn first_field(line: &str) -> &str {
    line.split('\t').next().unwrap_or(line)
}

/// BRAT writes line breaks inside a span as spaces.
pub(crate) fn surface_matches(found: &str, expected: &str) -> bool {
    found == expected || found == expected.replace(['\n', '\r'], " ")
}

/// Parse a `.txt`/`.ann` pair into a story with sorted, verified mentions.
pub fn parse_brat(id: &str, text: &str, ann: &str) -> Result<Story> {
    let index = CharIndex::new(text);
    let mut mentions = Vec::new();
    for rec in raw_records(ann)? {
        let class: EventClass =
            rec.class.parse().map_err(|_| Error::Class { class: rec.class.clone(), line: Some(rec.line) })?;
        if rec.start >= rec.end {
            return Err(Error::Offset { line: rec.line, start: rec.start, end: rec.end, len: index.char_len() });
        }
        let expected = index.slice(rec.start, rec.end).ok_or(Error::Offset {
            line: rec.line,
            start: rec.start,
            end: rec.end,
            len: index.char_len(),
        })?;
        if !surface_matches(&rec.surface, expected) {
            return Err(Error::SurfaceMismatch { line: rec.line, found: rec.surface, expected: expected.to_string() });
        }
        mentions.push(EventMention::new(rec.start, rec.end, expected, class));
    }
    mentions.sort_by_key(EventMention::sort_key);
    if let Some(w) = mentions.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Duplicate(w[0].to_string()));
    }
    let mut story = Story::new(id, text);
    story.mentions = mentions;
    Ok(story)
}

/// Serialise a story back to `(text, ann)`; T-ids are renumbered `T1..` in
/// span order.
pub fn write_brat(story: &Story) -> (String, String) {
    let mut mentions: Vec<&EventMention> = story.mentions.iter().collect();
    mentions.sort_by_key(|m| m.sort_key());
    let mut ann = String::new();
    for (i, m) in mentions.iter().enumerate() {
        let surface = m.span.surface.replace(['\n', '\r'], " ");
        let _ = writeln!(ann, "T{}\t{} {} {}\t{}", i + 1, m.event_class.name(), m.span.start, m.span.end, surface);
    }
    (story.text.clone(), ann)
}
