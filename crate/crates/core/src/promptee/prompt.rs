use serde::{Deserialize, Serialize};

use super::tokenizer::SubwordTokenizer;
use crate::corpus::{EventClass, LabelMode, Tag};
use crate::error::{Error, Result};

/// Inclusive range of decoder positions holding one class name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpan {
    pub label: Tag,
    pub start_tok: usize,
    pub end_tok: usize,
}

impl SlotSpan {
    pub fn len(&self) -> usize {
        self.end_tok - self.start_tok + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Decoder prompt: `ids[0]` is the start sentinel, followed by the pieces of
/// `text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub text: String,
    pub mode: LabelMode,
    pub ids: Vec<usize>,
    pub slots: Vec<SlotSpan>,
}

/// Slot labels of a mode, in prompt order.
pub fn slot_labels(mode: LabelMode) -> Vec<Tag> {
    match mode {
        LabelMode::Detect => vec![Tag::Event],
        LabelMode::Classify => EventClass::PROMPT_ORDER.iter().map(|&c| Tag::Class(c)).collect(),
    }
}

fn slot_word(tag: Tag) -> &'static str {
    match tag {
        Tag::Event => "EVENT",
        Tag::Class(c) => c.name(),
    }
}

/// Build the prompt for `mode` under `tokenizer`: `EVENT` for detection, the
/// seven class names joined by spaces for classification.
pub fn build_prompt(
    mode: LabelMode,
    tokenizer: &dyn SubwordTokenizer,
    max_decoder_len: usize,
) -> Result<PromptTemplate> {
    let labels = slot_labels(mode);
    let mut text = String::new();
    let mut ranges = Vec::new();
    for &tag in &labels {
        if !text.is_empty() {
            text.push(' ');
        }
        let start = text.chars().count();
        text.push_str(slot_word(tag));
        ranges.push((tag, start, text.chars().count()));
    }
    let pieces = tokenizer.tokenize(&text);
    let mut ids = vec![tokenizer.bos()];
    ids.extend(pieces.iter().map(|p| p.id));
    if ids.len() > max_decoder_len {
        return Err(Error::Config(format!(
            "the {mode} prompt needs {} decoder positions, more than max_decoder_len {max_decoder_len}",
            ids.len()
        )));
    }
    let mut slots = Vec::with_capacity(labels.len());
    for (tag, start, end) in ranges {
        let inside: Vec<usize> =
            pieces.iter().enumerate().filter(|(_, p)| p.start >= start && p.end <= end).map(|(i, _)| i + 1).collect();
        let (&first, &last) = match (inside.first(), inside.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::Config(format!("tokenizer produced no pieces for slot {}", slot_word(tag)))),
        };
        slots.push(SlotSpan { label: tag, start_tok: first, end_tok: last });
    }
    Ok(PromptTemplate { text, mode, ids, slots })
}
