use super::text::{split_sentences, tokenize};
use super::types::CharIndex;
use super::{AlignedMention, AnnotatedSentence, EventMention, Story, Token};
use crate::error::{Error, Result};

/// Sentence ranges `(start, end)` in characters, merged so that no mention
/// straddles a boundary. Also returns the mentions that crossed a raw
/// boundary before merging.
pub(crate) fn sentence_ranges(text: &str, mentions: &[EventMention]) -> (Vec<(usize, usize)>, Vec<EventMention>) {
    let raw: Vec<(usize, usize)> =
        split_sentences(text).into_iter().map(|(s, off)| (off, off + s.chars().count())).collect();
    let mut crossing = Vec::new();
    for m in mentions {
        let start_in = raw.iter().position(|&(a, b)| m.span.start >= a && m.span.start < b);
        if let Some(i) = start_in {
            if m.span.end > raw[i].1 {
                crossing.push(m.clone());
            }
        }
    }
    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(raw.len());
    for (a, b) in raw {
        if let Some(last) = merged.last_mut() {
            let straddles = mentions.iter().any(|m| m.span.start < last.1 && m.span.end > a && m.span.start >= last.0);
            if straddles {
                last.1 = b;
                continue;
            }
        }
        merged.push((a, b));
    }
    (merged, crossing)
}

/// Split a parsed story into sentences, tokenize each one and align its
/// mentions to tokens.
///
/// A mention belongs to the sentence containing its first character. When a
/// mention runs past the end of that sentence the two sentences are merged,
/// so every gold mention survives alignment; [`super::validate_annotations`]
/// reports such mentions separately.
pub fn segment_story(mut story: Story) -> Result<Story> {
    let index = CharIndex::new(&story.text);
    let (ranges, _) = sentence_ranges(&story.text, &story.mentions);
    let mut sentences = Vec::with_capacity(ranges.len());
    for (a, b) in ranges {
        let text = index.slice(a, b).expect("sentence range within text").to_string();
        let tokens = tokenize(&text)
            .into_iter()
            .map(|t| Token { surface: t.surface, start: t.start + a, end: t.end + a })
            .collect();
        let mentions = story
            .mentions
            .iter()
            .filter(|m| m.span.start >= a && m.span.start < b)
            .map(|m| AlignedMention { mention: m.clone(), tokens: None })
            .collect();
        let sentence = AnnotatedSentence { text, offset: a, tokens, mentions };
        sentences.push(align_spans(sentence)?);
    }
    let placed: usize = sentences.iter().map(|s| s.mentions.len()).sum();
    if placed != story.mentions.len() {
        let orphan = story
            .mentions
            .iter()
            .find(|m| !sentences.iter().any(|s| s.mentions.iter().any(|am| &am.mention == *m)))
            .map(|m| m.to_string())
            .unwrap_or_default();
        return Err(Error::Alignment { mention: orphan, reason: "mention starts outside every sentence".into() });
    }
    story.sentences = sentences;
    Ok(story)
}

/// Attach inclusive token-index spans to every mention of the sentence.
pub fn align_spans(mut sentence: AnnotatedSentence) -> Result<AnnotatedSentence> {
    for am in &mut sentence.mentions {
        am.tokens = Some(token_range(&sentence.tokens, &am.mention)?);
    }
    Ok(sentence)
}

pub(crate) fn token_range(tokens: &[Token], m: &EventMention) -> Result<(usize, usize)> {
    let fail = |reason: &str| Error::Alignment { mention: m.to_string(), reason: reason.to_string() };
    let first = tokens.iter().position(|t| t.end > m.span.start).ok_or_else(|| fail("starts after the last token"))?;
    if tokens[first].start != m.span.start {
        return Err(fail(&format!("start splits token {:?}", tokens[first].surface)));
    }
    let last = tokens.iter().rposition(|t| t.start < m.span.end).ok_or_else(|| fail("ends before the first token"))?;
    if tokens[last].end != m.span.end {
        return Err(fail(&format!("end splits token {:?}", tokens[last].surface)));
    }
    if last < first {
        return Err(fail("covers no token"));
    }
    Ok((first, last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_brat, EventClass};

    fn sentence(text: &str, mentions: Vec<EventMention>) -> AnnotatedSentence {
        AnnotatedSentence {
            text: text.to_string(),
            offset: 0,
            tokens: tokenize(text),
            mentions: mentions.into_iter().map(|m| AlignedMention { mention: m, tokens: None }).collect(),
        }
    }

    #[test]
    fn aligns_single_token() {
        let s = sentence("Then he said it.", vec![EventMention::new(8, 12, "said", EventClass::Communication)]);
        let s = align_spans(s).unwrap();
        assert_eq!(s.mentions[0].tokens, Some((2, 2)));
    }

    #[test]
    fn aligns_multi_word_trigger() {
        let s =
            sentence("The tiger was shot dead.", vec![EventMention::new(14, 23, "shot dead", EventClass::Conflict)]);
        let s = align_spans(s).unwrap();
        assert_eq!(s.mentions[0].tokens, Some((3, 4)));
    }

    #[test]
    fn boundary_inside_token_is_an_error() {
        let s = sentence("He repainted it.", vec![EventMention::new(5, 12, "painted", EventClass::GeneralActivity)]);
        assert!(matches!(align_spans(s), Err(Error::Alignment { .. })));
    }

    #[test]
    fn segments_and_places_mentions() {
        let text = "He left. She cried and ran.";
        let ann = "T1\tMOVEMENT 3 7\tleft\nT2\tCOGNITIVE-MENTAL-STATE 13 18\tcried\nT3\tMOVEMENT 23 26\tran\n";
        let story = segment_story(parse_brat("s", text, ann).unwrap()).unwrap();
        assert_eq!(story.sentences.len(), 2);
        assert_eq!(story.sentences[0].mentions.len(), 1);
        assert_eq!(story.sentences[1].mentions.len(), 2);
        assert_eq!(story.sentences[1].mentions[1].tokens, Some((3, 3)));
        // offsets reconstruct the story text
        let chars: Vec<char> = text.chars().collect();
        for s in &story.sentences {
            let slice: String = chars[s.offset..s.end()].iter().collect();
            assert_eq!(slice, s.text);
        }
    }

    #[test]
    fn straddling_mention_merges_sentences() {
        let text = "He said Mr. Rao. Left town.";
        // "Rao. Left" is a contrived cross-boundary span.
        let ann = "T1\tOTHERS 12 21\tRao. Left\n";
        let story = parse_brat("s", text, ann).unwrap();
        let (ranges, crossing) = sentence_ranges(&story.text, &story.mentions);
        assert_eq!(crossing.len(), 1);
        assert_eq!(ranges.len(), 1);
        let story = segment_story(story).unwrap();
        assert_eq!(story.sentences.len(), 1);
        assert_eq!(story.sentences[0].mentions[0].tokens, Some((4, 6)));
    }
}
