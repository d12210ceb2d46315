//! Rule-based tokenizer and sentence splitter. Both work on character offsets
//! and are pure functions of their input.

use super::Token;

/// Split on whitespace and detach punctuation.
///
/// Rules, applied left to right:
/// * whitespace separates tokens and is never part of one;
/// * letters and digits accumulate into a word;
/// * an apostrophe, hyphen or period between two alphanumerics stays inside
///   the word (`don't`, `well-known`, `3.5`);
/// * any other non-alphanumeric character is a token of its own, except that
///   runs of the same character (`...`, `--`, `!!`) form a single token.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_alphanumeric() {
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                if d.is_alphanumeric() {
                    i += 1;
                } else if is_word_joiner(d)
                    && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
                    && chars[i - 1].is_alphanumeric()
                    && (d != '.' || (chars[i - 1].is_ascii_digit() && chars[i + 1].is_ascii_digit()))
                {
                    i += 2;
                } else {
                    break;
                }
            }
        } else {
            i += 1;
            while i < chars.len() && chars[i] == c {
                i += 1;
            }
        }
        tokens.push(Token { surface: chars[start..i].iter().collect(), start, end: i });
    }
    tokens
}

fn is_word_joiner(c: char) -> bool {
    matches!(c, '\'' | '’' | '-' | '.')
}

/// Lower-cased tokens that never end a sentence when followed by a period.
const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "st", "sr", "jr", "prof", "mt", "capt", "col", "gen", "lt", "sgt", "rev", "vs", "etc",
    "fig", "ft", "pvt", "smt", "shri", "sri", "e.g", "i.e",
];

const CLOSERS: &[char] = &['"', '\'', '”', '’', ')', ']', '»'];
const OPENERS: &[char] = &['"', '\'', '“', '‘', '(', '[', '«'];

/// Split text into sentences, returning `(sentence_text, char_offset)`.
///
/// A boundary is placed after a run of `.`, `!` or `?` (plus any closing
/// quotes or brackets) when it is followed by whitespace and then an
/// uppercase letter, a digit or an opening quote. A period after a known
/// abbreviation or a single-letter initial does not end a sentence. A blank
/// line always ends a sentence. Leading and trailing whitespace is excluded
/// from sentence text; offsets index the original string.
pub fn split_sentences(text: &str) -> Vec<(String, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;

    let emit = |from: usize, to: usize, out: &mut Vec<(String, usize)>| {
        let mut a = from;
        let mut b = to;
        while a < b && chars[a].is_whitespace() {
            a += 1;
        }
        while b > a && chars[b - 1].is_whitespace() {
            b -= 1;
        }
        if a < b {
            out.push((chars[a..b].iter().collect(), a));
        }
    };

    while i < n {
        let c = chars[i];
        if c == '\n' {
            let mut j = i + 1;
            let mut newlines = 1;
            while j < n && chars[j].is_whitespace() {
                if chars[j] == '\n' {
                    newlines += 1;
                }
                j += 1;
            }
            if newlines >= 2 {
                emit(start, i, &mut out);
                start = j;
            }
            i = j;
            continue;
        }
        if matches!(c, '.' | '!' | '?') {
            let mut end = i + 1;
            while end < n && matches!(chars[end], '.' | '!' | '?') {
                end += 1;
            }
            while end < n && CLOSERS.contains(&chars[end]) {
                end += 1;
            }
            if c == '.' && end == i + 1 && ends_with_abbreviation(&chars[start..i]) {
                i = end;
                continue;
            }
            let mut j = end;
            while j < n && chars[j].is_whitespace() && chars[j] != '\n' {
                j += 1;
            }
            let followed_by_space = j > end || (j < n && chars[j] == '\n');
            let mut k = j;
            while k < n && chars[k].is_whitespace() {
                k += 1;
            }
            let next = chars.get(k).copied();
            let starts_new = next.is_some_and(|d| d.is_uppercase() || d.is_ascii_digit() || OPENERS.contains(&d));
            if followed_by_space && starts_new {
                emit(start, end, &mut out);
                start = end;
            }
            i = end;
            continue;
        }
        i += 1;
    }
    emit(start, n, &mut out);
    out
}

fn ends_with_abbreviation(prefix: &[char]) -> bool {
    let word: String = prefix
        .iter()
        .rev()
        .take_while(|c| c.is_alphanumeric() || **c == '.')
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    if word.is_empty() {
        return false;
    }
    let lower = word.to_lowercase();
    if ABBREVIATIONS.contains(&lower.as_str()) {
        return true;
    }
    let mut letters = word.chars();
    matches!((letters.next(), letters.next()), (Some(c), None) if c.is_uppercase())
}
