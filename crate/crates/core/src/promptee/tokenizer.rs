use serde::{Deserialize, Serialize};

use crate::corpus::tokenize;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const MASK: usize = 3;
pub const UNK: usize = 4;
const NUM_SPECIAL: usize = 5;

/// One subword with its character range in the tokenized text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    pub id: usize,
    pub start: usize,
    pub end: usize,
}

/// Subword tokenizer with a character-offset mapping.
pub trait SubwordTokenizer: Send + Sync {
    /// Pieces of `text` in order; offsets are relative to `text`.
    fn tokenize(&self, text: &str) -> Vec<Piece>;
    fn vocab_size(&self) -> usize;
    fn bos(&self) -> usize {
        BOS
    }
    fn eos(&self) -> usize {
        EOS
    }
    fn mask(&self) -> usize {
        MASK
    }
}

/// Word tokens cut into chunks of at most `max_piece_len` characters, each
/// hashed (FNV-1a over the lower-cased chunk) into a fixed-size vocabulary.
/// Non-initial chunks carry a continuation marker so `ing` and `##ing` differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedTokenizer {
    pub vocab_size: usize,
    pub max_piece_len: usize,
}

pub const HASHED_TOKENIZER_ID: &str = "hashed-fnv1a";

fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl HashedTokenizer {
    pub fn new(vocab_size: usize, max_piece_len: usize) -> Self {
        assert!(vocab_size > NUM_SPECIAL, "vocabulary too small");
        assert!(max_piece_len > 0, "pieces must be non-empty");
        Self { vocab_size, max_piece_len }
    }

    fn piece_id(&self, piece: &str, continuation: bool) -> usize {
        let lower = piece.to_lowercase();
        let marker: &[u8] = if continuation { b"##" } else { b"" };
        let h = fnv1a(marker.iter().copied().chain(lower.bytes()));
        NUM_SPECIAL + (h % (self.vocab_size - NUM_SPECIAL) as u64) as usize
    }
}

impl SubwordTokenizer for HashedTokenizer {
    fn tokenize(&self, text: &str) -> Vec<Piece> {
        let mut out = Vec::new();
        for token in tokenize(text) {
            let chars: Vec<char> = token.surface.chars().collect();
            for (k, chunk) in chars.chunks(self.max_piece_len).enumerate() {
                let start = token.start + k * self.max_piece_len;
                let s: String = chunk.iter().collect();
                out.push(Piece { id: self.piece_id(&s, k > 0), start, end: start + chunk.len() });
            }
        }
        out
    }

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pieces_cover_word_characters() {
        let t = HashedTokenizer::new(4096, 3);
        let text = "Maria rushed home.";
        let pieces = t.tokenize(text);
        let chars: Vec<char> = text.chars().collect();
        let spelled: Vec<String> = pieces.iter().map(|p| chars[p.start..p.end].iter().collect()).collect();
        assert_eq!(spelled, ["Mar", "ia", "rus", "hed", "hom", "e", "."]);
        assert!(pieces.iter().all(|p| p.id >= NUM_SPECIAL && p.id < 4096));
    }

    #[test]
    fn ids_ignore_case_but_not_position() {
        let t = HashedTokenizer::new(4096, 6);
        let a = t.tokenize("Said");
        let b = t.tokenize("said");
        assert_eq!(a[0].id, b[0].id);
        let t = HashedTokenizer::new(1 << 20, 3);
        let c = t.tokenize("ing xxxing");
        assert_eq!(c.len(), 3);
        assert_ne!(c[0].id, c[2].id, "continuation chunk must hash differently");
    }
}
