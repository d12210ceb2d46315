use std::collections::HashMap;
use std::io::BufRead;

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Mat;

pub const PAD: usize = 0;
pub const UNK: usize = 1;

/// Word vocabulary with an embedding matrix. Row 0 is padding, row 1 the
/// (trainable) unknown vector.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    pub matrix: Mat,
}

impl EmbeddingTable {
    fn empty(dim: usize) -> Self {
        let mut t = Self { tokens: Vec::new(), index: HashMap::new(), matrix: Array2::zeros((0, dim)) };
        t.push_token("<pad>");
        t.push_token("<unk>");
        t.matrix = Array2::zeros((2, dim));
        t
    }

    fn push_token(&mut self, token: &str) -> bool {
        if self.index.contains_key(token) {
            return false;
        }
        self.index.insert(token.to_string(), self.tokens.len());
        self.tokens.push(token.to_string());
        true
    }

    /// Parse a whitespace-separated text table. A first line holding exactly
    /// two integers (word2vec header) is skipped.
    pub fn from_reader<R: BufRead>(r: R) -> Result<Self> {
        let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
        let mut dim = None;
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<embeddings>", e))?;
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let values: Vec<f64> = parts
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Data(format!("embeddings line {}: {e}", i + 1)))?;
            if i == 0 && values.len() == 1 && token.parse::<usize>().is_ok() {
                continue;
            }
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(Error::Data(format!(
                        "embeddings line {}: expected {d} values, found {}",
                        i + 1,
                        values.len()
                    )))
                }
                _ => {}
            }
            rows.push((token.to_string(), values));
        }
        let dim = dim.filter(|&d| d > 0).ok_or_else(|| Error::Data("empty embedding table".into()))?;
        let mut t = Self::empty(dim);
        let mut data: Vec<f64> = vec![0.0; 2 * dim];
        for (token, values) in rows {
            if t.push_token(&token) {
                data.extend(values);
            }
        }
        t.matrix = Array2::from_shape_vec((t.tokens.len(), dim), data).expect("row count");
        Ok(t)
    }

    /// Vocabulary over `tokens` (lower-cased), starting from `pretrained` when
    /// given; words without a pretrained vector get a small random one.
    pub fn build<'a, R: Rng>(
        tokens: impl IntoIterator<Item = &'a str>,
        dim: usize,
        pretrained: Option<EmbeddingTable>,
        rng: &mut R,
    ) -> Result<Self> {
        let mut t = match pretrained {
            Some(p) if p.dim() != dim => {
                return Err(Error::Config(format!("embedding table has dimension {} but word_dim is {dim}", p.dim())))
            }
            Some(p) => p,
            None => Self::empty(dim),
        };
        for tok in tokens {
            if t.lookup(tok).is_none() {
                t.push_token(&tok.to_lowercase());
            }
        }
        let old = t.matrix.nrows();
        let mut m = Array2::zeros((t.tokens.len(), dim));
        m.slice_mut(ndarray::s![..old, ..]).assign(&t.matrix);
        for r in 1..t.tokens.len() {
            if r >= old || r == UNK {
                for c in 0..dim {
                    m[[r, c]] = rng.gen_range(-0.1..0.1);
                }
            }
        }
        t.matrix = m;
        Ok(t)
    }

    /// Same vocabulary with a zero matrix; used when restoring checkpoints.
    pub fn from_tokens(tokens: Vec<String>, dim: usize) -> Result<Self> {
        if tokens.get(PAD).map(String::as_str) != Some("<pad>") || tokens.get(UNK).map(String::as_str) != Some("<unk>")
        {
            return Err(Error::Checkpoint("vocabulary lacks <pad>/<unk> rows".into()));
        }
        let mut t = Self::empty(dim);
        for tok in &tokens[2..] {
            t.push_token(tok);
        }
        t.matrix = Array2::zeros((t.tokens.len(), dim));
        Ok(t)
    }

    fn lookup(&self, token: &str) -> Option<usize> {
        self.index.get(token).or_else(|| self.index.get(&token.to_lowercase())).copied()
    }

    /// Row for `token`: exact match, then lower-cased, then unknown.
    pub fn id(&self, token: &str) -> usize {
        self.lookup(token).unwrap_or(UNK)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Character inventory for the subword CNN (0 = padding, 1 = unknown).
#[derive(Debug, Clone, PartialEq)]
pub struct CharVocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl CharVocab {
    pub fn build<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let mut chars: Vec<char> = words.into_iter().flat_map(str::chars).collect();
        chars.sort_unstable();
        chars.dedup();
        Self::from_chars(chars)
    }

    pub fn from_chars(chars: Vec<char>) -> Self {
        let index = chars.iter().enumerate().map(|(i, &c)| (c, i + 2)).collect();
        Self { chars, index }
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn len(&self) -> usize {
        self.chars.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn ids(&self, word: &str) -> Vec<usize> {
        word.chars().map(|c| self.index.get(&c).copied().unwrap_or(UNK)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn text_table_with_header() {
        let src = "3 2\nthe 0.1 0.2\nsaid 1 2\nran -1 0.5\n";
        let t = EmbeddingTable::from_reader(src.as_bytes()).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(t.dim(), 2);
        assert_eq!(t.matrix.row(t.id("said")).to_vec(), vec![1.0, 2.0]);
        assert_eq!(t.id("Said"), t.id("said"));
        assert_eq!(t.id("walked"), UNK);
    }

    #[test]
    fn ragged_table_is_rejected() {
        assert!(EmbeddingTable::from_reader("a 1 2\nb 1\n".as_bytes()).is_err());
    }

    #[test]
    fn build_keeps_pretrained_rows_and_adds_new_words() {
        let pre = EmbeddingTable::from_reader("said 1 2\n".as_bytes()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = EmbeddingTable::build(["He", "said", "hello"], 2, Some(pre), &mut rng).unwrap();
        assert_eq!(t.matrix.row(t.id("said")).to_vec(), vec![1.0, 2.0]);
        assert_ne!(t.id("hello"), UNK);
        assert_eq!(t.id("HE"), t.id("he"));
        assert!(t.matrix.row(PAD).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let pre = EmbeddingTable::from_reader("said 1 2\n".as_bytes()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(EmbeddingTable::build(["x"], 3, Some(pre), &mut rng).is_err());
    }

    #[test]
    fn unseen_chars_map_to_unknown() {
        let v = CharVocab::build(["ab"]);
        assert_eq!(v.ids("abz"), vec![2, 3, UNK]);
    }
}
