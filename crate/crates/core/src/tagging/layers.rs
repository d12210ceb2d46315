use ndarray::Array2;
use rand::Rng;

use super::position::PositionBucketizer;
use super::vocab::PAD;
use crate::nn::{Graph, ParamId, ParamStore, Var};

/// Single-direction LSTM with gates packed as `[i | f | g | o]`.
#[derive(Debug, Clone, Copy)]
pub struct Lstm {
    w: ParamId,
    u: ParamId,
    b: ParamId,
    hidden: usize,
}

impl Lstm {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let w = store.add_xavier(format!("{name}.w"), input, 4 * hidden, rng);
        let u = store.add_xavier(format!("{name}.u"), hidden, 4 * hidden, rng);
        let mut bias = Array2::zeros((1, 4 * hidden));
        bias.slice_mut(ndarray::s![.., hidden..2 * hidden]).fill(1.0);
        let b = store.add(format!("{name}.bias"), bias);
        Self { w, u, b, hidden }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// `n × input` to `n × hidden`. With `reverse` the sequence is read
    /// right to left; output rows stay in input order.
    pub fn run(&self, g: &mut Graph, xs: Var, reverse: bool) -> Var {
        let n = g.shape(xs).0;
        let h = self.hidden;
        let w = g.param(self.w);
        let u = g.param(self.u);
        let b = g.param(self.b);
        let xw = g.matmul(xs, w);
        let xw = g.add_row(xw, b);
        let mut states = Vec::with_capacity(n);
        let mut prev: Option<(Var, Var)> = None;
        let order: Vec<usize> = if reverse { (0..n).rev().collect() } else { (0..n).collect() };
        for t in order {
            let mut z = g.slice_rows(xw, t, 1);
            if let Some((hp, _)) = prev {
                let r = g.matmul(hp, u);
                z = g.add(z, r);
            }
            let zi = g.slice_cols(z, 0, h);
            let zf = g.slice_cols(z, h, h);
            let zg = g.slice_cols(z, 2 * h, h);
            let zo = g.slice_cols(z, 3 * h, h);
            let i = g.sigmoid(zi);
            let f = g.sigmoid(zf);
            let cand = g.tanh(zg);
            let o = g.sigmoid(zo);
            let mut c = g.mul(i, cand);
            if let Some((_, cp)) = prev {
                let keep = g.mul(f, cp);
                c = g.add(c, keep);
            }
            let tc = g.tanh(c);
            let hs = g.mul(o, tc);
            states.push(hs);
            prev = Some((hs, c));
        }
        if reverse {
            states.reverse();
        }
        g.concat_rows(&states)
    }
}

pub const CHAR_WIDTHS: [usize; 4] = [2, 3, 4, 5];
pub const CHAR_FILTERS: usize = 25;
/// Words are padded to at least the widest kernel.
pub const MIN_CHAR_LEN: usize = 5;

#[derive(Debug, Clone)]
pub struct CharCnn {
    emb: ParamId,
    banks: Vec<(usize, ParamId, ParamId)>,
}

impl CharCnn {
    pub const OUTPUT_DIM: usize = CHAR_WIDTHS.len() * CHAR_FILTERS;

    pub fn new<R: Rng>(store: &mut ParamStore, num_chars: usize, char_dim: usize, rng: &mut R) -> Self {
        let emb = store.add_uniform("char.embedding", num_chars, char_dim, 0.1, rng);
        let banks = CHAR_WIDTHS
            .iter()
            .map(|&w| {
                (
                    w,
                    store.add_xavier(format!("char.conv{w}.w"), w * char_dim, CHAR_FILTERS, rng),
                    store.add_zeros(format!("char.conv{w}.bias"), 1, CHAR_FILTERS),
                )
            })
            .collect();
        Self { emb, banks }
    }

    /// One 100-dimensional row per word (character ids, unpadded).
    pub fn encode(&self, g: &mut Graph, words: &[Vec<usize>]) -> Var {
        let padded: Vec<Vec<usize>> = words
            .iter()
            .map(|w| {
                let mut w = w.clone();
                w.resize(w.len().max(MIN_CHAR_LEN), PAD);
                w
            })
            .collect();
        let all: Vec<usize> = padded.iter().flatten().copied().collect();
        let table = g.embed(self.emb, &all);
        let mut blocks = Vec::with_capacity(padded.len());
        let mut at = 0;
        for w in &padded {
            blocks.push(g.slice_rows(table, at, w.len()));
            at += w.len();
        }
        let mut per_width = Vec::with_capacity(self.banks.len());
        for &(width, wp, bp) in &self.banks {
            let windows: Vec<Var> = blocks.iter().map(|&b| g.windows(b, width)).collect();
            let stacked = g.concat_rows(&windows);
            let wv = g.param(wp);
            let bv = g.param(bp);
            let conv = g.matmul(stacked, wv);
            let conv = g.add_row(conv, bv);
            let act = g.relu(conv);
            let mut pooled = Vec::with_capacity(padded.len());
            let mut at = 0;
            for w in &padded {
                let rows = w.len() - width + 1;
                let part = g.slice_rows(act, at, rows);
                pooled.push(g.max_rows(part));
                at += rows;
            }
            per_width.push(g.concat_rows(&pooled));
        }
        g.concat_cols(&per_width)
    }
}

pub const SENTENCE_WIDTHS: [usize; 2] = [2, 3];
pub const SENTENCE_FILTERS: usize = 100;

/// Convolution over the words of a sentence together with their signed
/// distance to a target token, max-pooled into one vector per target.
#[derive(Debug, Clone)]
pub struct SentenceCnn {
    pos: ParamId,
    banks: Vec<(usize, ParamId, ParamId, ParamId)>,
}

impl SentenceCnn {
    pub const OUTPUT_DIM: usize = SENTENCE_WIDTHS.len() * SENTENCE_FILTERS;

    pub fn new<R: Rng>(store: &mut ParamStore, word_dim: usize, rng: &mut R) -> Self {
        let pd = PositionBucketizer::EMBEDDING_DIM;
        let pos = store.add_uniform("sent.position", PositionBucketizer::NUM_BUCKETS, pd, 0.1, rng);
        let banks = SENTENCE_WIDTHS
            .iter()
            .map(|&w| {
                // one weight matrix split by input block, so the word part
                // can be shared across targets
                let bound = (6.0 / (w * (word_dim + pd) + SENTENCE_FILTERS) as f64).sqrt();
                (
                    w,
                    store.add_uniform(format!("sent.conv{w}.word"), w * word_dim, SENTENCE_FILTERS, bound, rng),
                    store.add_uniform(format!("sent.conv{w}.pos"), w * pd, SENTENCE_FILTERS, bound, rng),
                    store.add_zeros(format!("sent.conv{w}.bias"), 1, SENTENCE_FILTERS),
                )
            })
            .collect();
        Self { pos, banks }
    }

    /// `n × d` word embeddings to `n × 200` features, one row per target.
    /// The sentence is padded with one zero word on each side.
    pub fn encode(&self, g: &mut Graph, words: Var) -> Var {
        let n = g.shape(words).0;
        let word_parts = self.word_parts(g, words);
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            rows.push(self.target_features(g, &word_parts, n, i));
        }
        g.concat_rows(&rows)
    }

    /// Word half of each convolution, shared by every target.
    fn word_parts(&self, g: &mut Graph, words: Var) -> Vec<Var> {
        let d = g.shape(words).1;
        let pad = g.input(Array2::zeros((1, d)));
        let padded = g.concat_rows(&[pad, words, pad]);
        self.banks
            .iter()
            .map(|&(width, ww, _, _)| {
                let win = g.windows(padded, width);
                let wv = g.param(ww);
                g.matmul(win, wv)
            })
            .collect()
    }

    fn target_features(&self, g: &mut Graph, word_parts: &[Var], n: usize, i: usize) -> Var {
        let buckets: Vec<usize> = (-1..=n as i64).map(|j| PositionBucketizer.index(j - i as i64)).collect();
        let pos = g.embed(self.pos, &buckets);
        let mut pooled = Vec::with_capacity(self.banks.len());
        for (&(width, _, wp, bp), &word_part) in self.banks.iter().zip(word_parts) {
            let win = g.windows(pos, width);
            let wv = g.param(wp);
            let pos_part = g.matmul(win, wv);
            let conv = g.add(word_part, pos_part);
            let bv = g.param(bp);
            let conv = g.add_row(conv, bv);
            let act = g.relu(conv);
            pooled.push(g.max_rows(act));
        }
        g.concat_cols(&pooled)
    }

    /// Feature vector `c_i` for one target token.
    pub fn features_for(&self, g: &mut Graph, words: Var, target: usize) -> Var {
        let n = g.shape(words).0;
        assert!(target < n, "sentence CNN target {target} outside {n} tokens");
        let word_parts = self.word_parts(g, words);
        self.target_features(g, &word_parts, n, target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(17)
    }

    #[test]
    fn char_cnn_shapes_and_sensitivity() {
        let mut store = ParamStore::new();
        let cnn = CharCnn::new(&mut store, 30, 8, &mut rng());
        let mut g = Graph::new(&store);
        let words = vec![vec![2], vec![2, 3, 4, 5, 6, 7, 8], vec![8, 7, 6, 5, 4, 3, 2], vec![2, 3, 4, 5, 6, 7, 9]];
        let out = cnn.encode(&mut g, &words);
        assert_eq!(g.shape(out), (4, 100));
        let v = g.value(out);
        assert_ne!(v.row(1), v.row(2), "reversed characters");
        assert_ne!(v.row(1), v.row(3), "different suffix");
    }

    #[test]
    fn lstm_shapes_and_reverse_symmetry() {
        let mut store = ParamStore::new();
        let lstm = Lstm::new(&mut store, "l", 6, 100, &mut rng());
        let x = Array2::from_shape_fn((5, 6), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5);
        let mut rev = x.clone();
        rev.invert_axis(ndarray::Axis(0));
        let mut g = Graph::new(&store);
        let one = g.input(x.slice(ndarray::s![0..1, ..]).to_owned());
        let single = lstm.run(&mut g, one, false);
        assert_eq!(g.shape(single), (1, 100));
        let xv = g.input(x);
        let rv = g.input(rev);
        let back = lstm.run(&mut g, xv, true);
        let fwd_on_rev = lstm.run(&mut g, rv, false);
        let (b, f) = (g.value(back).clone(), g.value(fwd_on_rev).clone());
        for t in 0..5 {
            for c in 0..100 {
                assert!((b[[t, c]] - f[[4 - t, c]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sentence_cnn_rows_match_single_target_path() {
        let mut store = ParamStore::new();
        let cnn = SentenceCnn::new(&mut store, 4, &mut rng());
        let x = Array2::from_shape_fn((3, 4), |(i, j)| (i as f64 - j as f64) * 0.3);
        let mut g = Graph::new(&store);
        let xv = g.input(x);
        let all = cnn.encode(&mut g, xv);
        assert_eq!(g.shape(all), (3, SentenceCnn::OUTPUT_DIM));
        let one = cnn.features_for(&mut g, xv, 2);
        assert_eq!(g.value(all).row(2), g.value(one).row(0));
        // single-token sentences still have enough rows for the tri-gram bank
        let single = g.input(Array2::ones((1, 4)));
        let s = cnn.encode(&mut g, single);
        assert_eq!(g.shape(s), (1, 200));
    }
}
