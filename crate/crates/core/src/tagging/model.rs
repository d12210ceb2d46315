use std::collections::BTreeMap;
use std::fs;
use std::ops::Range;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::crf;
use super::layers::{CharCnn, Lstm, SentenceCnn};
use super::vocab::{CharVocab, EmbeddingTable};
use super::TaggerConfig;
use crate::corpus::{
    decode_label_sequence, to_label_sequence, AnnotatedSentence, Corpus, LabelMode, PredictedMention, SentenceKey,
    Split, Token, TriggerSpan,
};
use crate::error::{Error, Result};
use crate::nn::{Graph, Linear, Mat, ParamId, ParamSnapshot, ParamStore, Var};

pub const CHECKPOINT_FORMAT: &str = "story-events/tagger-v1";

/// One tagger input: a sentence, or a whole story in document mode.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub keys: Vec<SentenceKey>,
    /// Token range of each sentence inside the sequence.
    pub ranges: Vec<Range<usize>>,
    pub tokens: Vec<Token>,
    /// `(char offset, text)` of each sentence, for recovering surfaces.
    pub texts: Vec<(usize, String)>,
    pub gold: Option<Vec<usize>>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Keep the earliest of any overlapping mentions so the sentence can be
/// written as BIO labels.
fn without_overlaps(sentence: &AnnotatedSentence) -> AnnotatedSentence {
    let mut out = sentence.clone();
    let mut taken: Vec<(usize, usize)> = Vec::new();
    out.mentions.retain(|m| match m.tokens {
        Some((a, b)) if taken.iter().any(|&(x, y)| a <= y && x <= b) => {
            log::warn!("dropping overlapping mention {} from tagger labels", m.mention);
            false
        }
        Some(r) => {
            taken.push(r);
            true
        }
        None => true,
    });
    out
}

/// Group sentences into sequences per `config`, attaching gold labels when
/// asked. Sequences longer than `max_sequence_len` are truncated.
pub fn build_sequences<'a>(
    sentences: impl IntoIterator<Item = (SentenceKey, &'a AnnotatedSentence)>,
    config: &TaggerConfig,
    with_gold: bool,
) -> Result<Vec<Sequence>> {
    let mut out: Vec<Sequence> = Vec::new();
    for (key, sentence) in sentences {
        if sentence.tokens.is_empty() {
            continue;
        }
        let labels = if with_gold {
            let clean = without_overlaps(sentence);
            let mode = config.label_scheme;
            Some(
                to_label_sequence(&clean, mode, config.single_token_labels)?
                    .into_iter()
                    .map(|l| mode.index(l))
                    .collect::<Vec<_>>(),
            )
        } else {
            None
        };
        let extend = config.use_document_context && out.last().is_some_and(|s| s.keys[0].story_id == key.story_id);
        if !extend {
            out.push(Sequence {
                keys: Vec::new(),
                ranges: Vec::new(),
                tokens: Vec::new(),
                texts: Vec::new(),
                gold: with_gold.then(Vec::new),
            });
        }
        let seq = out.last_mut().expect("just pushed");
        let room = config.max_sequence_len.saturating_sub(seq.tokens.len());
        if room == 0 {
            log::warn!(
                "sequence for {} exceeds {} tokens; sentence {} dropped",
                key.story_id,
                config.max_sequence_len,
                key.sentence
            );
            continue;
        }
        let take = sentence.tokens.len().min(room);
        if take < sentence.tokens.len() {
            log::warn!("truncating {}#{} to {take} of {} tokens", key.story_id, key.sentence, sentence.tokens.len());
        }
        let start = seq.tokens.len();
        seq.tokens.extend(sentence.tokens[..take].iter().cloned());
        seq.ranges.push(start..start + take);
        seq.texts.push((sentence.offset, sentence.text.clone()));
        seq.keys.push(key);
        if let (Some(g), Some(l)) = (seq.gold.as_mut(), labels) {
            g.extend(&l[..take]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct Arch {
    word_emb: ParamId,
    char_cnn: Option<CharCnn>,
    sent_cnn: Option<SentenceCnn>,
    fwd: Lstm,
    bwd: Option<Lstm>,
    out: Linear,
    transitions: Option<ParamId>,
}

#[derive(Debug, Clone)]
pub struct TaggerModel {
    pub config: TaggerConfig,
    words: EmbeddingTable,
    chars: Option<CharVocab>,
    pub store: ParamStore,
    arch: Arch,
}

impl TaggerModel {
    /// Allocate every parameter. The word embedding rows come from `words`.
    pub fn new<R: Rng>(
        config: TaggerConfig,
        mut words: EmbeddingTable,
        chars: Option<CharVocab>,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        if words.dim() != config.word_dim {
            return Err(Error::Config(format!(
                "word table has dimension {} but word_dim is {}",
                words.dim(),
                config.word_dim
            )));
        }
        let chars = if config.use_char_cnn {
            Some(chars.ok_or_else(|| Error::Config("char CNN needs a character vocabulary".into()))?)
        } else {
            None
        };
        let mut store = ParamStore::new();
        let matrix = std::mem::replace(&mut words.matrix, Array2::zeros((0, config.word_dim)));
        let word_emb = store.add("word.embedding", matrix);
        let char_cnn = chars.as_ref().map(|c| CharCnn::new(&mut store, c.len(), config.char_dim, rng));
        let input = config.word_dim + if char_cnn.is_some() { CharCnn::OUTPUT_DIM } else { 0 };
        let fwd = Lstm::new(&mut store, "lstm.fwd", input, config.hidden_dim, rng);
        let bwd = config.bidirectional.then(|| Lstm::new(&mut store, "lstm.bwd", input, config.hidden_dim, rng));
        let sent_cnn = config.use_sentence_cnn.then(|| SentenceCnn::new(&mut store, config.word_dim, rng));
        let features = config.encoder_dim() + if sent_cnn.is_some() { SentenceCnn::OUTPUT_DIM } else { 0 };
        let labels = config.label_scheme.num_labels();
        let out = Linear::new(&mut store, "output", features, labels, rng);
        let transitions = config.use_crf.then(|| store.add_zeros("crf.transitions", labels + 2, labels + 2));
        Ok(Self {
            config,
            words,
            chars,
            store,
            arch: Arch { word_emb, char_cnn, sent_cnn, fwd, bwd, out, transitions },
        })
    }

    pub fn mode(&self) -> LabelMode {
        self.config.label_scheme
    }

    pub fn num_parameters(&self) -> usize {
        self.store.num_scalars()
    }

    /// Per-token features: recurrent states (`hidden` per direction), then
    /// the sentence-CNN vector when enabled.
    pub fn encode_sequence(&self, g: &mut Graph, seq: &Sequence) -> Var {
        let ids: Vec<usize> = seq.tokens.iter().map(|t| self.words.id(&t.surface)).collect();
        let words = g.embed(self.arch.word_emb, &ids);
        let mut x = words;
        if let (Some(cnn), Some(chars)) = (&self.arch.char_cnn, &self.chars) {
            let char_ids: Vec<Vec<usize>> = seq.tokens.iter().map(|t| chars.ids(&t.surface)).collect();
            let c = cnn.encode(g, &char_ids);
            x = g.concat_cols(&[x, c]);
        }
        let mut h = self.arch.fwd.run(g, x, false);
        if let Some(bwd) = &self.arch.bwd {
            let b = bwd.run(g, x, true);
            h = g.concat_cols(&[h, b]);
        }
        if let Some(cnn) = &self.arch.sent_cnn {
            let parts: Vec<Var> = seq
                .ranges
                .iter()
                .map(|r| {
                    let sw = g.slice_rows(words, r.start, r.len());
                    cnn.encode(g, sw)
                })
                .collect();
            let c = g.concat_rows(&parts);
            h = g.concat_cols(&[h, c]);
        }
        h
    }

    /// Label scores, `n × L`.
    pub fn emissions(&self, g: &mut Graph, seq: &Sequence) -> Var {
        let h = self.encode_sequence(g, seq);
        self.arch.out.apply(g, h)
    }

    /// Training loss of one sequence: CRF negative log-likelihood, else
    /// categorical cross-entropy (classify) or per-label binary
    /// cross-entropy (detect).
    pub fn loss(&self, g: &mut Graph, seq: &Sequence) -> Result<Var> {
        let gold = seq.gold.as_ref().ok_or_else(|| Error::Data("sequence has no gold labels".into()))?;
        let e = self.emissions(g, seq);
        Ok(match (self.arch.transitions, self.mode()) {
            (Some(t), _) => {
                let tv = g.param(t);
                crf::crf_loss(g, e, tv, gold)
            }
            (None, LabelMode::Classify) => g.cross_entropy(e, gold),
            (None, LabelMode::Detect) => {
                let mut targets = Array2::zeros((gold.len(), self.mode().num_labels()));
                for (t, &y) in gold.iter().enumerate() {
                    targets[[t, y]] = 1.0;
                }
                g.bce_with_logits(e, &targets)
            }
        })
    }

    /// Dense label indices for a sequence.
    pub fn decode(&self, seq: &Sequence) -> (Vec<usize>, Mat) {
        let mut g = Graph::new(&self.store);
        let e = self.emissions(&mut g, seq);
        let e = g.value(e).clone();
        let labels = match self.arch.transitions {
            Some(t) => crf::viterbi(&e, self.store.get(t)),
            None => e
                .rows()
                .into_iter()
                .map(|r| {
                    r.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b }).0
                })
                .collect(),
        };
        (labels, e)
    }

    fn token_probs(&self, emissions: &Mat, labels: &[usize]) -> Vec<f64> {
        let bce = self.arch.transitions.is_none() && self.mode() == LabelMode::Detect;
        emissions
            .rows()
            .into_iter()
            .zip(labels)
            .map(|(row, &y)| {
                if bce {
                    crate::nn::sigmoid(row[y])
                } else {
                    let lse = crate::nn::log_sum_exp(row.iter().copied());
                    (row[y] - lse).exp()
                }
            })
            .collect()
    }

    /// Predicted mentions per sentence of the sequence. Scores are the mean
    /// per-token probability of the predicted labels.
    pub fn predict_sequence(&self, seq: &Sequence) -> Vec<(SentenceKey, Vec<PredictedMention>)> {
        let (labels, e) = self.decode(seq);
        let probs = self.token_probs(&e, &labels);
        labels_to_mentions(seq, self.mode(), &labels, &probs)
    }

    /// Tag a single sentence.
    pub fn predict_tags(&self, sentence: &AnnotatedSentence) -> Vec<PredictedMention> {
        let key = SentenceKey { story_id: String::new(), sentence: 0 };
        let mut cfg = self.config.clone();
        cfg.use_document_context = false;
        let seqs = build_sequences([(key, sentence)], &cfg, false).expect("no gold requested");
        seqs.iter().flat_map(|s| self.predict_sequence(s)).flat_map(|(_, m)| m).collect()
    }

    /// Predictions for every sentence of a split (or the whole corpus).
    pub fn predict_corpus(
        &self,
        corpus: &Corpus,
        split: Option<Split>,
    ) -> BTreeMap<SentenceKey, Vec<PredictedMention>> {
        let sentences: Vec<_> = match split {
            Some(s) => corpus.sentences_in(s).collect(),
            None => corpus.all_sentences().collect(),
        };
        let mut out: BTreeMap<_, _> = sentences.iter().map(|(k, _)| (k.clone(), Vec::new())).collect();
        let seqs = build_sequences(sentences, &self.config, false).expect("no gold requested");
        for seq in &seqs {
            out.extend(self.predict_sequence(seq));
        }
        out
    }

    pub fn to_checkpoint(&self) -> TaggerCheckpoint {
        TaggerCheckpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            config: self.config.clone(),
            vocab: self.words.tokens().to_vec(),
            chars: self.chars.as_ref().map(|c| c.chars().iter().collect()),
            params: self.store.to_snapshot(),
        }
    }

    pub fn from_checkpoint(ck: TaggerCheckpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("expected format {CHECKPOINT_FORMAT}, found {}", ck.format)));
        }
        let words = EmbeddingTable::from_tokens(ck.vocab, ck.config.word_dim)?;
        let chars = ck.chars.map(|s| CharVocab::from_chars(s.chars().collect()));
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut model = Self::new(ck.config, words, chars, &mut rng)?;
        model.store.load_snapshot(&ck.params)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let json = serde_json::to_string(&self.to_checkpoint())?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint(serde_json::from_str(&text)?).map_err(|e| e.in_file(path))
    }
}

/// Convert dense labels over a sequence into per-sentence mentions with
/// story-level character offsets; `probs[t]` is the confidence at token `t`.
pub fn labels_to_mentions(
    seq: &Sequence,
    mode: LabelMode,
    labels: &[usize],
    probs: &[f64],
) -> Vec<(SentenceKey, Vec<PredictedMention>)> {
    seq.keys
        .iter()
        .zip(&seq.ranges)
        .zip(&seq.texts)
        .map(|((key, range), (offset, text))| {
            let bio: Vec<_> = labels[range.clone()].iter().map(|&i| mode.label(i)).collect();
            let chars: Vec<char> = text.chars().collect();
            let mentions = decode_label_sequence(&bio)
                .into_iter()
                .map(|span| {
                    let first = &seq.tokens[range.start + span.first];
                    let last = &seq.tokens[range.start + span.last];
                    let surface: String = chars[first.start - offset..last.end - offset].iter().collect();
                    let p = &probs[range.start + span.first..=range.start + span.last];
                    PredictedMention {
                        span: TriggerSpan::new(first.start, last.end, surface),
                        event_class: span.tag.class(),
                        score: p.iter().sum::<f64>() / p.len() as f64,
                    }
                })
                .collect();
            (key.clone(), mentions)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerCheckpoint {
    pub format: String,
    pub config: TaggerConfig,
    pub vocab: Vec<String>,
    pub chars: Option<String>,
    pub params: ParamSnapshot,
}
