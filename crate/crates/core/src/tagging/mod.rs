//! Sequence-labelling baselines: (Bi)LSTM taggers with optional character
//! and sentence CNN features, document-length sequences and a CRF head.

mod config;
pub mod crf;
mod layers;
mod model;
mod position;
mod train;
mod vocab;

#[cfg(test)]
mod tests;

pub use config::TaggerConfig;
pub use layers::{CharCnn, Lstm, SentenceCnn, CHAR_FILTERS, CHAR_WIDTHS, MIN_CHAR_LEN};
pub use model::{build_sequences, labels_to_mentions, Sequence, TaggerCheckpoint, TaggerModel, CHECKPOINT_FORMAT};
pub use position::{PositionBucket, PositionBucketizer};
pub use train::{
    batch_gradients, evaluate_tagger, selection_score, token_accuracy, train_tagger, train_tagger_with, TrainingLog,
};
pub use vocab::{CharVocab, EmbeddingTable};

/// Encode one word with a character CNN, returning its 100 features.
pub fn char_cnn_encode(cnn: &CharCnn, store: &crate::nn::ParamStore, chars: &CharVocab, word: &str) -> Vec<f64> {
    let mut g = crate::nn::Graph::new(store);
    let v = cnn.encode(&mut g, &[chars.ids(word)]);
    g.value(v).iter().copied().collect()
}
