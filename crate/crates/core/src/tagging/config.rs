use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::LabelMode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaggerConfig {
    /// Hidden size per direction.
    pub hidden_dim: usize,
    pub bidirectional: bool,
    pub use_char_cnn: bool,
    pub use_sentence_cnn: bool,
    pub use_crf: bool,
    /// Whole stories instead of sentences as sequences.
    pub use_document_context: bool,
    pub label_scheme: LabelMode,
    /// Label only the first token of each trigger.
    pub single_token_labels: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub word_dim: usize,
    pub char_dim: usize,
    /// Text-format embedding table (`token v1 … vd` per line).
    pub embeddings: Option<PathBuf>,
    pub max_sequence_len: usize,
    pub seed: u64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 100,
            bidirectional: true,
            use_char_cnn: false,
            use_sentence_cnn: false,
            use_crf: false,
            use_document_context: false,
            label_scheme: LabelMode::Detect,
            single_token_labels: false,
            epochs: 1000,
            batch_size: 16,
            learning_rate: 1e-3,
            word_dim: 100,
            char_dim: 25,
            embeddings: None,
            max_sequence_len: 2048,
            seed: 42,
        }
    }
}

impl TaggerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden_dim", self.hidden_dim),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("word_dim", self.word_dim),
            ("char_dim", self.char_dim),
            ("max_sequence_len", self.max_sequence_len),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }

    /// Per-token state size coming out of the recurrent encoder.
    pub fn encoder_dim(&self) -> usize {
        self.hidden_dim * if self.bidirectional { 2 } else { 1 }
    }
}
