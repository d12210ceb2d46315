use serde::{Deserialize, Serialize};

use crate::corpus::LabelMode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptModelConfig {
    pub mode: LabelMode,
    /// Registry name of the backbone.
    pub backbone: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub warmup_fraction: f64,
    /// Longest selectable span, in subwords (α).
    pub max_span_length: usize,
    pub max_grad_norm: f64,
    /// Context budget in subwords, sentinels included.
    pub max_encoder_len: usize,
    pub max_decoder_len: usize,
    /// One selector per slot instead of a shared pair.
    pub per_slot_selector: bool,
    /// Train only the span selector.
    pub freeze_backbone: bool,
    /// Cap on mask-and-repeat passes in detect mode.
    pub max_detect_iterations: usize,
    /// Evaluate on dev every this many epochs (and after the last).
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for PromptModelConfig {
    fn default() -> Self {
        Self {
            mode: LabelMode::Classify,
            backbone: "toy".into(),
            epochs: 1000,
            batch_size: 4,
            learning_rate: 4e-5,
            weight_decay: 0.01,
            warmup_fraction: 0.1,
            max_span_length: 10,
            max_grad_norm: 5.0,
            max_encoder_len: 500,
            max_decoder_len: 80,
            per_slot_selector: false,
            freeze_backbone: false,
            max_detect_iterations: 16,
            eval_every: 1,
            seed: 42,
        }
    }
}

impl PromptModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("max_span_length", self.max_span_length),
            ("max_decoder_len", self.max_decoder_len),
            ("max_detect_iterations", self.max_detect_iterations),
            ("eval_every", self.eval_every),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.max_encoder_len < 3 {
            return Err(Error::Config("max_encoder_len must leave room for two sentinels and a token".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.max_grad_norm > 0.0) {
            return Err(Error::Config("learning_rate and max_grad_norm must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) || self.weight_decay < 0.0 {
            return Err(Error::Config("warmup_fraction must lie in [0, 1] and weight_decay be non-negative".into()));
        }
        Ok(())
    }
}
