//! Prompt-based span selection: the sentence goes through an encoder-decoder
//! backbone, a class-name prompt is decoded against the same encoding, and a
//! start/end selector scores context positions for every prompt slot.

mod backbone;
mod config;
mod model;
mod prompt;
mod span;
mod tokenizer;
mod train;

#[cfg(test)]
mod tests;

pub use backbone::{Backbone, BackboneRegistry, BackboneSpec};
pub use config::PromptModelConfig;
pub use model::{
    build_instances, encode_context, ContextEncoding, PromptCheckpoint, PromptInstance, PromptModel, SlotTrace,
    PROMPT_CHECKPOINT_FORMAT,
};
pub use prompt::{build_prompt, slot_labels, PromptTemplate, SlotSpan};
pub use span::{
    select_span, select_span_within, slot_feature, slot_logits, slot_loss, softmax, span_logits, span_loss,
    SpanPrediction, SpanSelector,
};
pub use tokenizer::{HashedTokenizer, Piece, SubwordTokenizer, BOS, EOS, HASHED_TOKENIZER_ID, MASK, PAD, UNK};
pub use train::{
    evaluate_prompt_model, instances_for, prompt_batch_gradients, span_recovery, train_prompt_model,
    train_prompt_model_with,
};
