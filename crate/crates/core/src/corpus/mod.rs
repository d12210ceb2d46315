//! Stories, BRAT annotations, segmentation and dataset bookkeeping.

mod brat;
mod class;
mod io;
mod jsonl;
mod labels;
mod segment;
mod split;
mod stats;
pub mod synthetic;
mod text;
mod types;
mod validate;

pub use brat::{parse_brat, write_brat};
pub use class::EventClass;
pub(crate) use io::is_manifest;
pub use io::{load_brat_dir, read_brat_file, story_id, text_files, write_brat_dir};
pub use jsonl::{
    corpus_from_records, corpus_records, predictions_from_records, read_jsonl, write_jsonl, MentionRecord,
    PredictedMention, SentenceRecord,
};
pub use labels::{decode_label_sequence, to_label_sequence, BioLabel, LabelMode, Tag, TokenSpan};
pub use segment::{align_spans, segment_story};
pub use split::{read_split_manifest, seeded_split, split_corpus, write_split_manifest};
pub use stats::{compute_stats, compute_stats_top_k, DatasetStats, SourceCounts, TriggerRate, DEFAULT_TOP_K};
pub use text::{split_sentences, tokenize};
pub use types::{
    AlignedMention, AnnotatedSentence, Corpus, EventMention, Provenance, SentenceKey, Source, Split, Story, Token,
    TriggerSpan,
};
pub use validate::{validate_annotations, validate_brat, Violation, ViolationKind};
