#![allow(dead_code)]

use std::path::{Path, PathBuf};

use story_events::cli::{ModelFamily, RunConfig};
use story_events::corpus::synthetic::synthetic_corpus;
use story_events::corpus::{split_corpus, write_brat_dir, write_split_manifest, Corpus};

/// Synthetic corpus of `n` stories split 3:1:1 by position.
pub fn split_synthetic(n: usize, sentences: usize, seed: u64) -> Corpus {
    let corpus = synthetic_corpus(n, sentences, seed);
    let ids: Vec<String> = corpus.stories.iter().map(|s| s.id.clone()).collect();
    let (a, b) = (n * 3 / 5, n * 4 / 5);
    split_corpus(corpus, &ids[..a], &ids[a..b], &ids[b..]).unwrap()
}

/// Write `corpus` as a BRAT directory with its split manifest.
pub fn write_brat_corpus(corpus: &Corpus, dir: &Path) -> PathBuf {
    write_brat_dir(&corpus.stories, dir).unwrap();
    write_split_manifest(corpus, dir).unwrap();
    dir.to_path_buf()
}

/// A fast prompt-model run over `corpus_dir`.
pub fn prompt_config(corpus_dir: &Path, out: &Path) -> RunConfig {
    let mut cfg = RunConfig { corpus: Some(corpus_dir.to_path_buf()), out: out.to_path_buf(), ..RunConfig::default() };
    for (k, v) in [
        ("prompt.backbone", "tiny"),
        ("prompt.epochs", "2"),
        ("prompt.learning_rate", "1e-3"),
        ("prompt.max_encoder_len", "60"),
        ("prompt.max_decoder_len", "60"),
    ] {
        cfg.set(k, v).unwrap();
    }
    cfg
}

/// A fast BiLSTM run over `corpus_dir`.
pub fn tagger_config(corpus_dir: &Path, out: &Path) -> RunConfig {
    let mut cfg = prompt_config(corpus_dir, out);
    cfg.model = ModelFamily::Tagger;
    for (k, v) in [
        ("tagger.hidden_dim", "8"),
        ("tagger.word_dim", "8"),
        ("tagger.epochs", "2"),
        ("tagger.label_scheme", "classify"),
    ] {
        cfg.set(k, v).unwrap();
    }
    cfg
}
