use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::synthetic::synthetic_corpus;
use crate::corpus::{parse_brat, segment_story, Corpus, EventClass, LabelMode, Split};
use crate::nn::worst_gradient_error;

fn all_train(corpus: Corpus) -> Corpus {
    let ids: Vec<String> = corpus.stories.iter().map(|s| s.id.clone()).collect();
    crate::corpus::split_corpus(corpus, &ids, &[], &[]).unwrap()
}

fn small(mode: LabelMode) -> TaggerConfig {
    TaggerConfig { hidden_dim: 16, word_dim: 16, label_scheme: mode, epochs: 10, ..TaggerConfig::default() }
}

fn random_model(config: &TaggerConfig, corpus: &Corpus, seed: u64) -> TaggerModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tokens: Vec<&str> =
        corpus.all_sentences().flat_map(|(_, s)| s.tokens.iter().map(|t| t.surface.as_str())).collect();
    let words = EmbeddingTable::build(tokens.iter().copied(), config.word_dim, None, &mut rng).unwrap();
    let chars = CharVocab::build(tokens.iter().copied());
    TaggerModel::new(config.clone(), words, Some(chars), &mut rng).unwrap()
}

#[test]
fn bio_labels_become_character_mentions() {
    let story = segment_story(parse_brat("s", "He said no.", "").unwrap()).unwrap();
    let corpus = Corpus::new(vec![story]);
    let seqs = build_sequences(corpus.all_sentences(), &small(LabelMode::Classify), false).unwrap();
    let mode = LabelMode::Classify;
    let b_com = mode.index(crate::corpus::BioLabel::B(crate::corpus::Tag::Class(EventClass::Communication)));
    let none = labels_to_mentions(&seqs[0], mode, &[0, 0, 0, 0], &[1.0; 4]);
    assert!(none[0].1.is_empty());
    let one = labels_to_mentions(&seqs[0], mode, &[0, b_com, 0, 0], &[0.5, 0.9, 0.5, 0.5]);
    let m = &one[0].1[0];
    assert_eq!((m.span.start, m.span.end, m.span.surface.as_str()), (3, 7, "said"));
    assert_eq!(m.event_class, Some(EventClass::Communication));
    assert!((m.score - 0.9).abs() < 1e-12);
}

#[test]
fn full_loss_gradients_match_finite_differences() {
    let corpus = synthetic_corpus(1, 2, 4);
    let variants = [
        TaggerConfig {
            use_char_cnn: true,
            use_sentence_cnn: true,
            use_crf: true,
            use_document_context: true,
            label_scheme: LabelMode::Classify,
            ..small(LabelMode::Classify)
        },
        small(LabelMode::Classify),
        TaggerConfig { bidirectional: false, ..small(LabelMode::Detect) },
    ];
    for config in variants {
        let config = TaggerConfig { hidden_dim: 8, word_dim: 6, char_dim: 4, ..config };
        let mut model = random_model(&config, &corpus, 9);
        let seqs = build_sequences(corpus.all_sentences(), &config, true).unwrap();
        let arch = model.clone();
        let worst = worst_gradient_error(
            &mut model.store,
            |store| {
                let mut m = arch.clone();
                m.store = store.clone();
                let refs: Vec<&Sequence> = seqs.iter().collect();
                batch_gradients(&m, &refs).unwrap()
            },
            24,
        );
        assert!(worst.error < 1e-4, "{config:?}: {worst:?}");
        assert!(worst.kinks * 20 <= worst.checked, "{config:?}: {worst:?}");
    }
}

#[test]
fn training_loss_strictly_decreases_early() {
    let corpus = all_train(synthetic_corpus(4, 5, 21));
    assert_eq!(corpus.sentences_in(Split::Train).count(), 20);
    let (_, log) = train_tagger(&small(LabelMode::Classify), &corpus).unwrap();
    assert_eq!(log.epoch_losses.len(), 10);
    for w in log.epoch_losses.windows(2) {
        assert!(w[1] < w[0], "{:?}", log.epoch_losses);
    }
}

#[test]
fn overfits_fifty_sentences() {
    let corpus = all_train(synthetic_corpus(10, 5, 2));
    let config = TaggerConfig { epochs: 40, learning_rate: 1e-2, ..small(LabelMode::Classify) };
    let (model, _) = train_tagger(&config, &corpus).unwrap();
    let acc = token_accuracy(&model, corpus.sentences_in(Split::Train)).unwrap();
    assert!(acc >= 0.99, "token accuracy {acc}");
}

#[test]
fn empty_train_split_is_config_error() {
    let corpus = synthetic_corpus(2, 2, 0);
    assert!(matches!(train_tagger(&small(LabelMode::Detect), &corpus), Err(crate::Error::Config(_))));
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let corpus = synthetic_corpus(2, 4, 5);
    let config = TaggerConfig { use_char_cnn: true, use_crf: true, ..small(LabelMode::Classify) };
    let model = random_model(&config, &corpus, 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tagger.json");
    model.save(&path).unwrap();
    let back = TaggerModel::load(&path).unwrap();
    assert_eq!(back.predict_corpus(&corpus, None), model.predict_corpus(&corpus, None));
}

#[test]
fn document_mode_truncates_long_stories() {
    let corpus = synthetic_corpus(1, 6, 3);
    let config = TaggerConfig { use_document_context: true, max_sequence_len: 12, ..small(LabelMode::Detect) };
    let seqs = build_sequences(corpus.all_sentences(), &config, true).unwrap();
    assert_eq!(seqs.len(), 1);
    assert_eq!(seqs[0].len(), 12);
    assert_eq!(seqs[0].gold.as_ref().unwrap().len(), 12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn predicted_spans_stay_inside_sentences(seed in 0u64..1000, crf in any::<bool>(), doc in any::<bool>()) {
        let corpus = synthetic_corpus(1, 4, seed);
        let config = TaggerConfig {
            use_crf: crf,
            use_document_context: doc,
            ..small(LabelMode::Classify)
        };
        let model = random_model(&config, &corpus, seed);
        let preds = model.predict_corpus(&corpus, None);
        for (key, sentence) in corpus.all_sentences() {
            for m in &preds[&key] {
                prop_assert!(m.span.start < m.span.end);
                prop_assert!(m.span.start >= sentence.offset && m.span.end <= sentence.end());
            }
        }
    }
}
