use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::synthetic::synthetic_corpus;
use crate::corpus::{parse_brat, segment_story, Corpus, LabelMode, Split, Tag};
use crate::nn::{worst_gradient_error, Graph};

fn all_train(corpus: Corpus) -> Corpus {
    let ids: Vec<String> = corpus.stories.iter().map(|s| s.id.clone()).collect();
    crate::corpus::split_corpus(corpus, &ids, &[], &[]).unwrap()
}

fn tiny() -> BackboneSpec {
    BackboneRegistry::default().get("tiny").unwrap().clone()
}

fn config(mode: LabelMode) -> PromptModelConfig {
    PromptModelConfig {
        mode,
        backbone: "tiny".into(),
        max_encoder_len: 60,
        max_decoder_len: 60,
        ..PromptModelConfig::default()
    }
}

fn model(mode: LabelMode, seed: u64) -> PromptModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PromptModel::new(config(mode), &tiny(), &mut rng).unwrap()
}

fn sentence(text: &str, ann: &str) -> Corpus {
    Corpus::new(vec![segment_story(parse_brat("s", text, ann).unwrap()).unwrap()])
}

#[test]
fn hidden_state_shapes() {
    let m = model(LabelMode::Classify, 0);
    let mut g = Graph::new(&m.store);
    let ids = [BOS, 40, 41, 42, 43, EOS];
    let (hx, hp) = m.encode_and_decode(&mut g, &ids);
    assert_eq!(g.shape(hx), (6, 8));
    assert_eq!(g.shape(hp), (m.template.ids.len(), 8));
}

#[test]
fn prompt_states_depend_on_the_context() {
    let m = model(LabelMode::Classify, 1);
    let mut g = Graph::new(&m.store);
    let (_, a) = m.encode_and_decode(&mut g, &[BOS, 40, 41, 42, EOS]);
    let (_, b) = m.encode_and_decode(&mut g, &[BOS, 40, 77, 42, EOS]);
    let (_, c) = m.encode_and_decode(&mut g, &[BOS, 40, 41, 42, EOS]);
    assert_ne!(g.value(a), g.value(b));
    assert_eq!(g.value(a), g.value(c));
}

#[test]
fn classify_instances_keep_the_earliest_mention_per_class() {
    let corpus = sentence(
        "Ravi said hello and then said goodbye.",
        "T1\tCOMMUNICATION 5 9\tsaid\nT2\tCOMMUNICATION 25 29\tsaid\n",
    );
    let m = model(LabelMode::Classify, 0);
    let inst = instances_for(&m, corpus.all_sentences());
    assert_eq!(inst.len(), 1);
    let com =
        m.template.slots.iter().position(|s| s.label == Tag::Class(crate::corpus::EventClass::Communication)).unwrap();
    // "Ravi" is one piece, so "said" sits at position 2 and ends before 3
    assert_eq!(inst[0].gold[com], (2, 3));
    assert_eq!(inst[0].gold.iter().filter(|&&g| g != (0, 0)).count(), 1);
}

#[test]
fn detect_instances_mask_earlier_triggers() {
    let corpus = sentence("Ravi said he went home.", "T1\tCOMMUNICATION 5 9\tsaid\nT2\tMOVEMENT 13 17\twent\n");
    let m = model(LabelMode::Detect, 0);
    let inst = instances_for(&m, corpus.all_sentences());
    let golds: Vec<_> = inst.iter().map(|i| i.gold[0]).collect();
    assert_eq!(golds, [(2, 3), (4, 5), (0, 0)]);
    assert_ne!(inst[0].ids[2], MASK);
    assert_eq!(inst[1].ids[2], MASK);
    assert_eq!((inst[2].ids[2], inst[2].ids[4]), (MASK, MASK));
}

#[test]
fn long_contexts_are_truncated() {
    let text = "word ".repeat(80);
    let corpus = sentence(text.trim_end(), "T1\tOTHERS 350 354\tword\n");
    let m = model(LabelMode::Detect, 0);
    let (_, s) = corpus.all_sentences().next().unwrap();
    let ctx = m.encode(s);
    assert!(ctx.truncated);
    assert_eq!(ctx.len(), 60);
    let inst = instances_for(&m, corpus.all_sentences());
    assert_eq!(inst.len(), 1, "the out-of-window mention is dropped");
}

#[test]
fn composite_gradients_match_finite_differences() {
    let corpus = synthetic_corpus(1, 2, 8);
    for (mode, per_slot) in [(LabelMode::Classify, false), (LabelMode::Classify, true), (LabelMode::Detect, false)] {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = PromptModelConfig { per_slot_selector: per_slot, ..config(mode) };
        let mut m = PromptModel::new(cfg, &tiny(), &mut rng).unwrap();
        let inst = instances_for(&m, corpus.all_sentences());
        let arch = m.clone();
        let worst = worst_gradient_error(
            &mut m.store,
            |store| {
                let mut probe = arch.clone();
                probe.store = store.clone();
                let refs: Vec<&PromptInstance> = inst.iter().take(3).collect();
                prompt_batch_gradients(&probe, &refs).unwrap()
            },
            12,
        );
        assert!(worst.error < 1e-4, "{mode:?}/{per_slot}: {worst:?}");
        assert_eq!(worst.kinks, 0, "{mode:?}/{per_slot}: {worst:?}");
    }
}

#[test]
fn distributions_are_normalised_during_extraction() {
    let corpus = synthetic_corpus(2, 4, 3);
    for mode in [LabelMode::Classify, LabelMode::Detect] {
        let m = model(mode, 2);
        for (_, s) in corpus.all_sentences() {
            let (_, traces) = m.extract_events_traced(s).unwrap();
            assert!(!traces.is_empty());
            for t in traces {
                assert!((t.p_start.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                assert!((t.p_end.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn extraction_is_deterministic() {
    let corpus = synthetic_corpus(2, 3, 6);
    let m = model(LabelMode::Detect, 5);
    assert_eq!(m.predict_corpus(&corpus, None).unwrap(), m.predict_corpus(&corpus, None).unwrap());
}

#[test]
fn training_learns_a_handful_of_sentences() {
    let corpus = all_train(synthetic_corpus(2, 4, 12));
    let cfg =
        PromptModelConfig { epochs: 40, learning_rate: 1e-3, backbone: "toy".into(), ..config(LabelMode::Classify) };
    let (m, log) = train_prompt_model(&cfg, &corpus, &BackboneSpec::toy()).unwrap();
    assert!(log.epoch_losses.last().unwrap() < &(0.2 * log.epoch_losses[0]), "{:?}", log.epoch_losses);
    let rec = span_recovery(&m, corpus.sentences_in(Split::Train)).unwrap();
    assert!(rec >= 0.9, "recovery {rec}");
}

#[test]
fn frozen_backbone_stays_fixed() {
    let corpus = all_train(synthetic_corpus(1, 3, 2));
    let cfg = PromptModelConfig { epochs: 2, freeze_backbone: true, ..config(LabelMode::Detect) };
    let (trained, _) = train_prompt_model(&cfg, &corpus, &tiny()).unwrap();
    let fresh = PromptModel::new(cfg, &tiny(), &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
    for &id in fresh.backbone_params() {
        assert_eq!(trained.store.get(id), fresh.store.get(id), "{}", fresh.store.name(id));
    }
    assert_ne!(trained.selector(0), fresh.selector(0));
}

#[test]
fn empty_train_split_is_config_error() {
    let corpus = synthetic_corpus(1, 2, 0);
    assert!(matches!(train_prompt_model(&config(LabelMode::Detect), &corpus, &tiny()), Err(crate::Error::Config(_))));
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let corpus = synthetic_corpus(2, 3, 9);
    let m = PromptModel::new(
        PromptModelConfig { per_slot_selector: true, ..config(LabelMode::Classify) },
        &tiny(),
        &mut ChaCha8Rng::seed_from_u64(3),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prompt.json");
    m.save(&path).unwrap();
    let back = PromptModel::load(&path).unwrap();
    assert_eq!(back.predict_corpus(&corpus, None).unwrap(), m.predict_corpus(&corpus, None).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn extracted_spans_are_bounded(seed in 0u64..500, detect in any::<bool>()) {
        let mode = if detect { LabelMode::Detect } else { LabelMode::Classify };
        let corpus = synthetic_corpus(1, 3, seed);
        let m = model(mode, seed);
        for (_, s) in corpus.all_sentences() {
            let (found, traces) = m.extract_events_traced(s).unwrap();
            for t in &traces {
                prop_assert!(t.prediction.end - t.prediction.start <= m.config.max_span_length);
            }
            let mut classes = std::collections::BTreeSet::new();
            for e in &found {
                prop_assert!(e.span.start >= s.offset && e.span.end <= s.end());
                prop_assert!(e.span.start < e.span.end);
                // whole tokens only, so every span survives alignment
                prop_assert!(s.tokens.iter().any(|t| t.start == e.span.start));
                prop_assert!(s.tokens.iter().any(|t| t.end == e.span.end));
                if let Some(c) = e.event_class {
                    prop_assert!(classes.insert(c), "two mentions of {c:?}");
                }
            }
            if !detect {
                prop_assert!(found.len() <= 7);
            }
        }
    }
}
