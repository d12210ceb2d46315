use std::fs;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{build_sequences, Sequence, TaggerModel};
use super::vocab::{CharVocab, EmbeddingTable};
use super::TaggerConfig;
use crate::corpus::{Corpus, LabelMode, Split};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalResults, MatchCriterion};
use crate::nn::{Adam, Gradients, Graph, ParamStore};

/// Per-epoch training record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Mean per-sequence loss of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Dev selection score after each epoch (empty without a dev split).
    pub dev_scores: Vec<f64>,
    pub best_epoch: Option<usize>,
    pub best_dev_score: Option<f64>,
}

/// Checkpoint selection score: macro-F1 for classification, detection F1
/// for detection (a classless model has no per-class scores).
pub fn selection_score(results: &EvalResults, mode: LabelMode) -> f64 {
    match mode {
        LabelMode::Classify => results.macro_f1,
        LabelMode::Detect => results.detection.f1,
    }
}

/// Sum of sequence losses and their gradients.
pub fn batch_gradients(model: &TaggerModel, batch: &[&Sequence]) -> Result<(f64, Gradients)> {
    let mut total = Gradients::new(model.store.len());
    let mut loss = 0.0;
    for seq in batch {
        let mut g = Graph::new(&model.store);
        let l = model.loss(&mut g, seq)?;
        loss += g.scalar(l);
        total.merge(&g.backward(l));
    }
    Ok((loss, total))
}

fn initial_model(config: &TaggerConfig, corpus: &Corpus, rng: &mut ChaCha8Rng) -> Result<TaggerModel> {
    let pretrained = match &config.embeddings {
        Some(path) => {
            let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            Some(EmbeddingTable::from_reader(std::io::BufReader::new(f))?)
        }
        None => None,
    };
    let train_tokens =
        || corpus.sentences_in(Split::Train).flat_map(|(_, s)| s.tokens.iter().map(|t| t.surface.as_str()));
    let words = EmbeddingTable::build(train_tokens(), config.word_dim, pretrained, rng)?;
    let chars = config.use_char_cnn.then(|| CharVocab::build(train_tokens()));
    TaggerModel::new(config.clone(), words, chars, rng)
}

/// Evaluate on `split` with the given criterion.
pub fn evaluate_tagger(
    model: &TaggerModel,
    corpus: &Corpus,
    split: Split,
    criterion: MatchCriterion,
) -> Result<EvalResults> {
    let preds = model.predict_corpus(corpus, Some(split));
    evaluate(&corpus.subset(split), &preds, criterion)
}

/// Adam over seeded shuffled mini-batches; the parameters of the epoch with
/// the best dev score are kept.
pub fn train_tagger(config: &TaggerConfig, corpus: &Corpus) -> Result<(TaggerModel, TrainingLog)> {
    train_tagger_with(config, corpus, |_, _| {})
}

/// As [`train_tagger`], calling `on_epoch(epoch, log)` after every epoch.
pub fn train_tagger_with(
    config: &TaggerConfig,
    corpus: &Corpus,
    mut on_epoch: impl FnMut(usize, &TrainingLog),
) -> Result<(TaggerModel, TrainingLog)> {
    config.validate()?;
    let train = build_sequences(corpus.sentences_in(Split::Train), config, true)?;
    if train.is_empty() {
        return Err(Error::Config("the train split is empty".into()));
    }
    let has_dev = corpus.sentences_in(Split::Dev).next().is_some();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = initial_model(config, corpus, &mut rng)?;
    let mut adam = Adam::new(&model.store);
    let mut log = TrainingLog::default();
    let mut best: Option<ParamStore> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sequence> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, mut grads) = batch_gradients(&model, &batch)?;
            epoch_loss += loss;
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut model.store, &grads, config.learning_rate);
        }
        log.epoch_losses.push(epoch_loss / train.len() as f64);
        if has_dev {
            let dev = evaluate_tagger(&model, corpus, Split::Dev, MatchCriterion::SPAN_AND_CLASS)?;
            let score = selection_score(&dev, config.label_scheme);
            log.dev_scores.push(score);
            if log.best_dev_score.map_or(true, |b| score > b) {
                log.best_dev_score = Some(score);
                log.best_epoch = Some(epoch);
                best = Some(model.store.clone());
            }
        } else {
            log.best_epoch = Some(epoch);
        }
        log::info!(
            "epoch {}/{}: loss {:.5}{}",
            epoch + 1,
            config.epochs,
            log.epoch_losses[epoch],
            log.dev_scores.last().map(|s| format!(", dev {s:.4}")).unwrap_or_default()
        );
        on_epoch(epoch, &log);
    }
    if let Some(store) = best {
        model.store = store;
    }
    Ok((model, log))
}

/// Fraction of gold token labels reproduced by the model.
pub fn token_accuracy<'a>(
    model: &TaggerModel,
    sentences: impl IntoIterator<Item = (crate::corpus::SentenceKey, &'a crate::corpus::AnnotatedSentence)>,
) -> Result<f64> {
    let seqs = build_sequences(sentences, &model.config, true)?;
    let (mut right, mut total) = (0usize, 0usize);
    for seq in &seqs {
        let (labels, _) = model.decode(seq);
        let gold = seq.gold.as_ref().expect("built with gold");
        right += labels.iter().zip(gold).filter(|(a, b)| a == b).count();
        total += gold.len();
    }
    Ok(if total == 0 { 1.0 } else { right as f64 / total as f64 })
}
