use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::backbone::BackboneSpec;
use super::config::PromptModelConfig;
use super::model::{build_instances, PromptInstance, PromptModel};
use crate::corpus::{AnnotatedSentence, Corpus, LabelMode, SentenceKey, Split};
use crate::error::{Error, Result};
use crate::eval::{evaluate, match_spans, EvalResults, MatchCriterion};
use crate::nn::{Adam, Gradients, Graph, LinearWarmup, ParamStore};
use crate::tagging::{selection_score, TrainingLog};

/// Training instances of the model's mode for `sentences`.
pub fn instances_for<'a>(
    model: &PromptModel,
    sentences: impl IntoIterator<Item = (SentenceKey, &'a AnnotatedSentence)>,
) -> Vec<PromptInstance> {
    build_instances(sentences, &model.template, model.backbone().tokenizer(), model.config.max_encoder_len)
}

/// Summed loss of `batch` and its gradients.
pub fn prompt_batch_gradients(model: &PromptModel, batch: &[&PromptInstance]) -> Result<(f64, Gradients)> {
    let mut total = Gradients::new(model.store.len());
    let mut loss = 0.0;
    for inst in batch {
        let mut g = Graph::new(&model.store);
        let l = model.instance_loss(&mut g, inst)?;
        loss += g.scalar(l);
        total.merge(&g.backward(l));
    }
    Ok((loss, total))
}

pub fn evaluate_prompt_model(
    model: &PromptModel,
    corpus: &Corpus,
    split: Split,
    criterion: MatchCriterion,
) -> Result<EvalResults> {
    let preds = model.predict_corpus(corpus, Some(split))?;
    evaluate(&corpus.subset(split), &preds, criterion)
}

/// Fraction of gold mentions whose exact span is extracted (with the right
/// class in classify mode).
pub fn span_recovery<'a>(
    model: &PromptModel,
    sentences: impl IntoIterator<Item = (SentenceKey, &'a AnnotatedSentence)>,
) -> Result<f64> {
    let criterion = match model.config.mode {
        LabelMode::Classify => MatchCriterion::SPAN_AND_CLASS,
        LabelMode::Detect => MatchCriterion::SPAN,
    };
    let (mut found, mut total) = (0usize, 0usize);
    for (_, sentence) in sentences {
        let gold: Vec<_> = sentence.gold().cloned().collect();
        let pred = model.extract_events(sentence)?;
        found += match_spans(&gold, &pred, criterion).matches.len();
        total += gold.len();
    }
    Ok(if total == 0 { 1.0 } else { found as f64 / total as f64 })
}

pub fn train_prompt_model(
    config: &PromptModelConfig,
    corpus: &Corpus,
    spec: &BackboneSpec,
) -> Result<(PromptModel, TrainingLog)> {
    train_prompt_model_with(config, corpus, spec, |_, _| {})
}

/// AdamW with linear warm-up and decay, global-norm clipping and seeded batch
/// order. Dev is scored every `eval_every` epochs and the best parameters are
/// kept.
pub fn train_prompt_model_with(
    config: &PromptModelConfig,
    corpus: &Corpus,
    spec: &BackboneSpec,
    mut on_epoch: impl FnMut(usize, &TrainingLog),
) -> Result<(PromptModel, TrainingLog)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = PromptModel::new(config.clone(), spec, &mut rng)?;
    let train = instances_for(&model, corpus.sentences_in(Split::Train));
    if train.is_empty() {
        return Err(Error::Config("the train split is empty".into()));
    }
    let has_dev = corpus.sentences_in(Split::Dev).next().is_some();
    let steps_per_epoch = train.len().div_ceil(config.batch_size);
    let schedule = LinearWarmup::new(config.learning_rate, steps_per_epoch * config.epochs, config.warmup_fraction);
    let mut adam = Adam::adamw(&model.store, config.weight_decay);
    let frozen: Vec<_> = if config.freeze_backbone { model.backbone_params().to_vec() } else { Vec::new() };
    let mut log = TrainingLog::default();
    let mut best: Option<ParamStore> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut step = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&PromptInstance> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, mut grads) = prompt_batch_gradients(&model, &batch)?;
            epoch_loss += loss;
            for &id in &frozen {
                grads.clear(id);
            }
            grads.clip_global_norm(config.max_grad_norm);
            adam.step(&mut model.store, &grads, schedule.lr(step));
            step += 1;
        }
        log.epoch_losses.push(epoch_loss / train.len() as f64);
        let last = epoch + 1 == config.epochs;
        if has_dev && ((epoch + 1) % config.eval_every == 0 || last) {
            let dev = evaluate_prompt_model(&model, corpus, Split::Dev, MatchCriterion::SPAN_AND_CLASS)?;
            let score = selection_score(&dev, config.mode);
            log.dev_scores.push(score);
            if log.best_dev_score.map_or(true, |b| score > b) {
                log.best_dev_score = Some(score);
                log.best_epoch = Some(epoch);
                best = Some(model.store.clone());
            }
        } else if !has_dev {
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
