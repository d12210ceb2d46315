use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backbone::{Backbone, BackboneSpec};
use super::config::PromptModelConfig;
use super::prompt::{build_prompt, PromptTemplate};
use super::span::{select_span_within, slot_logits, slot_loss, softmax, SpanPrediction, SpanSelector};
use super::tokenizer::{Piece, SubwordTokenizer};
use crate::corpus::{
    AnnotatedSentence, Corpus, EventMention, LabelMode, PredictedMention, SentenceKey, Split, Tag, TriggerSpan,
};
use crate::error::{Error, Result};
use crate::nn::{Graph, ParamId, ParamSnapshot, ParamStore, Var};

pub const PROMPT_CHECKPOINT_FORMAT: &str = "story-events/prompt-v1";

/// A sentence as backbone input: `ids[0]` is the start sentinel, `ids[L-1]`
/// the end sentinel, and `pieces[p]` (story-level character offsets) sits at
/// `ids[p + 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextEncoding {
    pub ids: Vec<usize>,
    pub pieces: Vec<Piece>,
    pub truncated: bool,
}

impl ContextEncoding {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Context positions `[start, end)` of a character span, or `None` if no
    /// piece overlaps it.
    pub fn align(&self, span: &TriggerSpan) -> Option<(usize, usize)> {
        let hits: Vec<usize> = self
            .pieces
            .iter()
            .enumerate()
            .filter(|(_, p)| p.start < span.end && p.end > span.start)
            .map(|(i, _)| i)
            .collect();
        Some((*hits.first()? + 1, *hits.last()? + 2))
    }

    /// Character span of context positions `[start, end)`.
    pub fn char_span(&self, start: usize, end: usize) -> Option<(usize, usize)> {
        if start == 0 || end <= start || end > self.pieces.len() + 1 {
            return None;
        }
        Some((self.pieces[start - 1].start, self.pieces[end - 2].end))
    }
}

pub fn encode_context(
    tokenizer: &dyn SubwordTokenizer,
    sentence: &AnnotatedSentence,
    max_len: usize,
) -> ContextEncoding {
    let mut pieces = tokenizer.tokenize(&sentence.text);
    for p in &mut pieces {
        p.start += sentence.offset;
        p.end += sentence.offset;
    }
    let budget = max_len.saturating_sub(2);
    let truncated = pieces.len() > budget;
    if truncated {
        log::warn!("sentence at offset {} has {} subwords; truncating to {budget}", sentence.offset, pieces.len());
        pieces.truncate(budget);
    }
    let mut ids = Vec::with_capacity(pieces.len() + 2);
    ids.push(tokenizer.bos());
    ids.extend(pieces.iter().map(|p| p.id));
    ids.push(tokenizer.eos());
    ContextEncoding { ids, pieces, truncated }
}

/// One training example: context ids and a gold `(start, end)` per slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptInstance {
    pub key: SentenceKey,
    pub ids: Vec<usize>,
    pub gold: Vec<(usize, usize)>,
}

fn aligned_mentions(
    ctx: &ContextEncoding,
    key: &SentenceKey,
    sentence: &AnnotatedSentence,
) -> Vec<(EventMention, (usize, usize))> {
    let mut out = Vec::new();
    for m in sentence.gold() {
        match ctx.align(&m.span) {
            Some(pos) => out.push((m.clone(), pos)),
            None => log::warn!(
                "{}#{}: mention {:?} lies beyond the context window and is dropped",
                key.story_id,
                key.sentence,
                m.span.surface
            ),
        }
    }
    out.sort_by_key(|(_, pos)| *pos);
    out
}

/// Training instances for `mode`.
///
/// Classification gives one instance per sentence whose slot gold is the
/// earliest mention of that class. Detection gives one instance per trigger,
/// with every earlier trigger masked, plus a final all-masked instance whose
/// gold is the invalid span.
pub fn build_instances<'a>(
    sentences: impl IntoIterator<Item = (SentenceKey, &'a AnnotatedSentence)>,
    template: &PromptTemplate,
    tokenizer: &dyn SubwordTokenizer,
    max_encoder_len: usize,
) -> Vec<PromptInstance> {
    let mut out = Vec::new();
    for (key, sentence) in sentences {
        let ctx = encode_context(tokenizer, sentence, max_encoder_len);
        let mentions = aligned_mentions(&ctx, &key, sentence);
        match template.mode {
            LabelMode::Classify => {
                let mut gold = vec![(0, 0); template.slots.len()];
                let mut seen = vec![false; template.slots.len()];
                for (m, pos) in &mentions {
                    let k = template
                        .slots
                        .iter()
                        .position(|s| s.label == Tag::Class(m.event_class))
                        .expect("every class has a slot");
                    if seen[k] {
                        log::warn!(
                            "{}#{}: second {} mention {:?} excluded (one span per slot)",
                            key.story_id,
                            key.sentence,
                            m.event_class.code(),
                            m.span.surface
                        );
                        continue;
                    }
                    seen[k] = true;
                    gold[k] = *pos;
                }
                out.push(PromptInstance { key, ids: ctx.ids, gold });
            }
            LabelMode::Detect => {
                let mut ids = ctx.ids;
                for (_, (st, ed)) in &mentions {
                    out.push(PromptInstance { key: key.clone(), ids: ids.clone(), gold: vec![(*st, *ed)] });
                    for id in &mut ids[*st..*ed] {
                        *id = tokenizer.mask();
                    }
                }
                out.push(PromptInstance { key, ids, gold: vec![(0, 0)] });
            }
        }
    }
    out
}

/// Start/end distributions of one slot during extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotTrace {
    pub label: Tag,
    /// Mask-and-repeat pass (always 0 in classify mode).
    pub pass: usize,
    pub p_start: Vec<f64>,
    pub p_end: Vec<f64>,
    pub prediction: SpanPrediction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptCheckpoint {
    pub format: String,
    pub config: PromptModelConfig,
    pub backbone: BackboneSpec,
    pub params: ParamSnapshot,
}

/// Backbone plus span selector (shared, or one row per slot).
#[derive(Debug, Clone)]
pub struct PromptModel {
    pub config: PromptModelConfig,
    pub template: PromptTemplate,
    pub store: ParamStore,
    backbone: Arc<dyn Backbone>,
    w_start: ParamId,
    w_end: ParamId,
}

impl PromptModel {
    pub fn new<R: Rng>(config: PromptModelConfig, spec: &BackboneSpec, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let longest = config.max_encoder_len.max(config.max_decoder_len);
        if longest > spec.max_positions {
            return Err(Error::Config(format!(
                "backbone {} has {} positions but the model needs {longest}",
                spec.name, spec.max_positions
            )));
        }
        let mut store = ParamStore::new();
        let backbone = spec.build(&mut store, rng)?;
        let template = build_prompt(config.mode, backbone.tokenizer(), config.max_decoder_len)?;
        let rows = if config.per_slot_selector { template.slots.len() } else { 1 };
        let h = backbone.hidden_dim();
        let bound = (3.0 / h as f64).sqrt();
        let w_start = store.add_uniform("selector.start", rows, h, bound, rng);
        let w_end = store.add_uniform("selector.end", rows, h, bound, rng);
        Ok(Self { config, template, store, backbone, w_start, w_end })
    }

    pub fn backbone(&self) -> &dyn Backbone {
        self.backbone.as_ref()
    }

    pub fn backbone_params(&self) -> &[ParamId] {
        self.backbone.param_ids()
    }

    pub fn encode(&self, sentence: &AnnotatedSentence) -> ContextEncoding {
        encode_context(self.backbone.tokenizer(), sentence, self.config.max_encoder_len)
    }

    /// `(H_X, H_P)`: the context decoded against its own encoding, and the
    /// prompt decoded against the same encoding.
    pub fn encode_and_decode(&self, g: &mut Graph, context: &[usize]) -> (Var, Var) {
        let memory = self.backbone.encode(g, context);
        let h_x = self.backbone.decode(g, context, memory);
        let h_p = self.backbone.decode(g, &self.template.ids, memory);
        (h_x, h_p)
    }

    fn selector_vars(&self, g: &mut Graph, slot: usize) -> (Var, Var) {
        let ws = g.param(self.w_start);
        let we = g.param(self.w_end);
        if self.config.per_slot_selector {
            (g.slice_rows(ws, slot, 1), g.slice_rows(we, slot, 1))
        } else {
            (ws, we)
        }
    }

    pub fn selector(&self, slot: usize) -> SpanSelector {
        let row = if self.config.per_slot_selector { slot } else { 0 };
        SpanSelector {
            w_start: self.store.get(self.w_start).row(row).to_owned(),
            w_end: self.store.get(self.w_end).row(row).to_owned(),
        }
    }

    /// Start/end logits of every slot, `1 × L` each.
    pub fn slot_logit_vars(&self, g: &mut Graph, context: &[usize]) -> Vec<(Var, Var)> {
        let (h_x, h_p) = self.encode_and_decode(g, context);
        (0..self.template.slots.len())
            .map(|k| {
                let (ws, we) = self.selector_vars(g, k);
                slot_logits(g, h_x, h_p, &self.template.slots[k], ws, we)
            })
            .collect()
    }

    /// Summed span loss of one instance.
    pub fn instance_loss(&self, g: &mut Graph, inst: &PromptInstance) -> Result<Var> {
        let logits = self.slot_logit_vars(g, &inst.ids);
        let mut terms = Vec::with_capacity(logits.len());
        for ((ls, le), &gold) in logits.into_iter().zip(&inst.gold) {
            terms.push(slot_loss(g, ls, le, gold)?);
        }
        Ok(g.add_scalars(&terms))
    }

    /// Plain logits of every slot for `context`.
    pub fn slot_logits(&self, context: &[usize]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut g = Graph::new(&self.store);
        let vars = self.slot_logit_vars(&mut g, context);
        vars.into_iter().map(|(a, b)| (g.value(a).row(0).to_vec(), g.value(b).row(0).to_vec())).collect()
    }

    fn pick(&self, ls: &[f64], le: &[f64]) -> (SpanPrediction, Vec<f64>, Vec<f64>) {
        let len = ls.len();
        // real spans start after the start sentinel and end at or before
        // the end sentinel
        let pred = select_span_within(ls, le, self.config.max_span_length, 1, len - 1);
        (pred, softmax(ls), softmax(le))
    }

    fn to_mention(
        &self,
        ctx: &ContextEncoding,
        sentence: &AnnotatedSentence,
        pred: &SpanPrediction,
        label: Tag,
        prob: f64,
    ) -> Result<PredictedMention> {
        let (start, end) = ctx.char_span(pred.start, pred.end).ok_or_else(|| Error::Alignment {
            mention: format!("({}, {})", pred.start, pred.end),
            reason: format!("no subwords at those positions ({} in context)", ctx.pieces.len()),
        })?;
        // a span may begin or end inside a word; widen it to whole tokens
        let start = sentence.tokens.iter().find(|t| t.start <= start && start < t.end).map_or(start, |t| t.start);
        let end = sentence.tokens.iter().find(|t| t.start < end && end <= t.end).map_or(end, |t| t.end);
        let surface: String = sentence.text.chars().skip(start - sentence.offset).take(end - start).collect();
        if surface.chars().count() != end - start {
            return Err(Error::Alignment {
                mention: surface,
                reason: format!("characters {start}..{end} fall outside the sentence"),
            });
        }
        Ok(PredictedMention { span: TriggerSpan::new(start, end, surface), event_class: label.class(), score: prob })
    }

    pub fn extract_events(&self, sentence: &AnnotatedSentence) -> Result<Vec<PredictedMention>> {
        Ok(self.extract_events_traced(sentence)?.0)
    }

    /// Extraction together with every slot distribution that was evaluated.
    pub fn extract_events_traced(
        &self,
        sentence: &AnnotatedSentence,
    ) -> Result<(Vec<PredictedMention>, Vec<SlotTrace>)> {
        let ctx = self.encode(sentence);
        let mut mentions = Vec::new();
        let mut traces = Vec::new();
        match self.config.mode {
            LabelMode::Classify => {
                for (k, (ls, le)) in self.slot_logits(&ctx.ids).into_iter().enumerate() {
                    let (pred, ps, pe) = self.pick(&ls, &le);
                    let label = self.template.slots[k].label;
                    if !pred.is_invalid() {
                        let prob = ps[pred.start] * pe[pred.end];
                        mentions.push(self.to_mention(&ctx, sentence, &pred, label, prob)?);
                    }
                    traces.push(SlotTrace { label, pass: 0, p_start: ps, p_end: pe, prediction: pred });
                }
            }
            LabelMode::Detect => {
                let mask = self.backbone.tokenizer().mask();
                let mut ids = ctx.ids.clone();
                let mut masked = vec![false; ids.len()];
                for pass in 0..self.config.max_detect_iterations {
                    let (ls, le) = self.slot_logits(&ids).swap_remove(0);
                    let (pred, ps, pe) = self.pick(&ls, &le);
                    let label = self.template.slots[0].label;
                    let prob = ps[pred.start] * pe[pred.end];
                    traces.push(SlotTrace { label, pass, p_start: ps, p_end: pe, prediction: pred });
                    // re-selecting masked positions would only duplicate output
                    if pred.is_invalid() || masked[pred.start..pred.end].iter().any(|&m| m) {
                        break;
                    }
                    mentions.push(self.to_mention(&ctx, sentence, &pred, label, prob)?);
                    for i in pred.start..pred.end {
                        ids[i] = mask;
                        masked[i] = true;
                    }
                }
                mentions.sort_by_key(|m: &PredictedMention| (m.span.start, m.span.end));
            }
        }
        Ok((mentions, traces))
    }

    pub fn predict_corpus(
        &self,
        corpus: &Corpus,
        split: Option<Split>,
    ) -> Result<BTreeMap<SentenceKey, Vec<PredictedMention>>> {
        let mut out = BTreeMap::new();
        let sentences: Vec<_> = match split {
            Some(s) => corpus.sentences_in(s).collect(),
            None => corpus.all_sentences().collect(),
        };
        for (key, sentence) in sentences {
            out.insert(key, self.extract_events(sentence)?);
        }
        Ok(out)
    }

    pub fn to_checkpoint(&self) -> PromptCheckpoint {
        PromptCheckpoint {
            format: PROMPT_CHECKPOINT_FORMAT.into(),
            config: self.config.clone(),
            backbone: self.backbone.spec().clone(),
            params: self.store.to_snapshot(),
        }
    }

    pub fn from_checkpoint(ckpt: &PromptCheckpoint) -> Result<Self> {
        if ckpt.format != PROMPT_CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!(
                "expected format {PROMPT_CHECKPOINT_FORMAT}, found {:?}",
                ckpt.format
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = Self::new(ckpt.config.clone(), &ckpt.backbone, &mut rng)?;
        model.store.load_snapshot(&ckpt.params)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(&self.to_checkpoint())?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: PromptCheckpoint = serde_json::from_str(&text).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_checkpoint(&ckpt).map_err(|e| e.in_file(path))
    }
}
