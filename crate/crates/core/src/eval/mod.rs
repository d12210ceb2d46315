//! Span-level precision/recall/F1, macro-F1 and the class confusion matrix.

mod report;

pub use report::{export_report, write_reports, ReportFormat};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EventClass, EventMention, PredictedMention, SentenceKey};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    ExactSpan,
    ExactSpanAndClass,
}

/// How predictions pair with gold mentions. `overlap` relaxes exact
/// boundaries to any character overlap (exact pairs are still preferred).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchCriterion {
    pub mode: MatchMode,
    #[serde(default)]
    pub overlap: bool,
}

impl MatchCriterion {
    pub const SPAN: Self = Self { mode: MatchMode::ExactSpan, overlap: false };
    pub const SPAN_AND_CLASS: Self = Self { mode: MatchMode::ExactSpanAndClass, overlap: false };

    pub fn with_overlap(mut self, overlap: bool) -> Self {
        self.overlap = overlap;
        self
    }

    fn class_ok(self, gold: &EventMention, pred: &PredictedMention) -> bool {
        self.mode == MatchMode::ExactSpan || pred.event_class == Some(gold.event_class)
    }
}

impl fmt::Display for MatchCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.mode {
            MatchMode::ExactSpan => "span",
            MatchMode::ExactSpanAndClass => "span+class",
        })?;
        if self.overlap {
            f.write_str("~overlap")?;
        }
        Ok(())
    }
}

impl FromStr for MatchCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (base, overlap) = match s.strip_suffix("~overlap") {
            Some(b) => (b, true),
            None => (s, false),
        };
        let c = match base {
            "span" | "exact_span" => Self::SPAN,
            "span+class" | "exact_span_and_class" => Self::SPAN_AND_CLASS,
            other => return Err(Error::Config(format!("unknown criterion {other:?}"))),
        };
        Ok(c.with_overlap(overlap))
    }
}

/// Indices into the gold and predicted lists.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpanMatching {
    pub matches: Vec<(usize, usize)>,
    pub misses: Vec<usize>,
    pub spurious: Vec<usize>,
}

/// Greedy one-to-one pairing in gold order; each gold takes the first
/// eligible unused prediction.
pub fn match_spans(gold: &[EventMention], pred: &[PredictedMention], criterion: MatchCriterion) -> SpanMatching {
    let mut used = vec![false; pred.len()];
    let mut paired: Vec<Option<usize>> = vec![None; gold.len()];
    let passes: &[bool] = if criterion.overlap { &[false, true] } else { &[false] };
    for &relaxed in passes {
        for (gi, g) in gold.iter().enumerate() {
            if paired[gi].is_some() {
                continue;
            }
            let found = pred.iter().enumerate().position(|(pi, p)| {
                !used[pi]
                    && criterion.class_ok(g, p)
                    && if relaxed { g.span.overlaps(&p.span) } else { g.span.same_bounds(&p.span) }
            });
            if let Some(pi) = found {
                used[pi] = true;
                paired[gi] = Some(pi);
            }
        }
    }
    let mut out = SpanMatching::default();
    for (gi, p) in paired.into_iter().enumerate() {
        match p {
            Some(pi) => out.matches.push((gi, pi)),
            None => out.misses.push(gi),
        }
    }
    out.spurious = (0..pred.len()).filter(|&i| !used[i]).collect();
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    #[serde(rename = "p")]
    pub precision: f64,
    #[serde(rename = "r")]
    pub recall: f64,
    pub f1: f64,
}

impl ClassMetrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let (precision, recall, f1) = compute_prf(tp, fp, fn_);
        Self { tp, fp, fn_, precision, recall, f1 }
    }
}

/// Precision, recall and F1; a zero denominator yields 0.
pub fn compute_prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

/// Rows are gold classes, columns predicted classes (both in
/// [`EventClass::ALL`] order), over span-matched pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalResults {
    pub criterion: MatchCriterion,
    pub per_class: BTreeMap<EventClass, ClassMetrics>,
    /// Micro-averaged under `criterion`.
    pub overall: ClassMetrics,
    /// Micro-averaged under exact span, class ignored.
    pub detection: ClassMetrics,
    pub macro_f1: f64,
    pub confusion: Vec<Vec<usize>>,
    /// Gold mentions with no span match, per gold class.
    pub missed: BTreeMap<EventClass, usize>,
    /// Predictions with no span match, per predicted class.
    pub spurious: BTreeMap<EventClass, usize>,
    /// Span-matched predictions that carry no class.
    pub unclassified: usize,
    pub sentences: usize,
}

impl Default for MatchCriterion {
    fn default() -> Self {
        Self::SPAN_AND_CLASS
    }
}

#[derive(Default)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Counts {
    fn add(&mut self, m: &SpanMatching) {
        self.tp += m.matches.len();
        self.fp += m.spurious.len();
        self.fn_ += m.misses.len();
    }

    fn metrics(&self) -> ClassMetrics {
        ClassMetrics::from_counts(self.tp, self.fp, self.fn_)
    }
}

/// Score predictions against every sentence of `gold`. Sentences absent from
/// `predictions` count as predicted-empty; predictions for sentences that
/// are not in `gold` are an error.
pub fn evaluate(
    gold: &Corpus,
    predictions: &BTreeMap<SentenceKey, Vec<PredictedMention>>,
    criterion: MatchCriterion,
) -> Result<EvalResults> {
    let keys: BTreeSet<SentenceKey> = gold.all_sentences().map(|(k, _)| k).collect();
    if let Some(unknown) = predictions.keys().find(|k| !keys.contains(*k)) {
        return Err(Error::Data(format!("prediction for unknown sentence {}#{}", unknown.story_id, unknown.sentence)));
    }
    let n = EventClass::ALL.len();
    let mut per_class: Vec<Counts> = (0..n).map(|_| Counts::default()).collect();
    let mut overall = Counts::default();
    let mut detection = Counts::default();
    let mut confusion = vec![vec![0usize; n]; n];
    let mut missed = vec![0usize; n];
    let mut spurious = vec![0usize; n];
    let mut unclassified = 0;
    let empty = Vec::new();
    let class_criterion = MatchCriterion::SPAN_AND_CLASS.with_overlap(criterion.overlap);
    let span_criterion = MatchCriterion::SPAN.with_overlap(criterion.overlap);

    for (key, sentence) in gold.all_sentences() {
        let g: Vec<EventMention> = sentence.gold().cloned().collect();
        let p = predictions.get(&key).unwrap_or(&empty);

        overall.add(&match_spans(&g, p, criterion));

        let by_class = match_spans(&g, p, class_criterion);
        for &(gi, _) in &by_class.matches {
            per_class[g[gi].event_class.index()].tp += 1;
        }
        for &gi in &by_class.misses {
            per_class[g[gi].event_class.index()].fn_ += 1;
        }
        for &pi in &by_class.spurious {
            if let Some(c) = p[pi].event_class {
                per_class[c.index()].fp += 1;
            }
        }

        let by_span = match_spans(&g, p, span_criterion);
        detection.add(&by_span);
        for &(gi, pi) in &by_span.matches {
            match p[pi].event_class {
                Some(c) => confusion[g[gi].event_class.index()][c.index()] += 1,
                None => unclassified += 1,
            }
        }
        for &gi in &by_span.misses {
            missed[g[gi].event_class.index()] += 1;
        }
        for &pi in &by_span.spurious {
            if let Some(c) = p[pi].event_class {
                spurious[c.index()] += 1;
            }
        }
    }

    let per_class: BTreeMap<EventClass, ClassMetrics> =
        EventClass::ALL.iter().map(|&c| (c, per_class[c.index()].metrics())).collect();
    let macro_f1 = per_class.values().map(|m| m.f1).sum::<f64>() / n as f64;
    let index_map = |v: Vec<usize>| EventClass::ALL.iter().map(|&c| (c, v[c.index()])).collect();
    Ok(EvalResults {
        criterion,
        per_class,
        overall: overall.metrics(),
        detection: detection.metrics(),
        macro_f1,
        confusion,
        missed: index_map(missed),
        spurious: index_map(spurious),
        unclassified,
        sentences: keys.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_brat, segment_story, TriggerSpan};

    fn pm(start: usize, end: usize, surface: &str, class: Option<EventClass>) -> PredictedMention {
        PredictedMention { span: TriggerSpan::new(start, end, surface), event_class: class, score: 1.0 }
    }

    #[test]
    fn prf_guards_and_reference_values() {
        assert_eq!(compute_prf(1, 0, 0), (1.0, 1.0, 1.0));
        assert_eq!(compute_prf(0, 0, 0), (0.0, 0.0, 0.0));
        let (p, r, f) = compute_prf(3, 1, 2);
        assert_eq!((p, r), (0.75, 0.6));
        assert!((f - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-15);
    }

    #[test]
    fn matching_is_exact_by_default() {
        let gold = vec![EventMention::new(3, 7, "said", EventClass::Communication)];
        let off = vec![pm(3, 8, "said ", Some(EventClass::Communication))];
        let m = match_spans(&gold, &off, MatchCriterion::SPAN);
        assert!(m.matches.is_empty());
        assert_eq!((m.misses.len(), m.spurious.len()), (1, 1));
        let relaxed = match_spans(&gold, &off, MatchCriterion::SPAN.with_overlap(true));
        assert_eq!(relaxed.matches, vec![(0, 0)]);
        let m = match_spans(&gold, &[], MatchCriterion::SPAN);
        assert_eq!(m.misses, vec![0]);
    }

    #[test]
    fn class_mode_requires_class() {
        let gold = vec![EventMention::new(0, 2, "go", EventClass::Movement)];
        let pred = vec![pm(0, 2, "go", Some(EventClass::Conflict))];
        assert_eq!(match_spans(&gold, &pred, MatchCriterion::SPAN).matches.len(), 1);
        assert!(match_spans(&gold, &pred, MatchCriterion::SPAN_AND_CLASS).matches.is_empty());
    }

    #[test]
    fn criterion_strings() {
        assert_eq!("span".parse::<MatchCriterion>().unwrap(), MatchCriterion::SPAN);
        assert_eq!(
            "span+class~overlap".parse::<MatchCriterion>().unwrap(),
            MatchCriterion::SPAN_AND_CLASS.with_overlap(true)
        );
        assert!("tokens".parse::<MatchCriterion>().is_err());
    }

    #[test]
    fn gold_against_itself_is_perfect() {
        let story = segment_story(
            parse_brat(
                "s",
                "He said no. She ran and fought.",
                "T1\tCOMMUNICATION 3 7\tsaid\nT2\tMOVEMENT 16 19\tran\nT3\tCONFLICT 24 30\tfought\n",
            )
            .unwrap(),
        )
        .unwrap();
        let corpus = Corpus::new(vec![story]);
        let preds =
            corpus.all_sentences().map(|(k, s)| (k, s.gold().map(PredictedMention::from_gold).collect())).collect();
        let r = evaluate(&corpus, &preds, MatchCriterion::SPAN_AND_CLASS).unwrap();
        assert_eq!(r.overall.f1, 1.0);
        assert_eq!(r.detection.f1, 1.0);
        for i in 0..7 {
            for j in 0..7 {
                if i != j {
                    assert_eq!(r.confusion[i][j], 0);
                }
            }
        }
        assert_eq!(r.confusion[EventClass::Conflict.index()][EventClass::Conflict.index()], 1);
    }

    #[test]
    fn unknown_sentence_is_data_error() {
        let corpus = Corpus::new(vec![segment_story(parse_brat("s", "Hi.", "").unwrap()).unwrap()]);
        let mut preds = BTreeMap::new();
        preds.insert(SentenceKey { story_id: "t".into(), sentence: 0 }, vec![]);
        assert!(matches!(evaluate(&corpus, &preds, MatchCriterion::SPAN), Err(Error::Data(_))));
    }
}
