use ndarray::{s, Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use super::prompt::SlotSpan;
use crate::error::{Error, Result};
use crate::nn::{log_sum_exp, Graph, Mat, Var};

/// Start/end selector vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanSelector {
    pub w_start: Array1<f64>,
    pub w_end: Array1<f64>,
}

/// `(start, end)` over context positions; `end` is exclusive and `(0, 0)` is
/// the invalid span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanPrediction {
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

impl SpanPrediction {
    pub fn is_invalid(&self) -> bool {
        self.start == 0 && self.end == 0
    }
}

/// Mean of the prompt rows covered by `slot`.
pub fn slot_feature(h_p: &Mat, slot: &SlotSpan) -> Array1<f64> {
    h_p.slice(s![slot.start_tok..=slot.end_tok, ..]).mean_axis(ndarray::Axis(0)).expect("slot is non-empty")
}

/// Start and end logits of every context position.
pub fn span_logits(lambda: ArrayView1<f64>, selector: &SpanSelector, h_x: &Mat) -> (Vec<f64>, Vec<f64>) {
    let ls = &lambda * &selector.w_start;
    let le = &lambda * &selector.w_end;
    (h_x.dot(&ls).to_vec(), h_x.dot(&le).to_vec())
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits.iter().copied());
    logits.iter().map(|x| (x - lse).exp()).collect()
}

/// Summed negative log-likelihood of the gold start and end of every slot.
pub fn span_loss(logits: &[(Vec<f64>, Vec<f64>)], gold: &[(usize, usize)]) -> Result<f64> {
    if logits.len() != gold.len() {
        return Err(Error::Data(format!("{} slot logits but {} gold spans", logits.len(), gold.len())));
    }
    let mut total = 0.0;
    for ((ls, le), &(st, ed)) in logits.iter().zip(gold) {
        check_gold(ls.len(), st, ed)?;
        total += log_sum_exp(ls.iter().copied()) - ls[st];
        total += log_sum_exp(le.iter().copied()) - le[ed];
    }
    Ok(total)
}

fn check_gold(len: usize, st: usize, ed: usize) -> Result<()> {
    if st >= len || ed >= len {
        return Err(Error::Data(format!("gold span ({st}, {ed}) outside a context of length {len}")));
    }
    Ok(())
}

/// Best-scoring span among `(i, j)` with `0 < j - i <= alpha`, plus `(0, 0)`.
/// Ties go to the lexicographically smallest pair.
pub fn select_span(logit_start: &[f64], logit_end: &[f64], alpha: usize) -> SpanPrediction {
    let len = logit_start.len().min(logit_end.len());
    select_span_within(logit_start, logit_end, alpha, 0, len.saturating_sub(1))
}

/// As [`select_span`], with real spans restricted to `lo <= i` and `j <= hi`.
pub fn select_span_within(
    logit_start: &[f64],
    logit_end: &[f64],
    alpha: usize,
    lo: usize,
    hi: usize,
) -> SpanPrediction {
    assert!(alpha >= 1, "alpha must be positive");
    assert!(!logit_start.is_empty() && !logit_end.is_empty(), "empty logits");
    let mut best = SpanPrediction { start: 0, end: 0, score: logit_start[0] + logit_end[0] };
    let hi = hi.min(logit_end.len() - 1);
    for i in lo..logit_start.len().min(hi) {
        for j in i + 1..=(i + alpha).min(hi) {
            let score = logit_start[i] + logit_end[j];
            if score > best.score {
                best = SpanPrediction { start: i, end: j, score };
            }
        }
    }
    best
}

/// Graph version of [`slot_feature`] followed by [`span_logits`]; returns
/// `1 × L` start and end logits.
pub fn slot_logits(g: &mut Graph, h_x: Var, h_p: Var, slot: &SlotSpan, w_start: Var, w_end: Var) -> (Var, Var) {
    let rows = g.slice_rows(h_p, slot.start_tok, slot.len());
    let lambda = g.mean_rows(rows);
    let ls = g.mul(lambda, w_start);
    let le = g.mul(lambda, w_end);
    (g.matmul_t(ls, h_x), g.matmul_t(le, h_x))
}

/// Graph version of [`span_loss`] for one slot.
pub fn slot_loss(g: &mut Graph, logit_start: Var, logit_end: Var, gold: (usize, usize)) -> Result<Var> {
    check_gold(g.shape(logit_start).1, gold.0, gold.1)?;
    let a = g.cross_entropy(logit_start, &[gold.0]);
    let b = g.cross_entropy(logit_end, &[gold.1]);
    Ok(g.add_scalars(&[a, b]))
}
