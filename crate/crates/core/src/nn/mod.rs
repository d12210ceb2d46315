//! Minimal reverse-mode automatic differentiation over dense `f64` matrices,
//! with the optimiser and schedule used by both model families.

mod graph;
mod layers;
mod optim;
mod params;

pub use graph::{log_sum_exp, sigmoid, Graph, Var};
pub use layers::Linear;
pub use optim::{Adam, LinearWarmup};
pub use params::{Gradients, Mat, ParamId, ParamSnapshot, ParamStore, TensorRecord};

#[cfg(test)]
#[derive(Debug, Default)]
pub(crate) struct GradientCheck {
    /// Worst `|a − n| / max(|a|, |n|, 1e-4)` over smooth entries.
    pub error: f64,
    pub worst_at: String,
    pub checked: usize,
    /// Entries skipped because the one-sided differences disagree, i.e. a
    /// ReLU or max-pool switch lies within the step.
    pub kinks: usize,
}

/// Compare analytic parameter gradients of `loss` against central
/// differences on a strided sample of every parameter tensor.
#[cfg(test)]
pub(crate) fn worst_gradient_error(
    store: &mut ParamStore,
    loss: impl Fn(&ParamStore) -> (f64, Gradients),
    max_entries_per_param: usize,
) -> GradientCheck {
    let (base, grads) = loss(store);
    let h = 1e-5;
    let mut out = GradientCheck::default();
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        let (rows, cols) = store.get(id).dim();
        let total = rows * cols;
        let stride = (total / max_entries_per_param.max(1)).max(1);
        for flat in (0..total).step_by(stride) {
            let idx = (flat / cols, flat % cols);
            let orig = store.get(id)[idx];
            store.get_mut(id)[idx] = orig + h;
            let up = loss(store).0;
            store.get_mut(id)[idx] = orig - h;
            let down = loss(store).0;
            store.get_mut(id)[idx] = orig;
            out.checked += 1;
            let (fwd, bwd) = ((up - base) / h, (base - down) / h);
            if (fwd - bwd).abs() > 1e-2 * fwd.abs().max(bwd.abs()).max(1e-2) {
                out.kinks += 1;
                continue;
            }
            let num = (up - down) / (2.0 * h);
            let ana = grads.get(id).map_or(0.0, |g| g[idx]);
            let rel = (ana - num).abs() / ana.abs().max(num.abs()).max(1e-4);
            if rel > out.error {
                out.error = rel;
                out.worst_at = format!("{}{idx:?} analytic {ana:e} numeric {num:e}", store.name(id));
            }
        }
    }
    out
}
