use ndarray::Array2;

use super::params::{Gradients, Mat, ParamStore};

/// Adam with optional decoupled weight decay (AdamW when `weight_decay > 0`).
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Parameters that never receive weight decay, by position in the store.
    no_decay: Vec<bool>,
    m: Vec<Option<Mat>>,
    v: Vec<Option<Mat>>,
    step: u64,
}

impl Adam {
    pub fn new(store: &ParamStore) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            no_decay: vec![false; store.len()],
            m: vec![None; store.len()],
            v: vec![None; store.len()],
            step: 0,
        }
    }

    /// AdamW; biases and normalisation gains are excluded from decay.
    pub fn adamw(store: &ParamStore, weight_decay: f64) -> Self {
        let mut opt = Self::new(store);
        opt.weight_decay = weight_decay;
        opt.no_decay = store
            .ids()
            .map(|id| {
                let name = store.name(id);
                name.ends_with("bias") || name.contains("norm")
            })
            .collect();
        opt.eps = 1e-8;
        opt
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let Some(g) = grads.get(id) else { continue };
            let i = id.0;
            let shape = g.dim();
            let m = self.m[i].get_or_insert_with(|| Array2::zeros(shape));
            let v = self.v[i].get_or_insert_with(|| Array2::zeros(shape));
            let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
            let decay = if self.no_decay[i] { 0.0 } else { self.weight_decay };
            let p = store.get_mut(id);
            ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                if decay > 0.0 {
                    *p -= lr * decay * *p;
                }
                *p -= lr * mhat / (vhat.sqrt() + eps);
            });
        }
    }
}

/// Linear warm-up to the base rate over the first `warmup_fraction` of steps,
/// then linear decay to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearWarmup {
    pub base_lr: f64,
    pub total_steps: usize,
    pub warmup_steps: usize,
}

impl LinearWarmup {
    pub fn new(base_lr: f64, total_steps: usize, warmup_fraction: f64) -> Self {
        let warmup_steps = (total_steps as f64 * warmup_fraction).round() as usize;
        Self { base_lr, total_steps, warmup_steps }
    }

    /// Rate for the 0-based optimiser step `step`.
    pub fn lr(&self, step: usize) -> f64 {
        if step < self.warmup_steps {
            self.base_lr * (step + 1) as f64 / self.warmup_steps as f64
        } else {
            let remaining = self.total_steps.saturating_sub(step) as f64;
            let span = self.total_steps.saturating_sub(self.warmup_steps).max(1) as f64;
            self.base_lr * (remaining / span).clamp(0.0, 1.0)
        }
    }
}
