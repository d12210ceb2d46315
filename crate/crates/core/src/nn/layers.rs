use rand::Rng;

use super::{Graph, ParamId, ParamStore, Var};

/// Affine map `x W + b` applied row-wise.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            w: store.add_xavier(format!("{name}.weight"), input, output, rng),
            b: store.add_zeros(format!("{name}.bias"), 1, output),
        }
    }

    pub fn apply(&self, g: &mut Graph, x: Var) -> Var {
        let w = g.param(self.w);
        let b = g.param(self.b);
        let y = g.matmul(x, w);
        g.add_row(y, b)
    }
}
