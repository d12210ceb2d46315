use ndarray::{s, Array2, Axis};

use super::params::{Gradients, Mat, ParamId, ParamStore};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Input,
    Param(ParamId),
    Embed(ParamId, Vec<usize>),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    MeanRows(Var),
    MaxRows(Var, Vec<usize>),
    Windows(Var, usize),
    SoftmaxRows(Var),
    LayerNorm(Var, Vec<f64>),
    Sum(Var),
    /// Scalar-valued op whose local derivatives were computed in the forward
    /// pass.
    Scalar(Vec<(Var, Mat)>),
}

struct Node {
    value: Mat,
    op: Op,
}

/// A define-by-run reverse-mode autodiff tape over dense `f64` matrices.
///
/// Parameters are read from the borrowed [`ParamStore`]; [`Graph::backward`]
/// returns their gradients without touching the store.
pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Self { store, nodes: Vec::with_capacity(256) }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.dim(), (1, 1));
        m[[0, 0]]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&mut self, value: Mat) -> Var {
        self.push(value, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let value = self.store.get(id).clone();
        self.push(value, Op::Param(id))
    }

    /// Gather rows of a parameter matrix (embedding lookup) without copying
    /// the full table.
    pub fn embed(&mut self, id: ParamId, rows: &[usize]) -> Var {
        let table = self.store.get(id);
        let mut out = Array2::zeros((rows.len(), table.ncols()));
        for (r, &src) in rows.iter().enumerate() {
            out.row_mut(r).assign(&table.row(src));
        }
        self.push(out, Op::Embed(id, rows.to_vec()))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    /// `a × bᵀ`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(&self.value(b).t());
        self.push(value, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add: shape mismatch");
        let value = self.value(a) + self.value(b);
        self.push(value, Op::Add(a, b))
    }

    /// Broadcast-add a `1 × c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.shape(row).0, 1);
        assert_eq!(self.shape(a).1, self.shape(row).1, "add_row: width mismatch");
        let value = self.value(a) + self.value(row);
        self.push(value, Op::AddRow(a, row))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul: shape mismatch");
        let value = self.value(a) * self.value(b);
        self.push(value, Op::Mul(a, b))
    }

    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.shape(row).0, 1);
        assert_eq!(self.shape(a).1, self.shape(row).1, "mul_row: width mismatch");
        let value = self.value(a) * self.value(row);
        self.push(value, Op::MulRow(a, row))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a) * factor;
        self.push(value, Op::Scale(a, factor))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("concat_cols: row mismatch");
        self.push(value, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(0), &views).expect("concat_rows: width mismatch");
        self.push(value, Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let value = self.value(a).slice(s![start..start + len, ..]).to_owned();
        self.push(value, Op::SliceRows(a, start))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let value = self.value(a).slice(s![.., start..start + len]).to_owned();
        self.push(value, Op::SliceCols(a, start))
    }

    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Var {
        let src = self.value(a);
        let mut out = Array2::zeros((rows.len(), src.ncols()));
        for (r, &i) in rows.iter().enumerate() {
            out.row_mut(r).assign(&src.row(i));
        }
        self.push(out, Op::GatherRows(a, rows.to_vec()))
    }

    /// Column-wise mean over rows, giving `1 × c`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let value = self.value(a).mean_axis(Axis(0)).expect("mean_rows: empty input").insert_axis(Axis(0));
        self.push(value, Op::MeanRows(a))
    }

    /// Column-wise max over rows (max-pooling over time), giving `1 × c`.
    pub fn max_rows(&mut self, a: Var) -> Var {
        let src = self.value(a);
        assert!(src.nrows() > 0, "max_rows: empty input");
        let mut out = Array2::zeros((1, src.ncols()));
        let mut arg = vec![0usize; src.ncols()];
        for j in 0..src.ncols() {
            let mut best = f64::NEG_INFINITY;
            for i in 0..src.nrows() {
                if src[[i, j]] > best {
                    best = src[[i, j]];
                    arg[j] = i;
                }
            }
            out[[0, j]] = best;
        }
        self.push(out, Op::MaxRows(a, arg))
    }

    /// Sliding windows of `width` consecutive rows flattened into one row
    /// each: `n × c` becomes `(n − width + 1) × (width·c)`. Combined with a
    /// matmul this is a 1-D convolution.
    pub fn windows(&mut self, a: Var, width: usize) -> Var {
        let src = self.value(a);
        let (n, c) = src.dim();
        assert!(n >= width && width > 0, "windows: {n} rows < width {width}");
        let rows = n - width + 1;
        let mut out = Array2::zeros((rows, width * c));
        for r in 0..rows {
            for k in 0..width {
                out.slice_mut(s![r, k * c..(k + 1) * c]).assign(&src.row(r + k));
            }
        }
        self.push(out, Op::Windows(a, width))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        for mut row in value.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|x| x / sum);
        }
        self.push(value, Op::SoftmaxRows(a))
    }

    /// Row-wise standardisation without affine terms.
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Var {
        let mut value = self.value(a).clone();
        let mut inv = Vec::with_capacity(value.nrows());
        for mut row in value.rows_mut() {
            let n = row.len() as f64;
            let mean = row.sum() / n;
            let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let is = 1.0 / (var + eps).sqrt();
            row.mapv_inplace(|x| (x - mean) * is);
            inv.push(is);
        }
        self.push(value, Op::LayerNorm(a, inv))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(value, Op::Sum(a))
    }

    pub fn add_scalars(&mut self, terms: &[Var]) -> Var {
        match terms {
            [] => self.input(Array2::zeros((1, 1))),
            [one] => *one,
            _ => {
                let total = terms.iter().map(|&t| self.scalar(t)).sum::<f64>();
                let grads = terms.iter().map(|&t| (t, Array2::from_elem((1, 1), 1.0))).collect();
                self.push(Array2::from_elem((1, 1), total), Op::Scalar(grads))
            }
        }
    }

    /// Register a scalar function of `inputs` whose gradient with respect to
    /// each input was computed by the caller.
    pub fn custom_scalar(&mut self, value: f64, local_grads: Vec<(Var, Mat)>) -> Var {
        for (v, g) in &local_grads {
            assert_eq!(self.shape(*v), g.dim(), "custom_scalar: gradient shape");
        }
        self.push(Array2::from_elem((1, 1), value), Op::Scalar(local_grads))
    }

    /// Summed cross-entropy of row-wise softmax over `logits` against class
    /// indices.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let x = self.value(logits);
        assert_eq!(x.nrows(), targets.len(), "cross_entropy: target count");
        let mut grad = x.clone();
        let mut loss = 0.0;
        for (mut row, &t) in grad.rows_mut().into_iter().zip(targets) {
            assert!(t < row.len(), "cross_entropy: target {t} out of range");
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[t];
            row.mapv_inplace(|v| (v - lse).exp());
            row[t] -= 1.0;
        }
        self.custom_scalar(loss, vec![(logits, grad)])
    }

    /// Summed elementwise binary cross-entropy with logits.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &Mat) -> Var {
        let x = self.value(logits);
        assert_eq!(x.dim(), targets.dim(), "bce_with_logits: shape");
        let mut loss = 0.0;
        let mut grad = Array2::zeros(x.dim());
        ndarray::Zip::from(&mut grad).and(x).and(targets).for_each(|g, &x, &t| {
            loss += x.max(0.0) - x * t + (-x.abs()).exp().ln_1p();
            *g = sigmoid(x) - t;
        });
        self.custom_scalar(loss, vec![(logits, grad)])
    }

    /// Reverse pass from a `1 × 1` node. Returns parameter gradients.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.shape(loss), (1, 1), "backward: loss must be scalar");
        let mut params = Gradients::new(self.store.len());
        let mut grads: Vec<Option<Mat>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Array2::from_elem((1, 1), 1.0));

        for i in (0..=loss.0).rev() {
            let Some(dy) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    params.accumulate(*id, dy.dim(), |g| *g += &dy);
                }
                Op::Embed(id, rows) => {
                    let shape = self.store.get(*id).dim();
                    params.accumulate(*id, shape, |g| {
                        for (r, &src) in rows.iter().enumerate() {
                            let mut dst = g.row_mut(src);
                            dst += &dy.row(r);
                        }
                    });
                }
                Op::MatMul(a, b) => {
                    let da = dy.dot(&self.value(*b).t());
                    let db = self.value(*a).t().dot(&dy);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::MatMulT(a, b) => {
                    let da = dy.dot(self.value(*b));
                    let db = dy.t().dot(self.value(*a));
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, dy.clone());
                    acc(&mut grads, *a, dy);
                }
                Op::AddRow(a, row) => {
                    let dr = dy.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, *row, dr);
                    acc(&mut grads, *a, dy);
                }
                Op::Mul(a, b) => {
                    let da = &dy * self.value(*b);
                    let db = &dy * self.value(*a);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::MulRow(a, row) => {
                    let da = &dy * self.value(*row);
                    let dr = (&dy * self.value(*a)).sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *row, dr);
                }
                Op::Scale(a, f) => acc(&mut grads, *a, dy * *f),
                Op::Tanh(a) => {
                    let y = &node.value;
                    let da = &dy * &y.mapv(|t| 1.0 - t * t);
                    acc(&mut grads, *a, da);
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let da = &dy * &y.mapv(|s| s * (1.0 - s));
                    acc(&mut grads, *a, da);
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let mut da = dy;
                    ndarray::Zip::from(&mut da).and(x).for_each(|d, &x| {
                        if x <= 0.0 {
                            *d = 0.0;
                        }
                    });
                    acc(&mut grads, *a, da);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.shape(*p).1;
                        acc(&mut grads, *p, dy.slice(s![.., off..off + w]).to_owned());
                        off += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let h = self.shape(*p).0;
                        acc(&mut grads, *p, dy.slice(s![off..off + h, ..]).to_owned());
                        off += h;
                    }
                }
                Op::SliceRows(a, start) => {
                    let mut da = Array2::zeros(self.shape(*a));
                    da.slice_mut(s![*start..*start + dy.nrows(), ..]).assign(&dy);
                    acc(&mut grads, *a, da);
                }
                Op::SliceCols(a, start) => {
                    let mut da = Array2::zeros(self.shape(*a));
                    da.slice_mut(s![.., *start..*start + dy.ncols()]).assign(&dy);
                    acc(&mut grads, *a, da);
                }
                Op::GatherRows(a, rows) => {
                    let mut da = Array2::zeros(self.shape(*a));
                    for (r, &src) in rows.iter().enumerate() {
                        let mut dst = da.row_mut(src);
                        dst += &dy.row(r);
                    }
                    acc(&mut grads, *a, da);
                }
                Op::MeanRows(a) => {
                    let (n, c) = self.shape(*a);
                    let mut da = Array2::zeros((n, c));
                    let row = dy.row(0).mapv(|x| x / n as f64);
                    for mut r in da.rows_mut() {
                        r.assign(&row);
                    }
                    acc(&mut grads, *a, da);
                }
                Op::MaxRows(a, arg) => {
                    let mut da = Array2::zeros(self.shape(*a));
                    for (j, &i) in arg.iter().enumerate() {
                        da[[i, j]] += dy[[0, j]];
                    }
                    acc(&mut grads, *a, da);
                }
                Op::Windows(a, width) => {
                    let (n, c) = self.shape(*a);
                    let mut da = Array2::zeros((n, c));
                    for r in 0..dy.nrows() {
                        for k in 0..*width {
                            let mut dst = da.row_mut(r + k);
                            dst += &dy.slice(s![r, k * c..(k + 1) * c]);
                        }
                    }
                    acc(&mut grads, *a, da);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut da = &dy * y;
                    for (mut row, yrow) in da.rows_mut().into_iter().zip(y.rows()) {
                        let dot = row.sum();
                        row.zip_mut_with(&yrow, |d, &yv| *d -= yv * dot);
                    }
                    acc(&mut grads, *a, da);
                }
                Op::LayerNorm(a, inv) => {
                    let y = &node.value;
                    let c = y.ncols() as f64;
                    let mut da = Array2::zeros(y.dim());
                    for r in 0..y.nrows() {
                        let dyr = dy.row(r);
                        let yr = y.row(r);
                        let mean_dy = dyr.sum() / c;
                        let mean_dyy = dyr.iter().zip(yr.iter()).map(|(d, y)| d * y).sum::<f64>() / c;
                        for j in 0..y.ncols() {
                            da[[r, j]] = inv[r] * (dyr[j] - mean_dy - yr[j] * mean_dyy);
                        }
                    }
                    acc(&mut grads, *a, da);
                }
                Op::Sum(a) => {
                    let da = Array2::from_elem(self.shape(*a), dy[[0, 0]]);
                    acc(&mut grads, *a, da);
                }
                Op::Scalar(locals) => {
                    let up = dy[[0, 0]];
                    for (v, g) in locals {
                        acc(&mut grads, *v, g * up);
                    }
                }
            }
        }
        params
    }
}

fn acc(grads: &mut [Option<Mat>], v: Var, g: Mat) {
    match &mut grads[v.0] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Central-difference check of every parameter entry.
    fn check<F>(store: &mut ParamStore, f: F)
    where
        F: Fn(&mut Graph) -> Var,
    {
        let grads = {
            let mut g = Graph::new(store);
            let loss = f(&mut g);
            g.backward(loss)
        };
        let eval = |s: &ParamStore| {
            let mut g = Graph::new(s);
            let l = f(&mut g);
            g.scalar(l)
        };
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let shape = store.get(id).dim();
            for idx in 0..shape.0 * shape.1 {
                let (r, c) = (idx / shape.1, idx % shape.1);
                let orig = store.get(id)[[r, c]];
                let h = 1e-6;
                store.get_mut(id)[[r, c]] = orig + h;
                let up = eval(store);
                store.get_mut(id)[[r, c]] = orig - h;
                let down = eval(store);
                store.get_mut(id)[[r, c]] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.get(id).map_or(0.0, |g| g[[r, c]]);
                let denom = analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(
                    (analytic - numeric).abs() / denom < 1e-5,
                    "{}[{r},{c}]: analytic {analytic} numeric {numeric}",
                    store.name(id)
                );
            }
        }
    }

    #[test]
    fn elementary_ops_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let a = store.add_xavier("a", 4, 3, &mut rng);
        let b = store.add_xavier("b", 3, 5, &mut rng);
        let row = store.add_xavier("row", 1, 5, &mut rng);
        let emb = store.add_xavier("emb", 6, 3, &mut rng);
        check(&mut store, |g| {
            let a = g.param(a);
            let b = g.param(b);
            let row = g.param(row);
            let e = g.embed(emb, &[1, 4, 1, 0]);
            let ae = g.add(a, e);
            let m = g.matmul(ae, b);
            let m = g.add_row(m, row);
            let t = g.tanh(m);
            let s = g.sigmoid(m);
            let r = g.relu(m);
            let ts = g.mul(t, s);
            let mr = g.mul_row(r, row);
            let cat = g.concat_cols(&[ts, mr]);
            let sm = g.softmax_rows(cat);
            let ln = g.layer_norm(cat, 1e-5);
            let both = g.concat_rows(&[sm, ln]);
            let w = g.windows(both, 3);
            let pooled = g.max_rows(w);
            let mean = g.mean_rows(both);
            let sl = g.slice_cols(mean, 2, 4);
            let gathered = g.gather_rows(both, &[0, 7, 7]);
            let gs = g.slice_rows(gathered, 1, 2);
            let mt = g.matmul_t(gs, both);
            let ce = g.cross_entropy(mt, &[2, 5]);
            let s1 = g.sum(pooled);
            let s2 = g.sum(sl);
            let s2 = g.scale(s2, 0.3);
            let bce = g.bce_with_logits(sl, &array![[1.0, 0.0, 1.0, 0.0]]);
            g.add_scalars(&[ce, s1, s2, bce])
        });
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = log_sum_exp([1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }
}
