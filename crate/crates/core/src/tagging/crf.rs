//! Linear-chain CRF over `L` labels.
//!
//! Transitions are an `(L+2) × (L+2)` matrix where row/column `L` is the
//! start state and `L+1` the stop state; `trans[[a, b]]` scores `a → b`.

use ndarray::Array2;

use crate::nn::{log_sum_exp, Graph, Mat, Var};

pub fn start_state(num_labels: usize) -> usize {
    num_labels
}

pub fn stop_state(num_labels: usize) -> usize {
    num_labels + 1
}

fn check(emissions: &Mat, transitions: &Mat) -> usize {
    let l = emissions.ncols();
    assert_eq!(transitions.dim(), (l + 2, l + 2), "crf: transition shape");
    l
}

/// Unnormalised score of one label path.
pub fn path_score(emissions: &Mat, transitions: &Mat, path: &[usize]) -> f64 {
    let l = check(emissions, transitions);
    assert_eq!(path.len(), emissions.nrows(), "crf: path length");
    if path.is_empty() {
        return transitions[[start_state(l), stop_state(l)]];
    }
    let mut s = transitions[[start_state(l), path[0]]];
    for (t, &y) in path.iter().enumerate() {
        s += emissions[[t, y]];
        if t > 0 {
            s += transitions[[path[t - 1], y]];
        }
    }
    s + transitions[[path[path.len() - 1], stop_state(l)]]
}

/// Forward log-messages `alpha[t][y]` (path prefix ending in `y` at `t`).
fn forward(emissions: &Mat, transitions: &Mat) -> Mat {
    let (n, l) = emissions.dim();
    let mut alpha = Array2::zeros((n, l));
    for y in 0..l {
        alpha[[0, y]] = transitions[[start_state(l), y]] + emissions[[0, y]];
    }
    for t in 1..n {
        for y in 0..l {
            alpha[[t, y]] = emissions[[t, y]] + log_sum_exp((0..l).map(|p| alpha[[t - 1, p]] + transitions[[p, y]]));
        }
    }
    alpha
}

fn backward(emissions: &Mat, transitions: &Mat) -> Mat {
    let (n, l) = emissions.dim();
    let mut beta = Array2::zeros((n, l));
    for y in 0..l {
        beta[[n - 1, y]] = transitions[[y, stop_state(l)]];
    }
    for t in (0..n - 1).rev() {
        for y in 0..l {
            beta[[t, y]] = log_sum_exp((0..l).map(|q| transitions[[y, q]] + emissions[[t + 1, q]] + beta[[t + 1, q]]));
        }
    }
    beta
}

/// `log Σ_paths exp(score)` by the forward algorithm.
pub fn log_partition(emissions: &Mat, transitions: &Mat) -> f64 {
    let l = check(emissions, transitions);
    let n = emissions.nrows();
    if n == 0 {
        return transitions[[start_state(l), stop_state(l)]];
    }
    let alpha = forward(emissions, transitions);
    log_sum_exp((0..l).map(|y| alpha[[n - 1, y]] + transitions[[y, stop_state(l)]]))
}

pub fn neg_log_likelihood(emissions: &Mat, transitions: &Mat, gold: &[usize]) -> f64 {
    log_partition(emissions, transitions) - path_score(emissions, transitions, gold)
}

/// NLL together with its gradients with respect to emissions and
/// transitions (marginals minus gold indicators).
pub fn nll_with_grads(emissions: &Mat, transitions: &Mat, gold: &[usize]) -> (f64, Mat, Mat) {
    let l = check(emissions, transitions);
    let n = emissions.nrows();
    let mut ge = Array2::zeros((n, l));
    let mut gt = Array2::zeros((l + 2, l + 2));
    let (st, sp) = (start_state(l), stop_state(l));
    if n == 0 {
        return (0.0, ge, gt);
    }
    let alpha = forward(emissions, transitions);
    let beta = backward(emissions, transitions);
    let log_z = log_sum_exp((0..l).map(|y| alpha[[n - 1, y]] + beta[[n - 1, y]]));

    for t in 0..n {
        for y in 0..l {
            ge[[t, y]] = (alpha[[t, y]] + beta[[t, y]] - log_z).exp();
        }
    }
    for y in 0..l {
        gt[[st, y]] += ge[[0, y]];
        gt[[y, sp]] += ge[[n - 1, y]];
    }
    for t in 1..n {
        for p in 0..l {
            for q in 0..l {
                gt[[p, q]] +=
                    (alpha[[t - 1, p]] + transitions[[p, q]] + emissions[[t, q]] + beta[[t, q]] - log_z).exp();
            }
        }
    }

    ge[[0, gold[0]]] -= 1.0;
    gt[[st, gold[0]]] -= 1.0;
    for t in 1..n {
        ge[[t, gold[t]]] -= 1.0;
        gt[[gold[t - 1], gold[t]]] -= 1.0;
    }
    gt[[gold[n - 1], sp]] -= 1.0;

    let nll = log_z - path_score(emissions, transitions, gold);
    (nll.max(0.0), ge, gt)
}

/// Highest-scoring path. Ties go to the lowest label index, both for the
/// final label and at every back-pointer.
pub fn viterbi(emissions: &Mat, transitions: &Mat) -> Vec<usize> {
    let l = check(emissions, transitions);
    let n = emissions.nrows();
    if n == 0 {
        return Vec::new();
    }
    let argmax = |it: &mut dyn Iterator<Item = f64>| {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, v) in it.enumerate() {
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    };
    let mut delta = Array2::zeros((n, l));
    let mut back = vec![vec![0usize; l]; n];
    for y in 0..l {
        delta[[0, y]] = transitions[[start_state(l), y]] + emissions[[0, y]];
    }
    for t in 1..n {
        for y in 0..l {
            let (p, v) = argmax(&mut (0..l).map(|p| delta[[t - 1, p]] + transitions[[p, y]]));
            delta[[t, y]] = v + emissions[[t, y]];
            back[t][y] = p;
        }
    }
    let (mut y, _) = argmax(&mut (0..l).map(|y| delta[[n - 1, y]] + transitions[[y, stop_state(l)]]));
    let mut path = vec![0; n];
    for t in (0..n).rev() {
        path[t] = y;
        y = back[t][y];
    }
    path
}

/// CRF negative log-likelihood as a graph node.
pub fn crf_loss(g: &mut Graph, emissions: Var, transitions: Var, gold: &[usize]) -> Var {
    let (nll, ge, gt) = nll_with_grads(g.value(emissions), g.value(transitions), gold);
    g.custom_scalar(nll, vec![(emissions, ge), (transitions, gt)])
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Every label path of length `n` over `l` labels, lexicographic.
    pub(crate) fn all_paths(n: usize, l: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..l).map(move |y| {
                        let mut q = p.clone();
                        q.push(y);
                        q
                    })
                })
                .collect();
        }
        out
    }

    pub(crate) fn random_instance(rng: &mut ChaCha8Rng, n: usize, l: usize) -> (Mat, Mat) {
        let e = Array2::from_shape_fn((n, l), |_| rng.gen_range(-3.0..3.0));
        let t = Array2::from_shape_fn((l + 2, l + 2), |_| rng.gen_range(-3.0..3.0));
        (e, t)
    }

    #[test]
    fn uniform_single_token_loss_is_log_l() {
        for l in [1, 3, 15] {
            let e = Array2::zeros((1, l));
            let t = Array2::zeros((l + 2, l + 2));
            assert!((neg_log_likelihood(&e, &t, &[0]) - (l as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_transitions_decode_to_per_token_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (e, _) = random_instance(&mut rng, 6, 4);
        let t = Array2::zeros((6, 6));
        let expected: Vec<usize> = e
            .rows()
            .into_iter()
            .map(|r| r.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b }).0)
            .collect();
        assert_eq!(viterbi(&e, &t), expected);
    }

    #[test]
    fn matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.gen_range(1..=6);
            let (e, t) = random_instance(&mut rng, n, 3);
            let paths = all_paths(n, 3);
            let scores: Vec<f64> = paths.iter().map(|p| path_score(&e, &t, p)).collect();
            let brute_z = log_sum_exp(scores.iter().copied());
            assert!((log_partition(&e, &t) - brute_z).abs() < 1e-9);
            let best = scores.iter().enumerate().fold(0, |b, (i, &s)| if s > scores[b] { i } else { b });
            assert_eq!(viterbi(&e, &t), paths[best]);
        }
    }

    #[test]
    fn penalised_i_after_o_is_avoided() {
        // labels: 0=O, 1=B, 2=I. Emissions mildly prefer O then I.
        let e = ndarray::arr2(&[[1.0, 0.0, 0.0], [0.0, 0.5, 0.9]]);
        let mut t = Array2::zeros((5, 5));
        assert_eq!(viterbi(&e, &t), vec![0, 2]);
        t[[0, 2]] = -100.0;
        t[[start_state(3), 2]] = -100.0;
        assert_eq!(viterbi(&e, &t), vec![0, 1]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (e, t) = random_instance(&mut rng, 5, 3);
        let gold = [0, 1, 2, 2, 0];
        let (_, ge, gt) = nll_with_grads(&e, &t, &gold);
        let h = 1e-6;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
        for idx in ndarray::indices(e.dim()) {
            let (mut p, mut m) = (e.clone(), e.clone());
            p[idx] += h;
            m[idx] -= h;
            let num = (neg_log_likelihood(&p, &t, &gold) - neg_log_likelihood(&m, &t, &gold)) / (2.0 * h);
            assert!(rel(ge[idx], num) < 1e-5, "emission {idx:?}");
        }
        for idx in ndarray::indices(t.dim()) {
            let (mut p, mut m) = (t.clone(), t.clone());
            p[idx] += h;
            m[idx] -= h;
            let num = (neg_log_likelihood(&e, &p, &gold) - neg_log_likelihood(&e, &m, &gold)) / (2.0 * h);
            assert!(rel(gt[idx], num) < 1e-5, "transition {idx:?}");
        }
    }

    #[test]
    fn loss_is_non_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let n = rng.gen_range(1..=5);
            let (e, t) = random_instance(&mut rng, n, 3);
            let gold: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            assert!(neg_log_likelihood(&e, &t, &gold) >= -1e-12);
        }
    }
}
