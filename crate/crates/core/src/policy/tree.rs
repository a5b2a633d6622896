use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::linalg;
use crate::par;
use crate::rng::{self, tag, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMode {
    Bagging,
    Boosting,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub mode: EnsembleMode,
    /// Shrinkage, boosting only.
    pub learning_rate: f64,
    /// Features tried per split; `None` means `√d` for bagging and all for boosting.
    pub mtry: Option<usize>,
    pub max_bins: usize,
}

impl TreeParams {
    pub fn forest() -> Self {
        TreeParams { n_trees: 100, max_depth: 12, min_leaf: 5, mode: EnsembleMode::Bagging, learning_rate: 1.0, mtry: None, max_bins: 64 }
    }

    pub fn boost() -> Self {
        TreeParams { n_trees: 200, max_depth: 4, min_leaf: 20, mode: EnsembleMode::Boosting, learning_rate: 0.1, mtry: None, max_bins: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Node {
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
    Leaf { offset: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
    values: Vec<f64>,
    width: usize,
}

impl Tree {
    fn leaf(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature as usize] <= *threshold { *left as usize } else { *right as usize };
                }
                Node::Leaf { offset } => {
                    let o = *offset as usize;
                    return &self.values[o..o + self.width];
                }
            }
        }
    }
}

/// Bagged classification trees or multinomial gradient boosting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub mode: EnsembleMode,
    pub n_classes: usize,
    pub dim: usize,
    /// Classes seen in training; the rest are predicted with probability zero.
    pub active: Vec<usize>,
    pub learning_rate: f64,
    init: Vec<f64>,
    trees: Vec<Tree>,
}

impl TreeEnsemble {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn predict_features(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match self.mode {
            EnsembleMode::Bagging => {
                for t in &self.trees {
                    for (o, v) in out.iter_mut().zip(t.leaf(x)) {
                        *o += v;
                    }
                }
                let n = self.trees.len() as f64;
                out.iter_mut().for_each(|o| *o /= n);
            }
            EnsembleMode::Boosting => {
                let m = self.active.len();
                let mut f = self.init.clone();
                for (i, t) in self.trees.iter().enumerate() {
                    f[i % m] += self.learning_rate * t.leaf(x)[0];
                }
                let mut p = vec![0.0; m];
                linalg::softmax_into(&f, &mut p);
                for (j, &c) in self.active.iter().enumerate() {
                    out[c] = p[j];
                }
            }
        }
    }
}

/// Per-feature split candidates; a value falls in bin `b` when it is at most
/// `thresholds[b]` and above `thresholds[b - 1]`.
struct Binner {
    thresholds: Vec<Vec<f64>>,
}

impl Binner {
    fn new(data: &Dataset, max_bins: usize) -> Self {
        let thresholds = (0..data.dim)
            .map(|f| {
                let mut v: Vec<f64> = (0..data.len()).map(|i| data.x[i * data.dim + f]).collect();
                v.sort_by(|a, b| a.total_cmp(b));
                v.dedup();
                if v.len() <= max_bins {
                    v.pop();
                    v
                } else {
                    let mut t: Vec<f64> = (1..max_bins).map(|q| v[q * v.len() / max_bins]).collect();
                    t.dedup();
                    t
                }
            })
            .collect();
        Binner { thresholds }
    }

    /// Column-major bin codes.
    fn codes(&self, data: &Dataset) -> Vec<u8> {
        let n = data.len();
        let mut out = vec![0u8; n * data.dim];
        for f in 0..data.dim {
            let th = &self.thresholds[f];
            for i in 0..n {
                let x = data.x[i * data.dim + f];
                out[f * n + i] = th.partition_point(|&t| t < x) as u8;
            }
        }
        out
    }
}

struct Builder<'a> {
    binner: &'a Binner,
    codes: &'a [u8],
    n: usize,
    params: &'a TreeParams,
    mtry: usize,
}

struct Grown {
    nodes: Vec<Node>,
    values: Vec<f64>,
}

impl Builder<'_> {
    fn bins(&self, f: usize) -> usize {
        self.binner.thresholds[f].len() + 1
    }

    fn code(&self, f: usize, i: u32) -> usize {
        self.codes[f * self.n + i as usize] as usize
    }

    fn features(&self, rng: &mut StreamRng) -> Vec<usize> {
        let d = self.binner.thresholds.len();
        let mut f: Vec<usize> = (0..d).collect();
        if self.mtry < d {
            f.partial_shuffle(rng, self.mtry);
            f.truncate(self.mtry);
        }
        f
    }

    fn push_split(&self, g: &mut Grown, at: usize, f: usize, b: usize, left: usize, right: usize) {
        g.nodes[at] = Node::Split {
            feature: f as u32,
            threshold: self.binner.thresholds[f][b],
            left: left as u32,
            right: right as u32,
        };
    }

    /// Classification tree on weighted rows, Gini criterion.
    fn classify(&self, rows: Vec<u32>, y: &[usize], w: &[f64], c: usize, rng: &mut StreamRng) -> Tree {
        let mut g = Grown { nodes: Vec::new(), values: Vec::new() };
        let mut stack = vec![(rows, 0usize, 0usize)];
        g.nodes.push(Node::Leaf { offset: 0 });
        while let Some((rows, depth, at)) = stack.pop() {
            let mut tot = vec![0.0; c];
            for &i in &rows {
                tot[y[i as usize]] += w[i as usize];
            }
            let n: f64 = tot.iter().sum();
            let pure = tot.iter().filter(|&&v| v > 0.0).count() <= 1;
            let mut best: Option<(f64, usize, usize)> = None;
            if depth < self.params.max_depth && !pure && n >= 2.0 * self.params.min_leaf as f64 {
                let parent = tot.iter().map(|v| v * v).sum::<f64>() / n;
                let min_leaf = self.params.min_leaf as f64;
                for f in self.features(rng) {
                    let nb = self.bins(f);
                    let mut hist = vec![0.0; nb * c];
                    for &i in &rows {
                        hist[self.code(f, i) * c + y[i as usize]] += w[i as usize];
                    }
                    let mut left = vec![0.0; c];
                    let mut nl = 0.0;
                    for b in 0..nb - 1 {
                        for k in 0..c {
                            left[k] += hist[b * c + k];
                            nl += hist[b * c + k];
                        }
                        let nr = n - nl;
                        if nl < min_leaf || nr < min_leaf || nl <= 0.0 || nr <= 0.0 {
                            continue;
                        }
                        let sl: f64 = left.iter().map(|v| v * v).sum();
                        let sr: f64 = (0..c).map(|k| (tot[k] - left[k]).powi(2)).sum();
                        let score = sl / nl + sr / nr;
                        if score > parent + 1e-12 && best.map_or(true, |bst| score > bst.0) {
                            best = Some((score, f, b));
                        }
                    }
                }
            }
            match best {
                Some((_, f, b)) => {
                    let (l, r): (Vec<u32>, Vec<u32>) = rows.iter().partition(|&&i| self.code(f, i) <= b);
                    let li = g.nodes.len();
                    g.nodes.push(Node::Leaf { offset: 0 });
                    g.nodes.push(Node::Leaf { offset: 0 });
                    self.push_split(&mut g, at, f, b, li, li + 1);
                    stack.push((r, depth + 1, li + 1));
                    stack.push((l, depth + 1, li));
                }
                None => {
                    g.nodes[at] = Node::Leaf { offset: g.values.len() as u32 };
                    g.values.extend(tot.iter().map(|v| v / n));
                }
            }
        }
        Tree { nodes: g.nodes, values: g.values, width: c }
    }

    /// Least-squares regression tree on residuals `r` with Newton leaf values
    /// `scale · Σr / Σ|r|(1 − |r|)`.
    fn regress(&self, rows: Vec<u32>, r: &[f64], scale: f64, rng: &mut StreamRng) -> Tree {
        let mut g = Grown { nodes: Vec::new(), values: Vec::new() };
        let mut stack = vec![(rows, 0usize, 0usize)];
        g.nodes.push(Node::Leaf { offset: 0 });
        let min_leaf = self.params.min_leaf.max(1);
        while let Some((rows, depth, at)) = stack.pop() {
            let n = rows.len();
            let s: f64 = rows.iter().map(|&i| r[i as usize]).sum();
            let mut best: Option<(f64, usize, usize)> = None;
            if depth < self.params.max_depth && n >= 2 * min_leaf {
                let parent = s * s / n as f64;
                for f in self.features(rng) {
                    let nb = self.bins(f);
                    let mut hs = vec![0.0; nb];
                    let mut hn = vec![0usize; nb];
                    for &i in &rows {
                        let b = self.code(f, i);
                        hs[b] += r[i as usize];
                        hn[b] += 1;
                    }
                    let (mut sl, mut nl) = (0.0, 0usize);
                    for b in 0..nb - 1 {
                        sl += hs[b];
                        nl += hn[b];
                        let nr = n - nl;
                        if nl < min_leaf || nr < min_leaf {
                            continue;
                        }
                        let sr = s - sl;
                        let score = sl * sl / nl as f64 + sr * sr / nr as f64;
                        if score > parent + 1e-12 && best.map_or(true, |bst| score > bst.0) {
                            best = Some((score, f, b));
                        }
                    }
                }
            }
            match best {
                Some((_, f, b)) => {
                    let (l, rr): (Vec<u32>, Vec<u32>) = rows.iter().partition(|&&i| self.code(f, i) <= b);
                    let li = g.nodes.len();
                    g.nodes.push(Node::Leaf { offset: 0 });
                    g.nodes.push(Node::Leaf { offset: 0 });
                    self.push_split(&mut g, at, f, b, li, li + 1);
                    stack.push((rr, depth + 1, li + 1));
                    stack.push((l, depth + 1, li));
                }
                None => {
                    let den: f64 = rows.iter().map(|&i| r[i as usize].abs() * (1.0 - r[i as usize].abs())).sum();
                    let v = if den > 1e-12 { scale * s / den } else { 0.0 };
                    g.nodes[at] = Node::Leaf { offset: g.values.len() as u32 };
                    g.values.push(v);
                }
            }
        }
        Tree { nodes: g.nodes, values: g.values, width: 1 }
    }
}

/// Fits bagged Gini trees (`√d` features per split, probability averaging) or
/// multinomial gradient boosting with shrinkage. Deterministic given `seed`
/// and independent of the number of worker threads.
pub fn fit_tree_ensemble(data: &Dataset, params: &TreeParams, seed: u64) -> Result<TreeEnsemble, super::PolicyError> {
    if data.is_empty() {
        return Err(super::PolicyError::EmptyTrainingSet);
    }
    let binner = Binner::new(data, params.max_bins.clamp(2, 256));
    let codes = binner.codes(data);
    let n = data.len();
    let c = data.n_classes;
    let counts = data.class_counts();
    let active: Vec<usize> = (0..c).filter(|&k| counts[k] > 0).collect();
    let d = data.dim;
    let mtry = params.mtry.unwrap_or(match params.mode {
        EnsembleMode::Bagging => ((d as f64).sqrt().round() as usize).max(1),
        EnsembleMode::Boosting => d,
    });
    let b = Builder { binner: &binner, codes: &codes, n, params, mtry: mtry.clamp(1, d.max(1)) };
    let n_trees = params.n_trees.max(1);
    match params.mode {
        EnsembleMode::Bagging => {
            let trees = par::map_indexed(n_trees, |t| {
                let mut rng = rng::stream(seed, tag::FOREST, t as u64);
                let mut w = vec![0.0; n];
                for _ in 0..n {
                    w[rng.gen_range(0..n)] += 1.0;
                }
                let rows: Vec<u32> = (0..n as u32).filter(|&i| w[i as usize] > 0.0).collect();
                b.classify(rows, &data.y, &w, c, &mut rng)
            });
            Ok(TreeEnsemble { mode: params.mode, n_classes: c, dim: d, active, learning_rate: 1.0, init: Vec::new(), trees })
        }
        EnsembleMode::Boosting => {
            let m = active.len();
            let init: Vec<f64> = active.iter().map(|&k| (counts[k] as f64 / n as f64).ln()).collect();
            let mut class_of = vec![usize::MAX; c];
            for (j, &k) in active.iter().enumerate() {
                class_of[k] = j;
            }
            let mut f: Vec<f64> = (0..n).flat_map(|_| init.iter().copied()).collect();
            let mut trees = Vec::with_capacity(n_trees * m);
            let scale = if m > 1 { (m as f64 - 1.0) / m as f64 } else { 0.0 };
            let mut p = vec![0.0; n * m];
            for round in 0..n_trees {
                for i in 0..n {
                    linalg::softmax_into(&f[i * m..(i + 1) * m], &mut p[i * m..(i + 1) * m]);
                }
                let round_trees = par::map_indexed(m, |j| {
                    let r: Vec<f64> = (0..n)
                        .map(|i| if class_of[data.y[i]] == j { 1.0 } else { 0.0 } - p[i * m + j])
                        .collect();
                    let mut rng = rng::stream(seed, tag::BOOST, (round * m + j) as u64);
                    b.regress((0..n as u32).collect(), &r, scale, &mut rng)
                });
                for (j, t) in round_trees.iter().enumerate() {
                    for i in 0..n {
                        f[i * m + j] += params.learning_rate * t.leaf(data.row(i))[0];
                    }
                }
                trees.extend(round_trees);
            }
            Ok(TreeEnsemble { mode: params.mode, n_classes: c, dim: d, active, learning_rate: params.learning_rate, init, trees })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor(n: usize, seed: u64) -> Dataset {
        let mut rng = rng::stream(seed, 7, 0);
        let mut d = Dataset { dim: 2, n_classes: 2, ..Default::default() };
        for i in 0..n {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let on = (x[0] > 0.5) ^ (x[1] > 0.5);
            let p1 = if on { 0.9 } else { 0.1 };
            d.push(&x, usize::from(rng.gen::<f64>() < p1), i);
        }
        d
    }

    #[test]
    fn depth_zero_predicts_class_frequencies() {
        let d = xor(400, 1);
        let counts = d.class_counts();
        for mode in [EnsembleMode::Bagging, EnsembleMode::Boosting] {
            let params = TreeParams { n_trees: 1, max_depth: 0, min_leaf: 1, mode, learning_rate: 0.1, mtry: None, max_bins: 16 };
            let e = fit_tree_ensemble(&d, &params, 3).unwrap();
            let mut out = [0.0; 2];
            e.predict_features(&[0.2, 0.7], &mut out);
            if mode == EnsembleMode::Boosting {
                assert!((out[1] - counts[1] as f64 / 400.0).abs() < 1e-12);
            } else {
                // one bootstrap sample: frequencies of that resample
                assert!((out[0] + out[1] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pure_training_set() {
        let mut d = Dataset { dim: 1, n_classes: 3, ..Default::default() };
        for i in 0..50 {
            d.push(&[i as f64], 1, i);
        }
        for params in [TreeParams::forest(), TreeParams { n_trees: 5, ..TreeParams::boost() }] {
            let e = fit_tree_ensemble(&d, &params, 0).unwrap();
            let mut out = [0.0; 3];
            e.predict_features(&[1e6], &mut out);
            assert_eq!(out, [0.0, 1.0, 0.0]);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let d = xor(300, 2);
        let p = TreeParams { n_trees: 10, ..TreeParams::forest() };
        assert_eq!(fit_tree_ensemble(&d, &p, 9).unwrap(), fit_tree_ensemble(&d, &p, 9).unwrap());
    }
}
