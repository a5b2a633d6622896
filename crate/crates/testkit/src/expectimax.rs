//! Exhaustive game-tree enumeration of the recommendation problem.
//!
//! Nodes hold `A` and `R` as integer grid coordinates (`m / g`), re-projected
//! after every move with [`crate::simplex::nearest`]. The tree is expanded
//! without memoisation: every path is walked.

use std::collections::BTreeMap;

use searchrec_core::policy::ChoiceModel;
use searchrec_core::{FreqVector, RecAction, RecState};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Node {
    pub t: usize,
    pub last: usize,
    /// `None` before any earlier click.
    pub views: Option<Vec<u32>>,
    pub recs: Option<Vec<u32>>,
}

#[derive(Clone, Debug)]
pub struct Visit {
    pub value: f64,
    /// Value of every candidate action (empty at the horizon), in `actions` order.
    pub q: Vec<f64>,
}

pub struct Expectimax<'a> {
    pub choice: &'a dyn ChoiceModel,
    pub k: usize,
    pub horizon: usize,
    pub g: u32,
    pub margins: Vec<f64>,
    pub actions: Vec<RecAction>,
    pub visits: BTreeMap<Node, Visit>,
}

/// Multisets `i ≤ j ≤ l`, lexicographic.
pub fn multisets(k: usize) -> Vec<RecAction> {
    let mut out = Vec::new();
    for i in 0..k {
        for j in i..k {
            for l in j..k {
                out.push(RecAction::new([i, j, l]));
            }
        }
    }
    out
}

impl<'a> Expectimax<'a> {
    pub fn new(choice: &'a dyn ChoiceModel, horizon: usize, g: u32, margins: &[f64]) -> Self {
        let k = choice.k();
        Expectimax { choice, k, horizon, g, margins: margins.to_vec(), actions: multisets(k), visits: BTreeMap::new() }
    }

    fn to_freq(&self, coords: &Option<Vec<u32>>) -> FreqVector {
        match coords {
            None => FreqVector::empty(self.k),
            Some(m) => FreqVector::from_ratio(m.iter().map(|&x| u64::from(x)).collect(), u64::from(self.g)),
        }
    }

    /// `(old · n_old + counts) / (n_old + added)` as a ratio, with `old` on
    /// the grid (or absent).
    fn mix(&self, old: &Option<Vec<u32>>, n_old: u64, counts: &[u64]) -> (Vec<u64>, u64) {
        let g = u64::from(self.g);
        let added: u64 = counts.iter().sum();
        match old {
            Some(m) if n_old > 0 => {
                let num = m.iter().zip(counts).map(|(&x, &c)| n_old * u64::from(x) + g * c).collect();
                (num, g * (n_old + added))
            }
            _ => (counts.to_vec(), added),
        }
    }

    fn counts(&self, items: &[usize]) -> Vec<u64> {
        let mut c = vec![0u64; self.k];
        for &i in items {
            c[i] += 1;
        }
        c
    }

    fn conversion(&self, p: &[f64]) -> f64 {
        (0..self.k).map(|c| self.margins[c] * p[self.k + c]).sum()
    }

    /// Value of `node`, recording it and every descendant in `visits`.
    pub fn solve(&mut self, node: Node) -> f64 {
        let views = self.to_freq(&node.views);
        if node.t >= self.horizon {
            let state = RecState { t: node.t, last: node.last, views, recs: self.to_freq(&node.recs) };
            let v = self.conversion(&self.choice.predict(&state));
            self.visits.insert(node, Visit { value: v, q: Vec::new() });
            return v;
        }
        let n_recs = 3 * (node.t as u64 - 1);
        let mut q = Vec::with_capacity(self.actions.len());
        for r in self.actions.clone() {
            let rc = self.counts(&r.slots());
            let (num, den) = self.mix(&node.recs, n_recs, &rc);
            let state = RecState { t: node.t, last: node.last, views: views.clone(), recs: FreqVector::from_ratio(num.clone(), den) };
            let p = self.choice.predict(&state);
            let mut value = self.conversion(&p);
            let next_recs = crate::simplex::nearest(&num, den, self.g);
            let (vn, vd) = self.mix(&node.views, node.t as u64 - 1, &self.counts(&[node.last]));
            let next_views = crate::simplex::nearest(&vn, vd, self.g);
            for c in 0..self.k {
                let child = Node { t: node.t + 1, last: c, views: Some(next_views.clone()), recs: Some(next_recs.clone()) };
                value += p[c] * self.solve(child);
            }
            q.push(value);
        }
        let v = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.visits.insert(node, Visit { value: v, q });
        v
    }

    /// Solves every first-click root; returns `V_1(a)` for each `a`.
    pub fn solve_roots(&mut self) -> Vec<f64> {
        (0..self.k).map(|a| self.solve(Node { t: 1, last: a, views: None, recs: None })).collect()
    }
}
