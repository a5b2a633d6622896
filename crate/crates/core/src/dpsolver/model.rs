use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{enumerate_actions, DpError};
use crate::par;
use crate::policy::{n_actions, ChoiceModel};
use crate::rng::mix64;
use crate::staterec::{FreqVector, RecAction, RecState, SimplexLattice};
use crate::REC_SLOTS;

/// Upper bound on stored probabilities (8 bytes each) before building refuses.
pub const DEFAULT_MAX_ENTRIES: u128 = 250_000_000;

/// Consumer choice probabilities precomputed on every lattice state and
/// recommendation, plus the lattice transition maps.
///
/// States at `t = 1` are the `K` cold-start states; for `t >= 2` they are
/// `(a, A, R)` with `A` and `R` proper lattice points, indexed
/// `a · P² + A · P + R` with `P` the number of proper points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionModel {
    pub k: usize,
    pub horizon: usize,
    pub lattice: SimplexLattice,
    pub actions: Vec<RecAction>,
    /// For `t = 1..T-1`: `[state][action][class]`.
    probs: Vec<Vec<f64>>,
    /// At `t = T`: `[state][class]`, no pending recommendation.
    terminal: Vec<f64>,
    /// For `t = 1..T-1`: `[a · L + A] → A'`.
    next_views: Vec<Vec<u32>>,
    /// For `t = 1..T-1`: `[R · n_actions + r] → R'`.
    next_recs: Vec<Vec<u32>>,
}

impl DecisionModel {
    pub fn build(policy: &dyn ChoiceModel, lattice: &SimplexLattice, horizon: usize) -> Result<Self, DpError> {
        Self::build_with_limit(policy, lattice, horizon, DEFAULT_MAX_ENTRIES)
    }

    pub fn build_with_limit(policy: &dyn ChoiceModel, lattice: &SimplexLattice, horizon: usize, limit: u128) -> Result<Self, DpError> {
        let k = policy.k();
        if horizon == 0 {
            return Err(DpError::Horizon);
        }
        if lattice.k() != k {
            return Err(DpError::KMismatch { policy: k, model: lattice.k() });
        }
        let actions = enumerate_actions(k);
        let c = n_actions(k);
        let entries = Self::entries(k, lattice.num_points(), actions.len(), horizon);
        if entries > limit {
            return Err(DpError::TooLarge { entries, limit });
        }
        let mut model = DecisionModel {
            k,
            horizon,
            lattice: lattice.clone(),
            actions,
            probs: Vec::new(),
            terminal: Vec::new(),
            next_views: Vec::new(),
            next_recs: Vec::new(),
        };
        let na = model.actions.len();
        let l = lattice.len();
        for t in 1..horizon {
            let n = model.n_states(t);
            let rows = par::map_indexed(n, |s| {
                let state = model.state(t, s);
                let mut out = vec![0.0; na * c];
                for (ai, r) in model.actions.iter().enumerate() {
                    policy.predict_into(&state.with_recs(r), &mut out[ai * c..(ai + 1) * c]);
                }
                out
            });
            let mut flat = Vec::with_capacity(n * na * c);
            for (s, row) in rows.into_iter().enumerate() {
                if !row.chunks(c).all(valid) {
                    return Err(DpError::BadProbabilities { t, state: s });
                }
                flat.extend(row);
            }
            model.probs.push(flat);
            let nv: Vec<u32> = (0..k * l)
                .map(|x| lattice.successor(x % l, (t - 1) as u64, &[x / l]) as u32)
                .collect();
            let nr: Vec<u32> = (0..l * na)
                .map(|x| lattice.successor(x / na, (REC_SLOTS * (t - 1)) as u64, &model.actions[x % na].slots()) as u32)
                .collect();
            model.next_views.push(nv);
            model.next_recs.push(nr);
        }
        let n = model.n_states(horizon);
        let rows = par::map_indexed(n, |s| policy.predict(&model.state(horizon, s)));
        for (s, row) in rows.into_iter().enumerate() {
            if !valid(&row) {
                return Err(DpError::BadProbabilities { t: horizon, state: s });
            }
            model.terminal.extend(row);
        }
        Ok(model)
    }

    /// Number of stored probabilities for the given sizes.
    pub fn entries(k: usize, points: usize, n_actions_r: usize, horizon: usize) -> u128 {
        let c = n_actions(k) as u128;
        let later = (k * points * points) as u128;
        let decisions: u128 = (1..horizon).map(|t| if t == 1 { k as u128 } else { later }).sum();
        decisions * n_actions_r as u128 * c + if horizon == 1 { k as u128 } else { later } * c
    }

    pub fn n_classes(&self) -> usize {
        n_actions(self.k)
    }

    pub fn n_states(&self, t: usize) -> usize {
        if t == 1 {
            self.k
        } else {
            let p = self.lattice.num_points();
            self.k * p * p
        }
    }

    /// `(a, A, R)` lattice indices of state `s` at `t`.
    pub fn decode(&self, t: usize, s: usize) -> (usize, usize, usize) {
        if t == 1 {
            let e = self.lattice.empty_index();
            (s, e, e)
        } else {
            let p = self.lattice.num_points();
            (s / (p * p), (s / p) % p, s % p)
        }
    }

    pub fn encode(&self, t: usize, a: usize, views: usize, recs: usize) -> usize {
        if t == 1 {
            a
        } else {
            let p = self.lattice.num_points();
            a * p * p + views * p + recs
        }
    }

    /// Index of a raw state after snapping `A` and `R` to the lattice.
    pub fn locate(&self, state: &RecState) -> usize {
        let t = state.t.min(self.horizon);
        if t == 1 {
            return state.last;
        }
        self.encode(t, state.last, self.lattice.snap(&state.views), self.lattice.snap(&state.recs))
    }

    pub fn state(&self, t: usize, s: usize) -> RecState {
        let (a, ia, ir) = self.decode(t, s);
        let (views, recs) = if t == 1 {
            (FreqVector::empty(self.k), FreqVector::empty(self.k))
        } else {
            (self.lattice.freq(ia), self.lattice.freq(ir))
        };
        RecState { t, last: a, views, recs }
    }

    /// Action probabilities at `t < T` after recommending action `r`.
    pub fn probs(&self, t: usize, s: usize, r: usize) -> &[f64] {
        let c = self.n_classes();
        let base = (s * self.actions.len() + r) * c;
        &self.probs[t - 1][base..base + c]
    }

    pub fn terminal_probs(&self, s: usize) -> &[f64] {
        let c = self.n_classes();
        &self.terminal[s * c..(s + 1) * c]
    }

    /// Successor components `(A', R')` after recommending `r` and a search.
    pub fn successor_parts(&self, t: usize, s: usize, r: usize) -> (usize, usize) {
        let (a, ia, ir) = self.decode(t, s);
        let l = self.lattice.len();
        let na = self.actions.len();
        (self.next_views[t - 1][a * l + ia] as usize, self.next_recs[t - 1][ir * na + r] as usize)
    }

    pub fn action_index(&self, r: &RecAction) -> usize {
        self.actions.binary_search(r).expect("action enumerated for this K")
    }

    /// Copy with exit probabilities removed and the rest rescaled.
    pub fn without_churn(&self) -> DecisionModel {
        let mut m = self.clone();
        let c = self.n_classes();
        let strip = |v: &mut [f64]| {
            let stay = 1.0 - v[c - 1];
            if stay > 1e-300 && v[c - 1] > 0.0 {
                for x in &mut v[..c - 1] {
                    *x /= stay;
                }
                v[c - 1] = 0.0;
            }
        };
        for slice in &mut m.probs {
            slice.chunks_mut(c).for_each(strip);
        }
        m.terminal.chunks_mut(c).for_each(strip);
        m
    }

    /// Hash of every stored probability, used to show that two evaluations ran
    /// on the same model.
    pub fn checksum(&self) -> u64 {
        let mut h = mix64(self.k as u64 ^ ((self.horizon as u64) << 32) ^ (u64::from(self.lattice.granularity()) << 48));
        for v in self.probs.iter().flatten().chain(self.terminal.iter()) {
            h = mix64(h ^ v.to_bits());
        }
        h
    }
}

fn valid(p: &[f64]) -> bool {
    p.iter().all(|&x| x.is_finite() && x >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() < 1e-6
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clickstream::{TruthModel, TruthParams};

    fn model(k: usize, g: u32, t: usize) -> DecisionModel {
        let truth = TruthModel::new(TruthParams::calibrated(k), t);
        DecisionModel::build(&truth, &SimplexLattice::new(k, g), t).unwrap()
    }

    #[test]
    fn encode_roundtrip() {
        let m = model(3, 2, 4);
        for t in 1..=4 {
            for s in 0..m.n_states(t) {
                let (a, v, r) = m.decode(t, s);
                assert_eq!(m.encode(t, a, v, r), s);
                assert_eq!(m.locate(&m.state(t, s)), s);
            }
        }
    }

    #[test]
    fn successor_matches_state_transition() {
        let m = model(3, 4, 5);
        for t in 1..4 {
            for s in (0..m.n_states(t)).step_by(7) {
                for r in 0..m.actions.len() {
                    let next = m.state(t, s).transition(1, &m.actions[r], 5).unwrap();
                    let (v, rr) = m.successor_parts(t, s, r);
                    assert_eq!(m.encode(t + 1, 1, v, rr), m.locate(&next));
                }
            }
        }
    }

    #[test]
    fn size_guard() {
        let truth = TruthModel::new(TruthParams::calibrated(3), 5);
        let err = DecisionModel::build_with_limit(&truth, &SimplexLattice::new(3, 4), 5, 10).unwrap_err();
        assert!(matches!(err, DpError::TooLarge { .. }));
    }

    #[test]
    fn churn_removal() {
        let m = model(2, 2, 3).without_churn();
        for t in 1..3 {
            for s in 0..m.n_states(t) {
                for r in 0..m.actions.len() {
                    let p = m.probs(t, s, r);
                    assert_eq!(p[4], 0.0);
                    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
