// Planners that may only condition on a subset of the state.

use alloc::vec;
use alloc::vec::Vec;

use crate::dpsolver::{evaluate_exact, occupancy, DecisionModel, DpError, Mask, RecPolicy, RestrictedPolicy};
use crate::par;

fn q_all(model: &DecisionModel, margins: &[f64], next: &[f64], t: usize, s: usize) -> Vec<f64> {
    let k = model.k;
    (0..model.actions.len())
        .map(|r| {
            let p = model.probs(t, s, r);
            let (v, rr) = model.successor_parts(t, s, r);
            let mut q: f64 = (0..k).map(|c| margins[c] * p[k + c]).sum();
            for c in 0..k {
                if p[c] > 0.0 {
                    q += p[c] * next[model.encode(t + 1, c, v, rr)];
                }
            }
            q
        })
        .collect()
}

/// One backward pass: at each `t` and masked key pick the action maximising
/// the `weights`-weighted value of the states sharing that key, given the
/// choices already made for later periods. Keys without weight use equal
/// weights over their states.
pub fn restricted_pass(model: &DecisionModel, margins: &[f64], mask: Mask, weights: &[Vec<f64>]) -> RestrictedPolicy {
    let h = model.horizon;
    let na = model.actions.len();
    let nk = mask.n_keys(&model.lattice);
    let key_of = |t: usize, s: usize| {
        let (_, v, r) = model.decode(t, s);
        mask.key(&model.lattice, v, r)
    };
    let mut next: Vec<f64> = (0..model.n_states(h))
        .map(|s| {
            let p = model.terminal_probs(s);
            (0..model.k).map(|c| margins[c] * p[model.k + c]).sum()
        })
        .collect();
    let mut choice = vec![Vec::new(); h - 1];
    for t in (1..h).rev() {
        let n = model.n_states(t);
        let q: Vec<Vec<f64>> = par::map_indexed(n, |s| q_all(model, margins, &next, t, s));
        let mut weighted = vec![0.0; nk * na];
        let mut plain = vec![0.0; nk * na];
        let mut mass = vec![0.0; nk];
        for s in 0..n {
            let key = key_of(t, s);
            let w = weights[t - 1][s];
            mass[key] += w;
            for r in 0..na {
                weighted[key * na + r] += w * q[s][r];
                plain[key * na + r] += q[s][r];
            }
        }
        let pick: Vec<u16> = (0..nk)
            .map(|key| {
                let src = if mass[key] > 0.0 { &weighted } else { &plain };
                let row = &src[key * na..(key + 1) * na];
                (1..na).fold(0, |b, r| if row[r] > row[b] { r } else { b }) as u16
            })
            .collect();
        next = (0..n).map(|s| q[s][pick[key_of(t, s)] as usize]).collect();
        choice[t - 1] = pick;
    }
    RestrictedPolicy { mask, lattice: model.lattice.clone(), horizon: h, actions: model.actions.clone(), choice }
}

/// Re-expresses a restricted policy on a finer (or equal) mask.
pub fn refine(policy: &RestrictedPolicy, mask: Mask) -> RestrictedPolicy {
    let l = policy.lattice.len();
    let choice = policy
        .choice
        .iter()
        .map(|c| {
            (0..mask.n_keys(&policy.lattice))
                .map(|key| {
                    let (v, r) = match mask {
                        Mask::Views => (key, 0),
                        Mask::ViewsAndRecs => (key / l, key % l),
                    };
                    c[policy.mask.key(&policy.lattice, v, r)]
                })
                .collect()
        })
        .collect();
    RestrictedPolicy { mask, choice, ..policy.clone() }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedPlan {
    pub policy: RestrictedPolicy,
    pub value: f64,
    /// Exact value of every candidate tried, in order.
    pub history: Vec<f64>,
}

/// Restricted planner: a first pass weighted by the occupancy of `reference`
/// (normally the first-best policy), then `passes` passes each weighted by the
/// occupancy of the previous candidate. Candidates in `seeds` are also
/// considered. The best candidate by exact value is returned.
pub fn plan_restricted(
    model: &DecisionModel,
    margins: &[f64],
    initial: &[f64],
    mask: Mask,
    reference: &RecPolicy,
    seeds: &[RestrictedPolicy],
    passes: usize,
) -> Result<RestrictedPlan, DpError> {
    let mut history = Vec::new();
    let mut best: Option<(RestrictedPolicy, f64)> = None;
    let mut consider = |p: RestrictedPolicy, history: &mut Vec<f64>| -> Result<RestrictedPolicy, DpError> {
        let v = evaluate_exact(model, &RecPolicy::Restricted(p.clone()), margins, initial)?;
        history.push(v);
        if best.as_ref().map_or(true, |b| v > b.1) {
            best = Some((p.clone(), v));
        }
        Ok(p)
    };
    for s in seeds {
        consider(refine(s, mask), &mut history)?;
    }
    let weights = occupancy(model, reference, margins, initial)?.mass;
    let mut current = consider(restricted_pass(model, margins, mask, &weights), &mut history)?;
    for _ in 0..passes {
        let weights = occupancy(model, &RecPolicy::Restricted(current.clone()), margins, initial)?.mass;
        current = consider(restricted_pass(model, margins, mask, &weights), &mut history)?;
    }
    let (policy, value) = best.expect("at least one candidate");
    Ok(RestrictedPlan { policy, value, history })
}
