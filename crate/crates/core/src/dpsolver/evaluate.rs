use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::recpolicy::Compiled;
use super::{conversion_value, DecisionModel, DpError, RecPolicy};
use crate::par;
use crate::rng::{self, mix64, tag};
use crate::staterec::RecAction;

/// Probability that three i.i.d. draws from `row` form the multiset `r`.
pub fn multiset_probability(row: &[f64], r: &RecAction) -> f64 {
    let mut counts = [0u32; 3];
    let mut distinct = [0usize; 3];
    let mut n = 0;
    for s in r.slots() {
        match distinct[..n].iter().position(|&d| d == s) {
            Some(i) => counts[i] += 1,
            None => {
                distinct[n] = s;
                counts[n] = 1;
                n += 1;
            }
        }
    }
    let fact = |c: u32| -> f64 { [1.0, 1.0, 2.0, 6.0][c as usize] };
    let mut p = 6.0;
    for i in 0..n {
        p *= row[distinct[i]].powi(counts[i] as i32) / fact(counts[i]);
    }
    p
}

/// `∂ multiset_probability(row, r) / ∂ row[j]`.
fn multiset_derivative(row: &[f64], r: &RecAction, j: usize) -> f64 {
    let cj = r.count(j) as i32;
    if cj == 0 {
        return 0.0;
    }
    let mut p = 6.0 * f64::from(cj) * row[j].powi(cj - 1);
    let slots = r.slots();
    let mut seen = [usize::MAX; 3];
    for (i, &s) in slots.iter().enumerate() {
        if s == j || seen[..i].contains(&s) {
            continue;
        }
        seen[i] = s;
        let c = r.count(s) as i32;
        p *= row[s].powi(c);
    }
    let mut denom = 1.0;
    let mut done = [usize::MAX; 3];
    for (i, &s) in slots.iter().enumerate() {
        if done[..i].contains(&s) {
            continue;
        }
        done[i] = s;
        denom *= [1.0, 1.0, 2.0, 6.0][r.count(s)];
    }
    p / denom
}

fn check(model: &DecisionModel, margins: &[f64], initial: &[f64]) -> Result<(), DpError> {
    if margins.len() != model.k {
        return Err(DpError::Margins { expected: model.k, got: margins.len() });
    }
    if initial.len() != model.k {
        return Err(DpError::Initial { expected: model.k, got: initial.len() });
    }
    Ok(())
}

/// Expected one-step payoff plus continuation for action `r`.
#[inline]
fn q_value(model: &DecisionModel, margins: &[f64], next: &[f64], t: usize, s: usize, r: usize) -> f64 {
    let p = model.probs(t, s, r);
    let (v, rr) = model.successor_parts(t, s, r);
    let mut q = conversion_value(p, margins);
    for c in 0..model.k {
        if p[c] > 0.0 {
            q += p[c] * next[model.encode(t + 1, c, v, rr)];
        }
    }
    q
}

/// Policy values `W_t(s)` for `t = 1..T` by backward recursion.
pub(crate) fn backward_values(model: &DecisionModel, policy: &Compiled, margins: &[f64]) -> Vec<Vec<f64>> {
    let h = model.horizon;
    let mut w = vec![Vec::new(); h];
    w[h - 1] = (0..model.n_states(h)).map(|s| conversion_value(model.terminal_probs(s), margins)).collect();
    for t in (1..h).rev() {
        let next = &w[t];
        w[t - 1] = par::map_indexed(model.n_states(t), |s| {
            let (a, _, _) = model.decode(t, s);
            let mut total = 0.0;
            policy.for_each(t, s, a, |r, q| total += q * q_value(model, margins, next, t, s, r));
            total
        });
    }
    w
}

/// Exact expected profit by backward policy evaluation.
pub fn evaluate_exact(model: &DecisionModel, policy: &RecPolicy, margins: &[f64], initial: &[f64]) -> Result<f64, DpError> {
    check(model, margins, initial)?;
    let w = backward_values(model, &policy.compile(model), margins);
    Ok(initial.iter().zip(&w[0]).map(|(p, v)| p * v).sum())
}

/// State-occupancy probabilities under a policy and the profit they imply.
#[derive(Clone, Debug, PartialEq)]
pub struct Occupancy {
    /// `mass[t - 1][state]`: probability of reaching the state.
    pub mass: Vec<Vec<f64>>,
    pub profit: f64,
}

pub(crate) fn forward(model: &DecisionModel, policy: &Compiled, margins: &[f64], initial: &[f64]) -> Occupancy {
    let h = model.horizon;
    let mut mass = vec![Vec::new(); h];
    mass[0] = initial.to_vec();
    let mut profit = 0.0;
    for t in 1..h {
        let mut next = vec![0.0; model.n_states(t + 1)];
        for s in 0..model.n_states(t) {
            let mu = mass[t - 1][s];
            if mu == 0.0 {
                continue;
            }
            let (a, _, _) = model.decode(t, s);
            policy.for_each(t, s, a, |r, q| {
                let p = model.probs(t, s, r);
                let w = mu * q;
                profit += w * conversion_value(p, margins);
                let (v, rr) = model.successor_parts(t, s, r);
                for c in 0..model.k {
                    if p[c] > 0.0 {
                        next[model.encode(t + 1, c, v, rr)] += w * p[c];
                    }
                }
            });
        }
        mass[t] = next;
    }
    for (s, &mu) in mass[h - 1].iter().enumerate() {
        if mu > 0.0 {
            profit += mu * conversion_value(model.terminal_probs(s), margins);
        }
    }
    Occupancy { mass, profit }
}

/// Forward induction from the initial distribution of first clicks.
pub fn occupancy(model: &DecisionModel, policy: &RecPolicy, margins: &[f64], initial: &[f64]) -> Result<Occupancy, DpError> {
    check(model, margins, initial)?;
    Ok(forward(model, &policy.compile(model), margins, initial))
}

/// Mean realised margin over simulated sessions on the lattice dynamics, and
/// its standard error.
pub fn evaluate_simulated(
    model: &DecisionModel,
    policy: &RecPolicy,
    margins: &[f64],
    initial: &[f64],
    n_sims: usize,
    seed: u64,
) -> Result<(f64, f64), DpError> {
    check(model, margins, initial)?;
    let compiled = policy.compile(model);
    let k = model.k;
    let draws = par::map_indexed(n_sims, |i| {
        let mut rng = rng::stream(seed, tag::SIMULATE, i as u64);
        let a = rng::sample_index(&mut rng, initial);
        let mut s = a;
        for t in 1..model.horizon {
            let (a, _, _) = model.decode(t, s);
            let r = match &compiled {
                Compiled::Det(c) => c[t - 1][s] as usize,
                Compiled::Rows(rows, na) => rng::sample_index(&mut rng, &rows[t - 1][a * na..(a + 1) * na]),
            };
            let c = rng::sample_index(&mut rng, model.probs(t, s, r));
            if c >= k {
                return if c < 2 * k { margins[c - k] } else { 0.0 };
            }
            let (v, rr) = model.successor_parts(t, s, r);
            s = model.encode(t + 1, c, v, rr);
        }
        let c = rng::sample_index(&mut rng, model.terminal_probs(s));
        if (k..2 * k).contains(&c) {
            margins[c - k]
        } else {
            0.0
        }
    });
    let n = draws.len().max(1) as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Expected profit together with a fingerprint of everything it was computed
/// from (model probabilities, margins, initial distribution).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub profit: f64,
    pub std_error: f64,
    pub exact: bool,
    pub checksum: u64,
}

pub fn evaluation_checksum(model: &DecisionModel, margins: &[f64], initial: &[f64]) -> u64 {
    let mut h = model.checksum();
    for v in margins.iter().chain(initial) {
        h = mix64(h ^ v.to_bits());
    }
    h
}

/// Exact evaluation when `sims` is `None`, otherwise simulation with
/// `(n_sims, seed)`.
pub fn evaluate_policy(
    model: &DecisionModel,
    policy: &RecPolicy,
    margins: &[f64],
    initial: &[f64],
    sims: Option<(usize, u64)>,
) -> Result<Evaluation, DpError> {
    let checksum = evaluation_checksum(model, margins, initial);
    match sims {
        None => Ok(Evaluation { profit: evaluate_exact(model, policy, margins, initial)?, std_error: 0.0, exact: true, checksum }),
        Some((n, seed)) => {
            let (profit, std_error) = evaluate_simulated(model, policy, margins, initial, n, seed)?;
            Ok(Evaluation { profit, std_error, exact: false, checksum })
        }
    }
}

/// Profit of a matrix policy and its gradient with respect to every matrix
/// entry, per period.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixGradient {
    pub value: f64,
    /// `per_period[t - 1][a][j]` for `t = 1..T-1`.
    pub per_period: Vec<Vec<Vec<f64>>>,
}

impl MatrixGradient {
    /// Gradient of a single matrix used at every period.
    pub fn summed(&self, k: usize) -> Vec<Vec<f64>> {
        let mut g = vec![vec![0.0; k]; k];
        for m in &self.per_period {
            for (gr, mr) in g.iter_mut().zip(m) {
                for (x, y) in gr.iter_mut().zip(mr) {
                    *x += y;
                }
            }
        }
        g
    }
}

/// Adjoint gradient: occupancy × derivative of the action distribution ×
/// action value.
pub fn matrix_gradient(model: &DecisionModel, policy: &RecPolicy, margins: &[f64], initial: &[f64]) -> Result<MatrixGradient, DpError> {
    check(model, margins, initial)?;
    let compiled = policy.compile(model);
    let w = backward_values(model, &compiled, margins);
    let occ = forward(model, &compiled, margins, initial);
    let value: f64 = initial.iter().zip(&w[0]).map(|(p, v)| p * v).sum();
    let k = model.k;
    let na = model.actions.len();
    let per_period = (1..model.horizon)
        .map(|t| {
            let m = policy.matrix_at(t).expect("matrix policy");
            let next = &w[t];
            par::map_indexed(k, |a| {
                let dq: Vec<f64> = (0..na)
                    .flat_map(|r| (0..k).map(move |j| (r, j)))
                    .map(|(r, j)| multiset_derivative(&m[a], &model.actions[r], j))
                    .collect();
                let mut g = vec![0.0; k];
                let states: Vec<usize> = if t == 1 {
                    vec![a]
                } else {
                    let p2 = model.n_states(t) / k;
                    (a * p2..(a + 1) * p2).collect()
                };
                for s in states {
                    let mu = occ.mass[t - 1][s];
                    if mu == 0.0 {
                        continue;
                    }
                    for r in 0..na {
                        let d = &dq[r * k..(r + 1) * k];
                        if d.iter().all(|&x| x == 0.0) {
                            continue;
                        }
                        let q = q_value(model, margins, next, t, s, r);
                        for j in 0..k {
                            g[j] += mu * d[j] * q;
                        }
                    }
                }
                g
            })
        })
        .collect();
    Ok(MatrixGradient { value, per_period })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiset_probabilities_sum_to_one() {
        let row = [0.2, 0.5, 0.3];
        let actions = super::super::enumerate_actions(3);
        let total: f64 = actions.iter().map(|r| multiset_probability(&row, r)).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!((multiset_probability(&row, &RecAction::new([0, 1, 1])) - 3.0 * 0.2 * 0.25).abs() < 1e-15);
        assert!((multiset_probability(&row, &RecAction::new([0, 1, 2])) - 6.0 * 0.03).abs() < 1e-15);
    }

    #[test]
    fn multiset_derivative_matches_differences() {
        let row = [0.2, 0.5, 0.3];
        for r in super::super::enumerate_actions(3) {
            for j in 0..3 {
                let h = 1e-6;
                let mut up = row;
                up[j] += h;
                let mut dn = row;
                dn[j] -= h;
                let fd = (multiset_probability(&up, &r) - multiset_probability(&dn, &r)) / (2.0 * h);
                assert!((fd - multiset_derivative(&row, &r, j)).abs() < 1e-8, "{r:?} {j}");
            }
        }
    }
}
