//! Finite-horizon Bellman solver over the lattice-discretised state space and
//! exact / simulated evaluation of recommendation policies.

mod bellman;
mod evaluate;
mod model;
mod recpolicy;
mod summary;

pub use crate::staterec::RecAction;
pub use bellman::{bellman_solve, solve_policy, ScenarioModifiers, ValueTable};
pub use evaluate::{
    evaluate_exact, evaluate_policy, evaluate_simulated, matrix_gradient, multiset_probability, occupancy, Evaluation,
    MatrixGradient, Occupancy,
};
pub use model::{DecisionModel, DEFAULT_MAX_ENTRIES};
pub use recpolicy::{Mask, RecPolicy, Recommender, RestrictedPolicy, TablePolicy};
pub use summary::{summarize_policy, PolicySummary};

use alloc::vec::Vec;
use thiserror::Error;

use crate::policy::ChoiceModel;
use crate::staterec::RecState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpError {
    #[error("decision table needs {entries} entries, above the limit of {limit}; lower K, G or T")]
    TooLarge { entries: u128, limit: u128 },
    #[error("consumer policy returned an invalid distribution at t = {t}, state {state}")]
    BadProbabilities { t: usize, state: usize },
    #[error("margins have length {got}, expected {expected}")]
    Margins { expected: usize, got: usize },
    #[error("horizon must be at least 1")]
    Horizon,
    #[error("initial distribution has length {got}, expected {expected}")]
    Initial { expected: usize, got: usize },
    #[error("policy is defined for K = {policy}, model has K = {model}")]
    KMismatch { policy: usize, model: usize },
}

/// All multisets of three clusters in lexicographic order; `C(K+2, 3)` of them.
pub fn enumerate_actions(k: usize) -> Vec<RecAction> {
    let mut out = Vec::new();
    for a in 0..k {
        for b in a..k {
            for c in b..k {
                out.push(RecAction::new([a, b, c]));
            }
        }
    }
    out
}

/// Expected margin of converting right now: `Σ_k margin_k · Pr(convert_k | state)`.
pub fn instantaneous_profit(state: &RecState, policy: &dyn ChoiceModel, margins: &[f64]) -> f64 {
    let p = policy.predict(state);
    conversion_value(&p, margins)
}

pub(crate) fn conversion_value(probs: &[f64], margins: &[f64]) -> f64 {
    let k = margins.len();
    margins.iter().enumerate().map(|(c, m)| m * probs[k + c]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_counts() {
        assert_eq!(enumerate_actions(1), alloc::vec![RecAction::new([0, 0, 0])]);
        assert_eq!(enumerate_actions(2).len(), 4);
        assert_eq!(enumerate_actions(8).len(), 120);
        let a = enumerate_actions(4);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn conversion_value_arithmetic() {
        // K = 2: searches, conversions, exit
        assert!((conversion_value(&[0.3, 0.3, 0.1, 0.05, 0.25], &[10.0, 20.0]) - 2.0).abs() < 1e-12);
        assert_eq!(conversion_value(&[0.5, 0.5, 0.0, 0.0, 0.0], &[10.0, 20.0]), 0.0);
    }
}
