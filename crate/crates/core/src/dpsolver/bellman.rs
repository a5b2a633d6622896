use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::recpolicy::TablePolicy;
use super::{conversion_value, DecisionModel, DpError, RecPolicy};
use crate::par;
use crate::policy::ChoiceModel;
use crate::staterec::{RecAction, RecState, SimplexLattice};

/// Planning distortions; evaluation always uses the undistorted model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioModifiers {
    /// Plan as if the consumer never exits (remaining actions rescaled).
    pub ignore_churn: bool,
    /// Plan with every margin replaced by the mean margin.
    pub uniform_margins: bool,
    /// Plan for the next click's payoff only.
    pub one_step: bool,
}

/// Optimal values and argmax recommendations on the lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub k: usize,
    pub horizon: usize,
    pub lattice: SimplexLattice,
    pub actions: Vec<RecAction>,
    /// `values[t - 1][state]` for `t = 1..T`.
    pub values: Vec<Vec<f64>>,
    /// `argmax[t - 1][state]` for `t = 1..T-1`.
    pub argmax: Vec<Vec<u16>>,
}

impl ValueTable {
    pub fn value(&self, model: &DecisionModel, state: &RecState) -> f64 {
        self.values[state.t.min(self.horizon) - 1][model.locate(state)]
    }

    /// `Σ_a initial[a] · V_1(a)`.
    pub fn initial_value(&self, initial: &[f64]) -> f64 {
        initial.iter().zip(&self.values[0]).map(|(p, v)| p * v).sum()
    }

    pub fn policy(&self) -> RecPolicy {
        RecPolicy::Table(TablePolicy {
            lattice: self.lattice.clone(),
            horizon: self.horizon,
            actions: self.actions.clone(),
            choice: self.argmax.clone(),
        })
    }
}

/// Backward induction.
///
/// `V_T(Θ) = Σ_k m_k Pr(convert_k | Θ)` and for `t < T`
/// `V_t(Θ) = max_r Σ_k m_k Pr(convert_k | Θ ⊕ r) + Σ_k Pr(search_k | Θ ⊕ r) V_{t+1}(Θ')`
/// with `Θ'` the snapped successor. Ties go to the lexicographically smallest
/// action.
pub fn bellman_solve(model: &DecisionModel, margins: &[f64], modifiers: &ScenarioModifiers) -> Result<ValueTable, DpError> {
    if margins.len() != model.k {
        return Err(DpError::Margins { expected: model.k, got: margins.len() });
    }
    let stripped;
    let model = if modifiers.ignore_churn {
        stripped = model.without_churn();
        &stripped
    } else {
        model
    };
    let planning: Vec<f64> = if modifiers.uniform_margins {
        let mean = margins.iter().sum::<f64>() / margins.len() as f64;
        alloc::vec![mean; margins.len()]
    } else {
        margins.to_vec()
    };
    let k = model.k;
    let horizon = model.horizon;
    let mut values = alloc::vec![Vec::new(); horizon];
    let mut argmax = alloc::vec![Vec::new(); horizon - 1];
    values[horizon - 1] = (0..model.n_states(horizon)).map(|s| conversion_value(model.terminal_probs(s), &planning)).collect();
    for t in (1..horizon).rev() {
        let next = &values[t];
        let solved = par::map_indexed(model.n_states(t), |s| {
            let mut best = (f64::NEG_INFINITY, 0u16);
            for r in 0..model.actions.len() {
                let p = model.probs(t, s, r);
                let mut q = conversion_value(p, &planning);
                if !modifiers.one_step {
                    let (v, rr) = model.successor_parts(t, s, r);
                    for c in 0..k {
                        if p[c] > 0.0 {
                            q += p[c] * next[model.encode(t + 1, c, v, rr)];
                        }
                    }
                }
                if q > best.0 {
                    best = (q, r as u16);
                }
            }
            best
        });
        values[t - 1] = solved.iter().map(|b| b.0).collect();
        argmax[t - 1] = solved.iter().map(|b| b.1).collect();
    }
    Ok(ValueTable { k, horizon, lattice: model.lattice.clone(), actions: model.actions.clone(), values, argmax })
}

/// Builds the decision model for `policy` and solves it.
pub fn solve_policy(
    policy: &dyn ChoiceModel,
    margins: &[f64],
    lattice: &SimplexLattice,
    horizon: usize,
    modifiers: &ScenarioModifiers,
) -> Result<(DecisionModel, ValueTable), DpError> {
    let model = DecisionModel::build(policy, lattice, horizon)?;
    let table = bellman_solve(&model, margins, modifiers)?;
    Ok((model, table))
}
