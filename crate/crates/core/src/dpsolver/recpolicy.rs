use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::DecisionModel;
use crate::rng::{self, StreamRng};
use crate::staterec::{RecAction, RecState, SimplexLattice};
use crate::REC_SLOTS;

/// Anything that can choose the three recommendations shown at a state.
pub trait Recommender: Sync + Send {
    fn recommend(&self, state: &RecState, rng: &mut StreamRng) -> RecAction;
}

/// Deterministic rule stored per lattice state (first-best and distorted planners).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TablePolicy {
    pub lattice: SimplexLattice,
    pub horizon: usize,
    pub actions: Vec<RecAction>,
    /// `choice[t - 1][state]` indexes `actions`, for `t = 1..T-1`.
    pub choice: Vec<Vec<u16>>,
}

/// Which state variables a restricted planner may condition on (always with `t`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mask {
    /// `(t, A)`: past browsing only.
    Views,
    /// `(t, A, R)`: past browsing and past recommendations.
    ViewsAndRecs,
}

impl Mask {
    pub fn n_keys(self, lattice: &SimplexLattice) -> usize {
        match self {
            Mask::Views => lattice.len(),
            Mask::ViewsAndRecs => lattice.len() * lattice.len(),
        }
    }

    /// Key from lattice indices of `A` and `R`.
    pub fn key(self, lattice: &SimplexLattice, views: usize, recs: usize) -> usize {
        match self {
            Mask::Views => views,
            Mask::ViewsAndRecs => views * lattice.len() + recs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestrictedPolicy {
    pub mask: Mask,
    pub lattice: SimplexLattice,
    pub horizon: usize,
    pub actions: Vec<RecAction>,
    /// `choice[t - 1][key]` indexes `actions`.
    pub choice: Vec<Vec<u16>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecPolicy {
    /// Deterministic rule on the full lattice state.
    Table(TablePolicy),
    /// Three i.i.d. draws from row `a_t` of one matrix.
    StaticMatrix { rows: Vec<Vec<f64>> },
    /// Three i.i.d. draws from row `a_t` of the matrix for period `t`.
    DynamicMatrix { periods: Vec<Vec<Vec<f64>>> },
    /// Deterministic rule on masked state features.
    Restricted(RestrictedPolicy),
    /// The same recommendation everywhere.
    Constant { action: RecAction },
}

fn lattice_indices(lattice: &SimplexLattice, state: &RecState) -> (usize, usize) {
    (lattice.snap(&state.views), lattice.snap(&state.recs))
}

impl RecPolicy {
    pub fn is_deterministic(&self) -> bool {
        matches!(self, RecPolicy::Table(_) | RecPolicy::Restricted(_) | RecPolicy::Constant { .. })
    }

    /// Matrix row used at period `t` (one-based), if this is a matrix policy.
    pub fn matrix_at(&self, t: usize) -> Option<&[Vec<f64>]> {
        match self {
            RecPolicy::StaticMatrix { rows } => Some(rows),
            RecPolicy::DynamicMatrix { periods } => {
                let i = (t.max(1) - 1).min(periods.len() - 1);
                Some(&periods[i])
            }
            _ => None,
        }
    }

    /// The action of a deterministic policy; `None` for matrix policies.
    pub fn deterministic(&self, state: &RecState) -> Option<RecAction> {
        match self {
            RecPolicy::Table(p) => {
                let t = state.t.clamp(1, p.horizon.saturating_sub(1).max(1));
                let (v, r) = lattice_indices(&p.lattice, state);
                let s = if t == 1 {
                    state.last
                } else {
                    let np = p.lattice.num_points();
                    // a table has no entry for EMPTY after t = 1; fall back to the first point
                    let (v, r) = (v.min(np - 1), r.min(np - 1));
                    state.last * np * np + v * np + r
                };
                Some(p.actions[p.choice[t - 1][s] as usize])
            }
            RecPolicy::Restricted(p) => {
                let t = state.t.clamp(1, p.horizon.saturating_sub(1).max(1));
                let (v, r) = lattice_indices(&p.lattice, state);
                Some(p.actions[p.choice[t - 1][p.mask.key(&p.lattice, v, r)] as usize])
            }
            RecPolicy::Constant { action } => Some(*action),
            _ => None,
        }
    }

    /// Per-period distribution over `model.actions`, `[t - 1][state][action]`
    /// flattened per period, or per-row for matrix policies.
    pub(crate) fn compile(&self, model: &DecisionModel) -> Compiled {
        let na = model.actions.len();
        match self {
            RecPolicy::StaticMatrix { .. } | RecPolicy::DynamicMatrix { .. } => Compiled::Rows(
                (1..model.horizon)
                    .map(|t| {
                        let m = self.matrix_at(t).expect("matrix policy");
                        m.iter().flat_map(|row| model.actions.iter().map(move |r| super::multiset_probability(row, r))).collect()
                    })
                    .collect(),
                na,
            ),
            _ => Compiled::Det(
                (1..model.horizon)
                    .map(|t| {
                        (0..model.n_states(t))
                            .map(|s| {
                                let r = self.deterministic(&model.state(t, s)).expect("deterministic policy");
                                model.action_index(&r) as u32
                            })
                            .collect()
                    })
                    .collect(),
            ),
        }
    }
}

/// A policy resolved against a decision model.
pub(crate) enum Compiled {
    /// `[t - 1][state] → action`.
    Det(Vec<Vec<u32>>),
    /// `[t - 1][a · n_actions + action] → probability`, and the action count.
    Rows(Vec<Vec<f64>>, usize),
}

impl Compiled {
    /// Calls `f(action, weight)` for every action with nonzero weight. Matrix
    /// rows are evaluated as polynomials, so rows slightly outside the simplex
    /// (finite-difference probes) give the smooth extension.
    #[inline]
    pub(crate) fn for_each(&self, t: usize, s: usize, a: usize, mut f: impl FnMut(usize, f64)) {
        match self {
            Compiled::Det(c) => f(c[t - 1][s] as usize, 1.0),
            Compiled::Rows(rows, na) => {
                let row = &rows[t - 1][a * na..(a + 1) * na];
                for (r, &q) in row.iter().enumerate() {
                    if q != 0.0 {
                        f(r, q);
                    }
                }
            }
        }
    }
}

impl Recommender for RecPolicy {
    fn recommend(&self, state: &RecState, rng: &mut StreamRng) -> RecAction {
        if let Some(r) = self.deterministic(state) {
            return r;
        }
        let row = &self.matrix_at(state.t).expect("matrix policy")[state.last];
        let mut slots = [0usize; REC_SLOTS];
        for s in &mut slots {
            *s = rng::sample_index(rng, row);
        }
        RecAction::new(slots)
    }
}

impl Recommender for RecAction {
    fn recommend(&self, _: &RecState, _: &mut StreamRng) -> RecAction {
        *self
    }
}
