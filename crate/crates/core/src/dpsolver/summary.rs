use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{DecisionModel, ValueTable};

/// Diagnostics of a deterministic policy, every lattice state weighted equally.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    /// Row `a`: share of recommendation slots going to each cluster when the
    /// consumer views cluster `a`, averaged over all other state variables.
    pub matrix: Vec<Vec<f64>>,
    /// `per_period[t - 1][c]`: share of slots going to cluster `c` at `t`.
    pub per_period: Vec<Vec<f64>>,
    /// `concentration[t - 1]`: shares of actions with one, two and three
    /// distinct clusters at `t`.
    pub concentration: Vec<[f64; 3]>,
}

pub fn summarize_policy(model: &DecisionModel, table: &ValueTable) -> PolicySummary {
    let k = table.k;
    let mut matrix = vec![vec![0.0; k]; k];
    let mut row_n = vec![0.0; k];
    let mut per_period = Vec::new();
    let mut concentration = Vec::new();
    for t in 1..table.horizon {
        let mut dist = vec![0.0; k];
        let mut conc = [0.0; 3];
        let n = model.n_states(t);
        for s in 0..n {
            let (a, _, _) = model.decode(t, s);
            let r = table.actions[table.argmax[t - 1][s] as usize];
            for c in r.slots() {
                dist[c] += 1.0 / 3.0;
                matrix[a][c] += 1.0 / 3.0;
            }
            row_n[a] += 1.0;
            conc[r.distinct() - 1] += 1.0;
        }
        per_period.push(dist.iter().map(|v| v / n as f64).collect());
        concentration.push(conc.map(|v| v / n as f64));
    }
    for (row, n) in matrix.iter_mut().zip(&row_n) {
        if *n > 0.0 {
            row.iter_mut().for_each(|v| *v /= n);
        }
    }
    PolicySummary { matrix, per_period, concentration }
}
