//! Diagnostics that are not part of the pipeline.

use std::collections::BTreeSet;

use searchrec_core::dpsolver::enumerate_actions;
use searchrec_core::{SimplexLattice, REC_SLOTS};

/// Lattice states reachable from any first click under any recommendation
/// sequence, by period: `(last, views, recs)` lattice indices. Successors
/// follow the solver's snapping rule.
pub fn reachable_states(k: usize, horizon: usize, g: u32) -> Vec<BTreeSet<(usize, usize, usize)>> {
    let lattice = SimplexLattice::new(k, g);
    let actions = enumerate_actions(k);
    let empty = lattice.empty_index();
    let mut out = vec![(0..k).map(|a| (a, empty, empty)).collect::<BTreeSet<_>>()];
    for t in 1..horizon {
        let mut next = BTreeSet::new();
        for &(a, v, r) in &out[t - 1] {
            let nv = lattice.successor(v, (t - 1) as u64, &[a]);
            for act in &actions {
                let nr = lattice.successor(r, (REC_SLOTS * (t - 1)) as u64, &act.slots());
                for c in 0..k {
                    next.insert((c, nv, nr));
                }
            }
        }
        out.push(next);
    }
    out
}

fn point(lattice: &SimplexLattice, idx: usize) -> String {
    if idx == lattice.empty_index() {
        return "empty".into();
    }
    lattice.values(idx).iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join("|")
}

/// CSV dump `t,last,views,recs` with one-based clusters.
pub fn reachable_csv(k: usize, horizon: usize, g: u32) -> String {
    let lattice = SimplexLattice::new(k, g);
    let mut s = String::from("t,last,views,recs\n");
    for (i, set) in reachable_states(k, horizon, g).iter().enumerate() {
        for &(a, v, r) in set {
            s.push_str(&format!("{},{},{},{}\n", i + 1, a + 1, point(&lattice, v), point(&lattice, r)));
        }
    }
    s
}
