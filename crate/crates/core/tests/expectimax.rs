use searchrec_core::clickstream::{TruthModel, TruthParams};
use searchrec_core::dpsolver::{bellman_solve, DecisionModel, ScenarioModifiers};
use searchrec_core::policy::ChoiceModel;
use searchrec_core::SimplexLattice;
use searchrec_testkit::expectimax::{Expectimax, Node};

fn check(truth: &dyn ChoiceModel, horizon: usize, g: u32, margins: &[f64]) -> usize {
    let k = truth.k();
    let lattice = SimplexLattice::new(k, g);
    let model = DecisionModel::build(truth, &lattice, horizon).unwrap();
    let table = bellman_solve(&model, margins, &ScenarioModifiers::default()).unwrap();

    let mut oracle = Expectimax::new(truth, horizon, g, margins);
    let roots = oracle.solve_roots();
    for (a, v) in roots.iter().enumerate() {
        assert!((table.values[0][a] - v).abs() < 1e-9, "V_1({a}): {} vs {v}", table.values[0][a]);
    }
    let index = |n: &Node| match (&n.views, &n.recs) {
        (Some(v), Some(r)) => model.encode(n.t, n.last, lattice.rank(v), lattice.rank(r)),
        _ => n.last,
    };
    for (node, visit) in &oracle.visits {
        let s = index(node);
        let dp = table.values[node.t - 1][s];
        assert!((dp - visit.value).abs() < 1e-9, "{node:?}: {dp} vs {}", visit.value);
        if visit.q.is_empty() {
            continue;
        }
        let chosen = table.argmax[node.t - 1][s] as usize;
        assert_eq!(table.actions[chosen], oracle.actions[chosen]);
        let best = visit.q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let first = visit.q.iter().position(|&q| q == best).unwrap();
        let runner_up = visit.q.iter().enumerate().filter(|&(i, _)| i != first).map(|(_, &q)| q).fold(f64::NEG_INFINITY, f64::max);
        if best - runner_up > 1e-9 {
            assert_eq!(chosen, first, "{node:?}");
        } else {
            assert!((visit.q[chosen] - best).abs() < 1e-9, "{node:?}");
        }
    }
    oracle.visits.len()
}

#[test]
fn micro_instance_matches_game_tree() {
    let truth = TruthModel::new(TruthParams::calibrated(2), 3);
    let visited = check(&truth, 3, 2, &[1000.0, 2500.0]);
    assert!(visited > 10);
}

#[test]
fn exact_grid_needs_no_snapping() {
    // With G = 6 every reachable frequency at K = 2, T = 3 is a grid point.
    let truth = TruthModel::new(TruthParams::calibrated(2), 3);
    check(&truth, 3, 6, &[1800.0, 900.0]);
}

#[test]
fn three_clusters_linear_truth() {
    let truth = TruthModel::new(TruthParams::random_linear(3, 11), 3);
    check(&truth, 3, 2, &[1.0, 2.0, 3.0]);
}

#[test]
fn longer_horizon_with_snapping() {
    let truth = TruthModel::new(TruthParams::calibrated(2), 4);
    check(&truth, 4, 3, &[1500.0, 2000.0]);
}
