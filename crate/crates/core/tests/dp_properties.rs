use searchrec_core::clickstream::{diagonal_matrix, SyntheticMarket, TruthModel, TruthParams};
use searchrec_core::counterfactual::{normalize, run_scenarios, CounterfactualConfig, Inputs, MatrixMode, Scenario};
use searchrec_core::dpsolver::{
    bellman_solve, evaluate_exact, evaluate_simulated, instantaneous_profit, occupancy, summarize_policy, DecisionModel, ScenarioModifiers,
};
use searchrec_core::policy::ChoiceModel;
use searchrec_core::{rng, RecAction, RecPolicy, RecState, SimplexLattice};

fn market(k: usize, horizon: usize, g: u32) -> (SyntheticMarket, DecisionModel) {
    let m = SyntheticMarket::calibrated(k, horizon);
    let model = DecisionModel::build(&m.truth, &SimplexLattice::new(k, g), horizon).unwrap();
    (m, model)
}

#[test]
fn first_best_evaluation_equals_bellman_value() {
    let (m, model) = market(3, 6, 2);
    let table = bellman_solve(&model, &m.margins, &ScenarioModifiers::default()).unwrap();
    let v = table.initial_value(&m.first_click);
    let e = evaluate_exact(&model, &table.policy(), &m.margins, &m.first_click).unwrap();
    assert!((v - e).abs() < 1e-9, "{v} vs {e}");
    assert!(table.values.iter().flatten().all(|x| x.is_finite() && *x >= 0.0));
}

#[test]
fn backward_and_forward_evaluation_agree() {
    let (m, model) = market(3, 6, 2);
    for policy in [
        RecPolicy::StaticMatrix { rows: m.status_quo.clone() },
        RecPolicy::Constant { action: RecAction::new([0, 1, 2]) },
        bellman_solve(&model, &m.margins, &ScenarioModifiers::default()).unwrap().policy(),
    ] {
        let exact = evaluate_exact(&model, &policy, &m.margins, &m.first_click).unwrap();
        let occ = occupancy(&model, &policy, &m.margins, &m.first_click).unwrap();
        let fwd = occ.profit;
        assert!((occ.mass[0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((exact - fwd).abs() < 1e-9, "{exact} vs {fwd}");
    }
}

#[test]
fn simulation_agrees_with_exact_within_three_se() {
    let truth = TruthModel::new(TruthParams::random_linear(3, 21), 5);
    let model = DecisionModel::build(&truth, &SimplexLattice::new(3, 2), 5).unwrap();
    let margins = [3.0, 1.0, 2.0];
    let initial = [0.5, 0.3, 0.2];
    let policy = RecPolicy::StaticMatrix { rows: diagonal_matrix(3, 0.6) };
    let exact = evaluate_exact(&model, &policy, &margins, &initial).unwrap();
    let (mean, se) = evaluate_simulated(&model, &policy, &margins, &initial, 1_000_000, 4).unwrap();
    assert!((mean - exact).abs() < 3.0 * se, "{mean} ± {se} vs {exact}");
}

#[test]
fn instantaneous_profit_matches_single_step_simulation() {
    let truth = TruthModel::new(TruthParams::random_linear(2, 3), 10);
    let s = RecState::initial(2, 1).unwrap().with_recs(&RecAction::new([0, 0, 1]));
    let margins = [10.0, 20.0];
    let pi = instantaneous_profit(&s, &truth, &margins);
    let p = truth.predict(&s);
    let mut r = rng::stream(1, rng::tag::SIMULATE, 0);
    let n = 1_000_000;
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..n {
        let c = rng::sample_index(&mut r, &p);
        let x = if (2..4).contains(&c) { margins[c - 2] } else { 0.0 };
        sum += x;
        sq += x * x;
    }
    let mean = sum / n as f64;
    let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
    assert!((mean - pi).abs() < 3.0 * se);
}

#[test]
fn immediate_exit_yields_zero() {
    struct Leaver;
    impl ChoiceModel for Leaver {
        fn k(&self) -> usize {
            2
        }
        fn predict_into(&self, _: &RecState, out: &mut [f64]) {
            out.fill(0.0);
            out[4] = 1.0;
        }
    }
    let model = DecisionModel::build(&Leaver, &SimplexLattice::new(2, 2), 4).unwrap();
    let table = bellman_solve(&model, &[5.0, 7.0], &ScenarioModifiers::default()).unwrap();
    assert_eq!(table.initial_value(&[0.5, 0.5]), 0.0);
    let sq = RecPolicy::StaticMatrix { rows: diagonal_matrix(2, 0.5) };
    assert_eq!(evaluate_exact(&model, &sq, &[5.0, 7.0], &[0.5, 0.5]).unwrap(), 0.0);
}

#[test]
fn margin_shift_identity() {
    // For a fixed policy, profit is linear in margins with the conversion
    // probability as the weight of a uniform shift; the re-optimised value
    // is at least the shifted value of the old optimum.
    let (m, model) = market(2, 4, 2);
    let c = 500.0;
    let shifted: Vec<f64> = m.margins.iter().map(|x| x + c).collect();
    let ones = vec![1.0; 2];
    let base = bellman_solve(&model, &m.margins, &ScenarioModifiers::default()).unwrap();
    let moved = bellman_solve(&model, &shifted, &ScenarioModifiers::default()).unwrap();
    for table in [&base, &moved] {
        let pol = table.policy();
        let p_conv = evaluate_exact(&model, &pol, &ones, &m.first_click).unwrap();
        let a = evaluate_exact(&model, &pol, &m.margins, &m.first_click).unwrap();
        let b = evaluate_exact(&model, &pol, &shifted, &m.first_click).unwrap();
        assert!((b - a - c * p_conv).abs() < 1e-8);
    }
    let pol = base.policy();
    let lower = evaluate_exact(&model, &pol, &shifted, &m.first_click).unwrap();
    assert!(moved.initial_value(&m.first_click) >= lower - 1e-9);
}

#[test]
fn scenario_nesting_on_small_model() {
    let (m, model) = market(3, 6, 2);
    let inputs = Inputs { model: &model, margins: &m.margins, initial: &m.first_click, status_quo: &m.status_quo };
    let run = run_scenarios(&inputs, &Scenario::ALL, &CounterfactualConfig::default(), MatrixMode::Optimize).unwrap();
    let p = |s| run.profit(s).unwrap();
    let fb = p(Scenario::FirstBest);
    let eps = 1e-8;
    assert!(fb >= p(Scenario::DynamicMatrixOpt) - eps);
    assert!(p(Scenario::DynamicMatrixOpt) >= p(Scenario::StaticMatrixOpt) - eps);
    assert!(p(Scenario::StaticMatrixOpt) >= p(Scenario::StatusQuo) - eps);
    for s in [Scenario::OneStepLookahead, Scenario::IgnoreChurn, Scenario::IgnoreMargins, Scenario::PrevActionsAndRecs] {
        assert!(fb >= p(s) - eps, "{s}");
    }
    assert!(p(Scenario::PrevActionsAndRecs) >= p(Scenario::PrevActionsOnly) - eps);
    let sums = run.outcomes.iter().map(|o| o.checksum).collect::<std::collections::BTreeSet<_>>();
    assert_eq!(sums.len(), 1, "every scenario evaluated under the same inputs");
    let normalized = normalize(&run);
    assert_eq!(normalized.iter().find(|r| r.scenario == Scenario::StatusQuo).unwrap().expected_profit, 100.0);
}

#[test]
fn ignoring_churn_is_a_no_op_without_exit() {
    let (m, model) = market(2, 5, 2);
    let stay = model.without_churn();
    let fb = bellman_solve(&stay, &m.margins, &ScenarioModifiers::default()).unwrap();
    let ic = bellman_solve(&stay, &m.margins, &ScenarioModifiers { ignore_churn: true, ..Default::default() }).unwrap();
    let a = evaluate_exact(&stay, &fb.policy(), &m.margins, &m.first_click).unwrap();
    let b = evaluate_exact(&stay, &ic.policy(), &m.margins, &m.first_click).unwrap();
    assert!((a - b).abs() < 1e-12);
    assert_eq!(fb.argmax, ic.argmax);
}

#[test]
fn summary_shares_are_distributions() {
    let (m, model) = market(3, 6, 2);
    let table = bellman_solve(&model, &m.margins, &ScenarioModifiers::default()).unwrap();
    let s = summarize_policy(&model, &table);
    for row in &s.matrix {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    for c in &s.concentration {
        assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn solving_is_bit_deterministic() {
    let (m, model) = market(3, 5, 2);
    let a = bellman_solve(&model, &m.margins, &ScenarioModifiers::default()).unwrap();
    let b = bellman_solve(&model, &m.margins, &ScenarioModifiers::default()).unwrap();
    assert_eq!(a, b);
}
