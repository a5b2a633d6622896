//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
//! when a hard criterion fails. Criterion 10 only warns.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use searchrec::config::RunConfig;
use searchrec::manifest::Manifest;
use searchrec::pipeline::{self, paths, Plan, Stage};
use searchrec::synth::{self, GenerateOptions};
use searchrec_core::clickstream::{
    diagonal_matrix, extract_status_quo_matrix, first_click_distribution, generate_synthetic, moments, GenerateConfig, SyntheticMarket,
    TruthModel, TruthParams,
};
use searchrec_core::clustering::{best_by_silhouette, fit_k, sweep, SweepConfig};
use searchrec_core::counterfactual::{
    fast_path, normalize, optimize_matrix, quadratic_step, run_scenarios, AscentConfig, CounterfactualConfig, Inputs, MatrixMode, Scenario,
};
use searchrec_core::dpsolver::{bellman_solve, summarize_policy, DecisionModel, ScenarioModifiers};
use searchrec_core::policy::{dataset, evaluate, fit_policy, observations, ChoiceModel, Dataset, EstimatorConfig, Method};
use searchrec_core::staterec::update_freq;
use searchrec_core::{FreqVector, RecAction, RecPolicy, RecState, SimplexLattice};
use searchrec_testkit::expectimax::{Expectimax, Node};
use searchrec_testkit::partition::{best_partition, planted_blobs};
use searchrec_testkit::simplex::{compositions, nearest};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn c1_expectimax() -> Outcome {
    let (k, horizon, g) = (2, 3, 2);
    let margins = [1000.0, 2500.0];
    let truth = TruthModel::new(TruthParams::calibrated(k), horizon);
    let lattice = SimplexLattice::new(k, g);
    let model = DecisionModel::build(&truth, &lattice, horizon).map_err(|e| e.to_string())?;
    let table = bellman_solve(&model, &margins, &ScenarioModifiers::default()).map_err(|e| e.to_string())?;
    let mut oracle = Expectimax::new(&truth, horizon, g, &margins);
    let roots = oracle.solve_roots();
    let mut worst: f64 = 0.0;
    for (a, v) in roots.iter().enumerate() {
        worst = worst.max((table.values[0][a] - v).abs());
    }
    let index = |n: &Node| match (&n.views, &n.recs) {
        (Some(v), Some(r)) => model.encode(n.t, n.last, lattice.rank(v), lattice.rank(r)),
        _ => n.last,
    };
    for (node, visit) in &oracle.visits {
        let s = index(node);
        worst = worst.max((table.values[node.t - 1][s] - visit.value).abs());
        if visit.q.is_empty() {
            continue;
        }
        let chosen = table.argmax[node.t - 1][s] as usize;
        ensure!(table.actions[chosen] == oracle.actions[chosen], "action order differs");
        let best = visit.q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ensure!((visit.q[chosen] - best).abs() < 1e-9, "{node:?}: argmax {chosen} is not optimal");
        let first = visit.q.iter().position(|&q| q == best).unwrap();
        let runner_up = visit.q.iter().enumerate().filter(|&(i, _)| i != first).map(|(_, &q)| q).fold(f64::NEG_INFINITY, f64::max);
        ensure!(best - runner_up <= 1e-9 || chosen == first, "{node:?}: argmax {chosen}, oracle {first}");
    }
    ensure!(worst < 1e-9, "max |V - oracle| = {worst:e}");
    Ok(format!("{} tree nodes, max |V - oracle| = {worst:.1e}", oracle.visits.len()))
}

fn c2_nesting() -> Outcome {
    let (k, horizon) = (4, 8);
    let m = SyntheticMarket::calibrated(k, horizon);
    let model = DecisionModel::build(&m.truth, &SimplexLattice::new(k, 3), horizon).map_err(|e| e.to_string())?;
    let inputs = Inputs { model: &model, margins: &m.margins, initial: &m.first_click, status_quo: &m.status_quo };
    let run = run_scenarios(&inputs, &Scenario::ALL, &CounterfactualConfig::default(), MatrixMode::Optimize).map_err(|e| e.to_string())?;
    let p = |s: Scenario| run.profit(s).unwrap();
    let tol = 1e-8;
    use Scenario::*;
    let chain = [(FirstBest, DynamicMatrixOpt), (DynamicMatrixOpt, StaticMatrixOpt), (StaticMatrixOpt, StatusQuo), (PrevActionsAndRecs, PrevActionsOnly)];
    for (hi, lo) in chain {
        ensure!(p(hi) >= p(lo) - tol, "{} {} < {} {}", hi.name(), p(hi), lo.name(), p(lo));
    }
    for s in [OneStepLookahead, IgnoreChurn, IgnoreMargins, PrevActionsAndRecs, PrevActionsOnly, StatusQuo] {
        ensure!(p(FirstBest) >= p(s) - tol, "first_best {} < {} {}", p(FirstBest), s.name(), p(s));
    }
    let n = normalize(&run);
    let show = |s: Scenario| n.iter().find(|r| r.scenario == s).unwrap().expected_profit;
    Ok(format!("fb {:.2} >= dyn {:.2} >= static {:.2} >= sq 100; pr {:.2} >= po {:.2}", show(FirstBest), show(DynamicMatrixOpt), show(StaticMatrixOpt), show(PrevActionsAndRecs), show(PrevActionsOnly)))
}

/// Share of single-cluster first-best actions at t = 2 and t = T - 1.
struct Concentration {
    early: f64,
    late: f64,
}

fn c3_ordering(conc: &mut Option<Concentration>) -> Outcome {
    let (k, horizon, g) = (4, 22, 3);
    let m = SyntheticMarket::calibrated(k, horizon);
    let sq = RecPolicy::StaticMatrix { rows: m.status_quo.clone() };
    let gen = GenerateConfig { n_sessions: 20_000, horizon, seed: 2024, first_click: m.first_click.clone() };
    let sessions = generate_synthetic(&m.truth, &sq, &gen);
    let mo = moments(&sessions, k);
    ensure!((6.0..=8.0).contains(&mo.mean_pageviews), "mean pageviews {}", mo.mean_pageviews);
    ensure!((0.02..=0.04).contains(&mo.conversion_rate), "conversion {}", mo.conversion_rate);
    let status_quo = extract_status_quo_matrix(&sessions, k);
    ensure!(status_quo.flagged.is_empty(), "unobserved status-quo rows {:?}", status_quo.flagged);
    let initial = first_click_distribution(&sessions, k);

    let model = DecisionModel::build(&m.truth, &SimplexLattice::new(k, g), horizon).map_err(|e| e.to_string())?;
    let inputs = Inputs { model: &model, margins: &m.margins, initial: &initial, status_quo: &status_quo.rows };
    use Scenario::*;
    let wanted = [PrevActionsOnly, PrevActionsAndRecs, OneStepLookahead, FirstBest];
    let run = run_scenarios(&inputs, &wanted, &CounterfactualConfig::default(), MatrixMode::Optimize).map_err(|e| e.to_string())?;
    let n = normalize(&run);
    let v = |s: Scenario| n.iter().find(|r| r.scenario == s).unwrap().expected_profit;
    let (po, pr, os, fb) = (v(PrevActionsOnly), v(PrevActionsAndRecs), v(OneStepLookahead), v(FirstBest));

    let table = run.first_best.as_ref().expect("first best solved");
    let summary = summarize_policy(&model, table);
    *conc = Some(Concentration { early: summary.concentration[1][0], late: summary.concentration[horizon - 2][0] });

    let detail = format!("pv {:.2}, conv {:.4}; po {po:.2} < sq 100 < pr {pr:.2} < fb {fb:.2}, os {os:.2}", mo.mean_pageviews, mo.conversion_rate);
    ensure!(po < 100.0 && 100.0 < pr && pr < fb && os < fb, "ordering violated: {detail}");
    Ok(detail)
}

fn c4_recovery() -> Outcome {
    let (k, horizon) = (4, 22);
    let truth = TruthModel::new(TruthParams::random_linear(k, 5), horizon);
    let rec = RecPolicy::StaticMatrix { rows: diagonal_matrix(k, 1.0 / k as f64) };
    let uniform = vec![1.0 / k as f64; k];
    let gen = |n, seed| generate_synthetic(&truth, &rec, &GenerateConfig { n_sessions: n, horizon, seed, first_click: uniform.clone() });
    let train = gen(100_000, 1);
    let data = dataset(&train, k, horizon).map_err(|e| e.to_string())?;
    let policy = fit_policy(&data, k, horizon, Method::Logit, &EstimatorConfig::default(), 0).map_err(|e| e.to_string())?;
    let probe = gen(400, 2);
    let states = observations(&probe, k, horizon).map_err(|e| e.to_string())?;
    ensure!(states.len() >= 1000, "only {} probe states", states.len());
    let (mut worst, mut mean): (f64, f64) = (0.0, 0.0);
    for (s, _, _) in states.iter().take(1000) {
        let d = tv(&truth.predict(s), &policy.predict(s));
        worst = worst.max(d);
        mean += d / 1000.0;
    }
    ensure!(worst < 0.02, "max TV {worst:.4}");
    Ok(format!("1000 states, max TV {worst:.4}, mean TV {mean:.4}"))
}

fn rows(items: &[(f64, usize)], c: usize) -> Dataset {
    let mut d = Dataset { dim: 1, n_classes: c, ..Default::default() };
    for (i, &(x, y)) in items.iter().enumerate() {
        d.push(&[x], y, i);
    }
    d
}

fn c5_metrics() -> Outcome {
    let tol = 1e-12;
    let h = evaluate(|_, p| p.copy_from_slice(&[0.25, 0.75]), &rows(&[(0.0, 0)], 2)).hellinger;
    ensure!((h - 1.0).abs() < tol, "hellinger {h}");

    let balanced = rows(&[(0.0, 0), (0.0, 1), (0.0, 2), (0.0, 3)], 4);
    let u = evaluate(|_, p| p.iter_mut().for_each(|v| *v = 0.25), &balanced);
    ensure!((u.lift - 1.0).abs() < tol, "uniform lift {}", u.lift);

    let perfect = evaluate(
        |x, p| {
            p.iter_mut().for_each(|v| *v = 0.0);
            p[x[0] as usize] = 1.0;
        },
        &rows(&[(0.0, 0), (1.0, 1), (2.0, 2), (1.0, 1)], 3),
    );
    ensure!(perfect.log_loss.abs() < tol, "perfect log-loss {}", perfect.log_loss);

    // [0, 1] on predictors at least as likely as the intercept-only model
    let skewed = rows(&[(0.0, 0), (0.0, 0), (0.0, 1), (1.0, 2), (1.0, 0), (2.0, 1), (2.0, 0)], 3);
    let freq = [4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0];
    // saturated fit: class frequencies within each feature value
    let cond = [[2.0 / 3.0, 1.0 / 3.0, 0.0], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]];
    let mut r2 = vec![u.nagelkerke_r2, perfect.nagelkerke_r2];
    for w in [0.0, 0.1, 0.5, 0.9, 1.0] {
        let r = evaluate(
            |x, p| {
                for (j, v) in p.iter_mut().enumerate() {
                    let truth = cond[x[0] as usize][j];
                    *v = w * truth + (1.0 - w) * freq[j];
                }
            },
            &skewed,
        );
        r2.push(r.nagelkerke_r2);
    }
    ensure!(r2.iter().all(|&r| (-tol..=1.0 + tol).contains(&r)), "pseudo-R2 outside [0,1]: {r2:?}");
    ensure!(r2[2].abs() < tol, "intercept-only predictor scores {}", r2[2]);
    ensure!(r2.windows(2).skip(2).all(|w| w[1] >= w[0] - tol), "pseudo-R2 not increasing towards the saturated fit: {r2:?}");
    // worse than the null model: unbounded below, never above 1
    for p in [[0.1, 0.1, 0.8], [0.2, 0.6, 0.2]] {
        let r = evaluate(|_, out| out.copy_from_slice(&p), &skewed).nagelkerke_r2;
        ensure!(r <= 1.0 + tol, "pseudo-R2 {r} above 1");
    }
    Ok(format!("hellinger {h:.12}, lift {}, log-loss {:.1e}, R2 in [{:.3}, {:.3}]", u.lift, perfect.log_loss.abs(), r2.iter().cloned().fold(1.0, f64::min), r2.iter().cloned().fold(0.0, f64::max)))
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i}")).collect()
}

fn c6_clustering() -> Outcome {
    let monotone = |h: &[f64]| h.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let mut fits = 0;

    let pts = vec![
        vec![0.05, 0.10],
        vec![0.12, 0.02],
        vec![0.00, 0.00],
        vec![0.90, 0.85],
        vec![0.95, 1.00],
        vec![0.50, 0.55],
        vec![0.58, 0.40],
        vec![0.85, 0.10],
    ];
    for k in 2..=4 {
        let (opt, _) = best_partition(&pts, k);
        let m = fit_k(&pts, &ids(8), k, &SweepConfig::default()).map_err(|e| e.to_string())?;
        ensure!(monotone(&m.ss_history), "within-SS rose at k={k}");
        ensure!((m.within_ss - opt).abs() < 1e-9, "k={k}: {} vs brute force {opt}", m.within_ss);
        fits += 1;
    }
    let mut found = Vec::new();
    for (kstar, seed) in [(3, 1), (5, 2), (8, 3)] {
        let (pts, _) = planted_blobs(kstar, 25, 5, 0.04, seed);
        let cfg = SweepConfig { k_min: 2, k_max: 10, ..SweepConfig::default() };
        let models = sweep(&pts, &ids(pts.len()), &cfg, 7).map_err(|e| e.to_string())?;
        for m in &models {
            ensure!(monotone(&m.ss_history), "within-SS rose at k={} (K*={kstar})", m.k);
            fits += 1;
        }
        let best = best_by_silhouette(&models).unwrap().k;
        ensure!(best == kstar, "planted {kstar}, silhouette picked {best}");
        found.push(best);
    }
    Ok(format!("brute force matched for k=2..4; planted K* recovered {found:?}; within-SS monotone in {fits} fits"))
}

fn max_tv(a: &DecisionModel, b: &DecisionModel) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 1..a.horizon {
        for s in 0..a.n_states(t) {
            for r in 0..a.actions.len() {
                worst = worst.max(tv(a.probs(t, s, r), b.probs(t, s, r)));
            }
        }
    }
    worst
}

fn c7_optimizer() -> Outcome {
    let c = [0.3, -1.2, 2.0, 0.7];
    let a = [[2.0, 0.5, 0.0, 0.1], [0.5, 1.0, 0.2, 0.0], [0.0, 0.2, 3.0, -0.4], [0.1, 0.0, -0.4, 1.5]];
    let f = |x: &[f64]| {
        let d: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
        -(0..4).map(|i| (0..4).map(|j| d[i] * a[i][j] * d[j]).sum::<f64>()).sum::<f64>()
    };
    let g = |x: &[f64]| {
        let d: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
        (0..4).map(|i| -2.0 * (0..4).map(|j| a[i][j] * d[j]).sum::<f64>()).collect::<Vec<f64>>()
    };
    let x = quadratic_step(&[5.0, 5.0, -3.0, 0.0], f, g, 1e-3).ok_or("singular curvature")?;
    let err = x.iter().zip(&c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure!(err < 1e-9, "quadratic maximiser off by {err:e}");

    let (k, horizon, gr) = (3, 5, 2);
    let m = SyntheticMarket::calibrated(k, horizon);
    let lattice = SimplexLattice::new(k, gr);
    let base = DecisionModel::build(&m.truth, &lattice, horizon).map_err(|e| e.to_string())?;
    let mut p = m.truth.params.clone();
    p.rec_pull *= 1.05;
    p.convert_base.iter_mut().for_each(|c| *c += 0.04);
    p.exit_time += 0.05;
    let moved = DecisionModel::build(&TruthModel::new(p, horizon), &lattice, horizon).map_err(|e| e.to_string())?;
    let shift = max_tv(&base, &moved);
    ensure!(shift <= 0.05, "perturbation too large: TV {shift}");
    let sq = RecPolicy::StaticMatrix { rows: m.status_quo.clone() };
    let cfg = AscentConfig::default();
    let phi0 = optimize_matrix(&base, &m.margins, &m.first_click, &sq, &cfg).map_err(|e| e.to_string())?.policy;
    let fast = fast_path(&moved, &m.margins, &m.first_click, &phi0, 1e-4).map_err(|e| e.to_string())?;
    let exact = optimize_matrix(&moved, &m.margins, &m.first_click, &phi0, &cfg).map_err(|e| e.to_string())?;
    let ratio = fast.value / exact.value;
    ensure!(ratio >= 0.99, "fast path reaches {:.4} of the re-optimised profit", ratio);
    Ok(format!("quadratic error {err:.1e}; TV {shift:.4}, fast/exact = {ratio:.6}"))
}

fn c8_state_mechanics() -> Outcome {
    let s1 = RecState::initial(3, 2).map_err(|e| e.to_string())?;
    let s2 = s1.transition(0, &RecAction::new([0, 0, 0]), 22).map_err(|e| e.to_string())?;
    ensure!(s2.views.to_f64() == [0.0, 0.0, 1.0] && s2.recs.to_f64() == [1.0, 0.0, 0.0], "A2/R2 worked sequence");
    let s2 = s1.transition(0, &RecAction::new([2, 1, 1]), 22).map_err(|e| e.to_string())?;
    ensure!((s2.t, s2.last) == (2, 0), "t and last click");
    ensure!(s2.views == FreqVector::from_items(3, &[2]).unwrap(), "views {:?}", s2.views);
    ensure!(s2.recs == FreqVector::from_ratio(vec![0, 2, 1], 3), "recs {:?}", s2.recs);
    let u = update_freq(&FreqVector::empty(3), 0, &[2, 1, 1]).map_err(|e| e.to_string())?;
    ensure!(u == s2.recs, "update_freq disagrees with transition");

    let mut checked = 0usize;
    for g in [2u32, 4, 8] {
        let lattice = SimplexLattice::new(3, g);
        for i in 0..lattice.num_points() {
            ensure!(lattice.snap(&lattice.freq(i)) == i, "snap not idempotent at G={g}, point {i}");
        }
        for den in 1..=24u64 {
            for c in compositions(3, den as u32) {
                let num: Vec<u64> = c.iter().map(|&x| u64::from(x)).collect();
                let v = FreqVector::from_ratio(num.clone(), den);
                let idx = lattice.snap(&v);
                ensure!(lattice.coords(idx).unwrap() == nearest(&num, den, g).as_slice(), "G={g}: {num:?}/{den} not snapped to nearest");
                for (a, b) in v.to_f64().iter().zip(lattice.values(idx)) {
                    ensure!((a - b).abs() <= 1.0 / f64::from(g) + 1e-15, "G={g}: {num:?}/{den} moved more than 1/G");
                }
                ensure!(lattice.snap(&lattice.freq(idx)) == idx, "G={g}: snap of snap");
                checked += 1;
            }
        }
    }
    Ok(format!("worked sequence reproduced; {checked} frequency vectors snapped"))
}

fn artifact_hashes(m: &Manifest) -> Vec<(String, String)> {
    m.stages.iter().flat_map(|s| s.artifacts.iter().map(|a| (a.path.clone(), a.sha256.clone()))).collect()
}

fn c9_determinism(scratch: &Path) -> Outcome {
    let seed = 11;
    let opts = GenerateOptions { seed, ..GenerateOptions::default() };
    let g = synth::generate(&opts, &scratch.join("input")).map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::load(&g.config).map_err(|e| e.to_string())?;
    cfg.counterfactual.bootstrap = 0;
    let (a, b) = (scratch.join("a"), scratch.join("b"));
    let run = |cfg: &RunConfig, root: &Path, plan: Plan| pipeline::run(cfg, root, seed, plan, false).map_err(|e| e.to_string());

    let t = Instant::now();
    let ma = run(&cfg, &a, Plan::all())?;
    let pipeline_time = t.elapsed();
    let mb = run(&cfg, &b, Plan::all())?;
    ensure!(ma.stages.len() == 6, "{} stages recorded", ma.stages.len());
    ensure!(artifact_hashes(&ma) == artifact_hashes(&mb), "artifact hashes differ between identical runs");

    let cf_only = Plan { force_from: Some(Stage::Counterfactual), ..Plan::all() };
    let scenarios = |root: &Path| std::fs::read(root.join(paths::SCENARIOS_JSON)).map_err(|e| e.to_string());
    cfg.counterfactual.bootstrap = 4;
    let pool = |n: usize| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    pool(1).install(|| run(&cfg, &b, cf_only))?;
    let one = scenarios(&b)?;
    pool(3).install(|| run(&cfg, &b, cf_only))?;
    ensure!(one == scenarios(&b)?, "bootstrap results depend on the worker count");

    cfg.counterfactual.bootstrap = 50;
    let t = Instant::now();
    let m = run(&cfg, &a, cf_only)?;
    let boot_time = t.elapsed();
    let art: pipeline::CounterfactualArtifact = serde_json::from_slice(&scenarios(&a)?).map_err(|e| e.to_string())?;
    ensure!(art.failures.is_empty(), "bootstrap failures: {:?}", art.failures);
    ensure!(art.results.iter().all(|r| r.replications == 50), "replication count");
    ensure!(m.failure.is_none(), "failure recorded");
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    ensure!(boot_time < Duration::from_secs(30 * 60), "B=50 bootstrap took {boot_time:.0?} on {cores} core(s)");
    Ok(format!(
        "{} artifacts identical; pipeline {:.0?}; B=50 bootstrap {:.0?} on {cores} core(s); 1 vs 3 workers identical",
        artifact_hashes(&ma).len(),
        pipeline_time,
        boot_time
    ))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    soft: bool,
}

fn report(c: &Criterion, outcome: std::thread::Result<Outcome>, elapsed: Duration) -> bool {
    let outcome = match outcome {
        Ok(o) => o,
        Err(p) => Err(format!("panicked: {}", p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())),
    };
    let outcome = match (outcome, c.limit) {
        (Ok(d), Some(l)) if elapsed > l => Err(format!("{d}; over the {l:.0?} limit")),
        (o, _) => o,
    };
    let pass = outcome.is_ok();
    let verdict = match (pass, c.soft) {
        (true, _) => "PASS",
        (false, true) => "WARN",
        (false, false) => "FAIL",
    };
    let detail = outcome.unwrap_or_else(|e| e);
    println!("criterion {:>2} {verdict} {} [{elapsed:.1?}]: {detail}", c.id, c.name);
    pass || c.soft
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("temp dir");
    let mut conc = None;
    let min = |m: u64| Some(Duration::from_secs(60 * m));
    let mut ok = true;
    let mut check = |c: Criterion, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f));
        ok &= report(&c, outcome, t.elapsed());
    };

    check(Criterion { id: 1, name: "expectimax equivalence", limit: Some(Duration::from_secs(10)), soft: false }, &mut c1_expectimax);
    check(Criterion { id: 2, name: "policy-class nesting", limit: min(5), soft: false }, &mut c2_nesting);
    check(Criterion { id: 3, name: "scenario ordering on calibrated data", limit: min(15), soft: false }, &mut || c3_ordering(&mut conc));
    check(Criterion { id: 4, name: "logit recovery", limit: min(2), soft: false }, &mut c4_recovery);
    check(Criterion { id: 5, name: "fit metrics", limit: None, soft: false }, &mut c5_metrics);
    check(Criterion { id: 6, name: "clustering", limit: min(1), soft: false }, &mut c6_clustering);
    check(Criterion { id: 7, name: "matrix optimiser", limit: min(2), soft: false }, &mut c7_optimizer);
    check(Criterion { id: 8, name: "state mechanics", limit: None, soft: false }, &mut c8_state_mechanics);
    check(Criterion { id: 9, name: "pipeline determinism and bootstrap", limit: None, soft: false }, &mut || c9_determinism(scratch.path()));
    check(Criterion { id: 10, name: "first-best concentration", limit: None, soft: true }, &mut || match &conc {
        None => Err("calibrated first-best policy unavailable".into()),
        Some(c) if c.late >= c.early => Ok(format!("single-cluster share {:.3} at t=2, {:.3} at t=T-1", c.early, c.late)),
        Some(c) => Err(format!("single-cluster share fell from {:.3} at t=2 to {:.3} at t=T-1", c.early, c.late)),
    });

    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
