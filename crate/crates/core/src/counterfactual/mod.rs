//! The recommendation regimes compared against the status quo, their exact
//! evaluation under the undistorted consumer model, and bootstrap uncertainty.

mod matrix;
mod restricted;

pub use matrix::{as_dynamic, fast_path, optimize_matrix, quadratic_step, AscentConfig, FastPathResult, FastPathStep, MatrixOptimum};
pub use restricted::{plan_restricted, refine, restricted_pass, RestrictedPlan};

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clickstream::Session;
use crate::dpsolver::{bellman_solve, evaluate_policy, DecisionModel, DpError, Mask, RecPolicy, ScenarioModifiers, ValueTable};
use crate::par;
use crate::rng::{self, tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    StatusQuo,
    StaticMatrixOpt,
    DynamicMatrixOpt,
    PrevActionsOnly,
    PrevActionsAndRecs,
    IgnoreMargins,
    IgnoreChurn,
    OneStepLookahead,
    FirstBest,
}

impl Scenario {
    pub const ALL: [Scenario; 9] = [
        Scenario::StatusQuo,
        Scenario::StaticMatrixOpt,
        Scenario::DynamicMatrixOpt,
        Scenario::PrevActionsOnly,
        Scenario::PrevActionsAndRecs,
        Scenario::IgnoreMargins,
        Scenario::IgnoreChurn,
        Scenario::OneStepLookahead,
        Scenario::FirstBest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::StatusQuo => "status_quo",
            Scenario::StaticMatrixOpt => "static_matrix_opt",
            Scenario::DynamicMatrixOpt => "dynamic_matrix_opt",
            Scenario::PrevActionsOnly => "prev_actions_only",
            Scenario::PrevActionsAndRecs => "prev_actions_and_recs",
            Scenario::IgnoreMargins => "ignore_margins",
            Scenario::IgnoreChurn => "ignore_churn",
            Scenario::OneStepLookahead => "one_step_lookahead",
            Scenario::FirstBest => "first_best",
        }
    }

    /// Planning distortion of the Bellman-based scenarios.
    pub fn modifiers(self) -> Option<ScenarioModifiers> {
        let m = ScenarioModifiers::default();
        match self {
            Scenario::FirstBest => Some(m),
            Scenario::IgnoreChurn => Some(ScenarioModifiers { ignore_churn: true, ..m }),
            Scenario::IgnoreMargins => Some(ScenarioModifiers { uniform_margins: true, ..m }),
            Scenario::OneStepLookahead => Some(ScenarioModifiers { one_step: true, ..m }),
            _ => None,
        }
    }

    /// Parses `all` or a comma-separated list of names.
    pub fn parse_list(s: &str) -> Result<Vec<Scenario>, String> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(Scenario::ALL.to_vec());
        }
        let mut out: Vec<Scenario> = s.split(',').map(str::parse).collect::<Result<_, _>>()?;
        if out.is_empty() {
            return Err("empty scenario list".into());
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Scenario::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown scenario {s:?}"))
    }
}

impl core::fmt::Display for Scenario {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CounterfactualError {
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error("status-quo matrix must be {k} x {k} with stochastic rows")]
    StatusQuo { k: usize },
    #[error("bootstrap needs at least 2 replications, got {0}")]
    TooFewReplications(usize),
    #[error("every bootstrap replication failed; first failure: {0}")]
    AllReplicationsFailed(String),
    #[error("fast path needs point-estimate matrices for {0}")]
    MissingWarmStart(Scenario),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualConfig {
    pub ascent: AscentConfig,
    /// Improvement passes of the restricted planners after the first.
    pub restricted_passes: usize,
    /// Finite-difference step of the quadratic fast path.
    pub fd_step: f64,
}

impl Default for CounterfactualConfig {
    fn default() -> Self {
        CounterfactualConfig { ascent: AscentConfig::default(), restricted_passes: 2, fd_step: 1e-4 }
    }
}

/// The model everything is evaluated under.
#[derive(Clone, Copy)]
pub struct Inputs<'a> {
    pub model: &'a DecisionModel,
    pub margins: &'a [f64],
    pub initial: &'a [f64],
    pub status_quo: &'a [Vec<f64>],
}

/// How matrix scenarios are planned.
#[derive(Clone, Copy)]
pub enum MatrixMode<'a> {
    /// Full projected gradient ascent.
    Optimize,
    /// One quadratic step from the given optima.
    FastPath { static_phi0: &'a RecPolicy, dynamic_phi0: &'a RecPolicy },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub scenario: Scenario,
    /// Expected profit per session in currency units.
    pub profit: f64,
    /// Fingerprint of the evaluation inputs; equal across scenarios of a run.
    pub checksum: u64,
    pub policy: RecPolicy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioRun {
    pub outcomes: Vec<ScenarioOutcome>,
    pub first_best: Option<ValueTable>,
    pub static_opt: Option<RecPolicy>,
    pub dynamic_opt: Option<RecPolicy>,
}

impl ScenarioRun {
    pub fn profit(&self, s: Scenario) -> Option<f64> {
        self.outcomes.iter().find(|o| o.scenario == s).map(|o| o.profit)
    }
}

fn check_status_quo(k: usize, m: &[Vec<f64>]) -> Result<(), CounterfactualError> {
    let ok = m.len() == k
        && m.iter().all(|r| r.len() == k && r.iter().all(|&x| x >= 0.0) && (r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    if ok {
        Ok(())
    } else {
        Err(CounterfactualError::StatusQuo { k })
    }
}

/// Plans every requested scenario (status quo is always included) and
/// evaluates each under the undistorted model.
pub fn run_scenarios(
    inputs: &Inputs<'_>,
    scenarios: &[Scenario],
    cfg: &CounterfactualConfig,
    mode: MatrixMode<'_>,
) -> Result<ScenarioRun, CounterfactualError> {
    let Inputs { model, margins, initial, status_quo } = *inputs;
    check_status_quo(model.k, status_quo)?;
    let mut wanted: Vec<Scenario> = scenarios.to_vec();
    wanted.push(Scenario::StatusQuo);
    wanted.sort();
    wanted.dedup();
    let needs = |s: Scenario| wanted.contains(&s);

    let sq = RecPolicy::StaticMatrix { rows: status_quo.to_vec() };
    let mut policies: Vec<(Scenario, RecPolicy)> = vec![(Scenario::StatusQuo, sq.clone())];
    let mut first_best = None;
    if needs(Scenario::FirstBest) || needs(Scenario::PrevActionsOnly) || needs(Scenario::PrevActionsAndRecs) {
        first_best = Some(bellman_solve(model, margins, &ScenarioModifiers::default())?);
    }
    for s in [Scenario::IgnoreMargins, Scenario::IgnoreChurn, Scenario::OneStepLookahead, Scenario::FirstBest] {
        if needs(s) {
            let table = match (s, &first_best) {
                (Scenario::FirstBest, Some(fb)) => fb.clone(),
                _ => bellman_solve(model, margins, &s.modifiers().expect("bellman scenario"))?,
            };
            policies.push((s, table.policy()));
        }
    }
    let (mut static_opt, mut dynamic_opt) = (None, None);
    if needs(Scenario::StaticMatrixOpt) || needs(Scenario::DynamicMatrixOpt) {
        let (st, dy) = match mode {
            MatrixMode::Optimize => {
                let st = optimize_matrix(model, margins, initial, &sq, &cfg.ascent)?.policy;
                let dy = if needs(Scenario::DynamicMatrixOpt) {
                    Some(optimize_matrix(model, margins, initial, &as_dynamic(&st, model.horizon), &cfg.ascent)?.policy)
                } else {
                    None
                };
                (st, dy)
            }
            MatrixMode::FastPath { static_phi0, dynamic_phi0 } => {
                let st = fast_path(model, margins, initial, static_phi0, cfg.fd_step)?.policy;
                let dy = if needs(Scenario::DynamicMatrixOpt) {
                    Some(fast_path(model, margins, initial, dynamic_phi0, cfg.fd_step)?.policy)
                } else {
                    None
                };
                (st, dy)
            }
        };
        if needs(Scenario::StaticMatrixOpt) {
            policies.push((Scenario::StaticMatrixOpt, st.clone()));
        }
        if let Some(dy) = &dy {
            policies.push((Scenario::DynamicMatrixOpt, dy.clone()));
        }
        static_opt = Some(st);
        dynamic_opt = dy;
    }
    if needs(Scenario::PrevActionsOnly) || needs(Scenario::PrevActionsAndRecs) {
        let reference = first_best.as_ref().expect("solved above").policy();
        let coarse = plan_restricted(model, margins, initial, Mask::Views, &reference, &[], cfg.restricted_passes)?;
        if needs(Scenario::PrevActionsAndRecs) {
            let seeds = [coarse.policy.clone()];
            let fine = plan_restricted(model, margins, initial, Mask::ViewsAndRecs, &reference, &seeds, cfg.restricted_passes)?;
            policies.push((Scenario::PrevActionsAndRecs, RecPolicy::Restricted(fine.policy)));
        }
        if needs(Scenario::PrevActionsOnly) {
            policies.push((Scenario::PrevActionsOnly, RecPolicy::Restricted(coarse.policy)));
        }
    }
    policies.sort_by_key(|p| p.0);
    policies.retain(|p| wanted.contains(&p.0));
    let outcomes = policies
        .into_iter()
        .map(|(scenario, policy)| {
            let e = evaluate_policy(model, &policy, margins, initial, None)?;
            Ok(ScenarioOutcome { scenario, profit: e.profit, checksum: e.checksum, policy })
        })
        .collect::<Result<Vec<_>, DpError>>()?;
    Ok(ScenarioRun { outcomes, first_best, static_opt, dynamic_opt })
}

/// A scenario's profit normalised so that the status quo is 100.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub expected_profit: f64,
    pub std_dev: f64,
    /// Mean of the normalised bootstrap replications.
    pub bootstrap_mean: f64,
    pub raw_profit: f64,
    pub replications: usize,
}

/// Point-estimate results without bootstrap uncertainty.
pub fn normalize(run: &ScenarioRun) -> Vec<ScenarioResult> {
    let base = run.profit(Scenario::StatusQuo).expect("status quo always evaluated");
    run.outcomes
        .iter()
        .map(|o| {
            let v = if o.scenario == Scenario::StatusQuo { 100.0 } else { 100.0 * o.profit / base };
            ScenarioResult { scenario: o.scenario, expected_profit: v, std_dev: 0.0, bootstrap_mean: v, raw_profit: o.profit, replications: 0 }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replications: usize,
    pub seed: u64,
    /// Draw every replication from the same random stream (diagnostic: the
    /// spread must then be zero).
    pub reuse_stream: bool,
}

/// Re-estimated model for one bootstrap sample: decision model and first-click
/// distribution.
pub type ModelBuilder<'a> = dyn Fn(&[Session], usize) -> Result<(DecisionModel, Vec<f64>), String> + Sync + 'a;

#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapOutput {
    pub results: Vec<ScenarioResult>,
    /// Raw profits per successful replication, in the order of `results`.
    pub replicates: Vec<(usize, Vec<f64>)>,
    pub failures: Vec<(usize, String)>,
}

/// Session-level bootstrap around a point-estimate run.
///
/// Each replication resamples sessions with replacement, rebuilds the model
/// with `build`, re-plans every scenario (matrix scenarios by the quadratic
/// fast path from the point optima) and evaluates under the rebuilt model.
/// Normalisation uses the point-estimate status-quo profit.
pub fn bootstrap(
    sessions: &[Session],
    point: &ScenarioRun,
    build: &ModelBuilder<'_>,
    margins: &[f64],
    status_quo: &[Vec<f64>],
    cfg: &CounterfactualConfig,
    boot: &BootstrapConfig,
) -> Result<BootstrapOutput, CounterfactualError> {
    if boot.replications < 2 {
        return Err(CounterfactualError::TooFewReplications(boot.replications));
    }
    let scenarios: Vec<Scenario> = point.outcomes.iter().map(|o| o.scenario).collect();
    let st = point.static_opt.as_ref();
    let dy = point.dynamic_opt.as_ref();
    if scenarios.contains(&Scenario::StaticMatrixOpt) && st.is_none() {
        return Err(CounterfactualError::MissingWarmStart(Scenario::StaticMatrixOpt));
    }
    if scenarios.contains(&Scenario::DynamicMatrixOpt) && dy.is_none() {
        return Err(CounterfactualError::MissingWarmStart(Scenario::DynamicMatrixOpt));
    }
    let placeholder = RecPolicy::StaticMatrix { rows: status_quo.to_vec() };
    let mode = MatrixMode::FastPath { static_phi0: st.unwrap_or(&placeholder), dynamic_phi0: dy.unwrap_or(&placeholder) };
    let n = sessions.len();
    let reps: Vec<Result<Vec<f64>, String>> = par::map_indexed(boot.replications, |b| {
        let stream = if boot.reuse_stream { 0 } else { b as u64 };
        let mut r = rng::stream(boot.seed, tag::BOOTSTRAP, stream);
        let sample: Vec<Session> = (0..n).map(|_| sessions[r.gen_range(0..n)].clone()).collect();
        let (model, initial) = build(&sample, b)?;
        let inputs = Inputs { model: &model, margins, initial: &initial, status_quo };
        let run = run_scenarios(&inputs, &scenarios, cfg, mode).map_err(|e| format!("{e}"))?;
        Ok(run.outcomes.iter().map(|o| o.profit).collect())
    });
    let mut replicates = Vec::new();
    let mut failures = Vec::new();
    for (b, r) in reps.into_iter().enumerate() {
        match r {
            Ok(v) => replicates.push((b, v)),
            Err(e) => failures.push((b, e)),
        }
    }
    if replicates.is_empty() {
        return Err(CounterfactualError::AllReplicationsFailed(failures.first().map(|f| f.1.clone()).unwrap_or_default()));
    }
    let mut results = normalize(point);
    let base = point.profit(Scenario::StatusQuo).expect("status quo always evaluated");
    for (i, res) in results.iter_mut().enumerate() {
        let vals: Vec<f64> = replicates.iter().map(|(_, v)| 100.0 * v[i] / base).collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = if vals.len() > 1 { vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64 } else { 0.0 };
        res.bootstrap_mean = m;
        res.std_dev = var.sqrt();
        res.replications = vals.len();
    }
    Ok(BootstrapOutput { results, replicates, failures })
}

/// Convenience boxing for builders that capture their environment.
pub fn boxed_builder<'a, F>(f: F) -> Box<ModelBuilder<'a>>
where
    F: Fn(&[Session], usize) -> Result<(DecisionModel, Vec<f64>), String> + Sync + 'a,
{
    Box::new(f)
}
