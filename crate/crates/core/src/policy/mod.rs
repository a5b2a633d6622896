//! Consumer policy `Pr(y_t = j | Θ_t)` over the `2K + 1` actions
//! (search cluster k, convert cluster k, exit): features, estimators, fit
//! metrics and model selection.

mod logit;
mod metrics;
mod select;
mod tree;

pub use logit::{fit_multinomial_logit, penalized_gradient, penalized_loglik, LogitConfig, LogitFit, LogitModel};
pub use metrics::{evaluate, FitReport, PROB_FLOOR};
pub use select::{select_model, GridCell};
pub use tree::{fit_tree_ensemble, EnsembleMode, TreeEnsemble, TreeParams};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clickstream::{Action, Session};
use crate::rng::{self, tag};
use crate::staterec::{FreqVector, RecAction, RecState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("multinomial logit did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("session {session}: {reason}")]
    BadSession { session: String, reason: String },
    #[error("holdout fraction must lie in (0, 1), got {0}")]
    HoldoutFraction(f64),
}

/// Number of consumer actions for `k` clusters.
pub const fn n_actions(k: usize) -> usize {
    2 * k + 1
}

/// Class index of an action: searches first, then conversions, exit last.
pub fn action_index(action: Action, k: usize) -> usize {
    match action {
        Action::Search(c) => c,
        Action::Convert(c) => k + c,
        Action::Exit => 2 * k,
    }
}

pub fn action_from_index(index: usize, k: usize) -> Action {
    if index < k {
        Action::Search(index)
    } else if index < 2 * k {
        Action::Convert(index - k)
    } else {
        Action::Exit
    }
}

/// Positions of the state features: `t / T`, one-hot last click, view
/// frequencies plus EMPTY flag, recommendation frequencies plus EMPTY flag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub k: usize,
}

impl FeatureLayout {
    pub fn dim(&self) -> usize {
        3 * self.k + 3
    }
    pub fn t(&self) -> usize {
        0
    }
    pub fn last(&self, c: usize) -> usize {
        1 + c
    }
    pub fn views(&self, c: usize) -> usize {
        1 + self.k + c
    }
    pub fn views_empty(&self) -> usize {
        1 + 2 * self.k
    }
    pub fn recs(&self, c: usize) -> usize {
        2 + 2 * self.k + c
    }
    pub fn recs_empty(&self) -> usize {
        2 + 3 * self.k
    }
}

fn push_freq(out: &mut Vec<f64>, f: &FreqVector) {
    out.extend(f.to_f64());
    out.push(if f.is_empty() { 1.0 } else { 0.0 });
}

/// Feature vector of a state; `t` is scaled by the horizon.
pub fn featurize(state: &RecState, horizon: usize) -> Vec<f64> {
    let k = state.k();
    let mut out = Vec::with_capacity(3 * k + 3);
    out.push(state.t as f64 / horizon as f64);
    out.extend((0..k).map(|c| if c == state.last { 1.0 } else { 0.0 }));
    push_freq(&mut out, &state.views);
    push_freq(&mut out, &state.recs);
    out
}

/// Anything that maps a state to a distribution over the `2K + 1` actions.
pub trait ChoiceModel: Sync + Send {
    fn k(&self) -> usize;

    /// Writes the action probabilities for `state` into `out` (length `2K + 1`).
    fn predict_into(&self, state: &RecState, out: &mut [f64]);

    fn predict(&self, state: &RecState) -> Vec<f64> {
        let mut out = vec![0.0; n_actions(self.k())];
        self.predict_into(state, &mut out);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Logit,
    Forest,
    Boost,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Logit => "logit",
            Method::Forest => "forest",
            Method::Boost => "boost",
        }
    }
}

impl core::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logit" | "mnl" => Ok(Method::Logit),
            "forest" | "rf" | "bagging" => Ok(Method::Forest),
            "boost" | "boosting" | "gbm" => Ok(Method::Boost),
            other => Err(alloc::format!("unknown method {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PolicyModel {
    Logit(LogitModel),
    Trees(TreeEnsemble),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyMeta {
    pub n_train: usize,
    pub iterations: usize,
    pub grad_norm: Option<f64>,
    pub warnings: Vec<String>,
}

/// Estimated (or hand-specified) consumer policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsumerPolicy {
    pub k: usize,
    pub horizon: usize,
    pub method: Method,
    pub model: PolicyModel,
    pub meta: PolicyMeta,
}

impl ConsumerPolicy {
    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout { k: self.k }
    }

    pub fn predict_features(&self, x: &[f64], out: &mut [f64]) {
        match &self.model {
            PolicyModel::Logit(m) => m.predict_features(x, out),
            PolicyModel::Trees(m) => m.predict_features(x, out),
        }
    }
}

impl ChoiceModel for ConsumerPolicy {
    fn k(&self) -> usize {
        self.k
    }

    fn predict_into(&self, state: &RecState, out: &mut [f64]) {
        let x = featurize(state, self.horizon);
        self.predict_features(&x, out);
    }
}

/// Training/evaluation rows: features, observed class, owning session.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub n_classes: usize,
    pub x: Vec<f64>,
    pub y: Vec<usize>,
    pub session: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &y in &self.y {
            c[y] += 1;
        }
        c
    }

    pub fn push(&mut self, features: &[f64], class: usize, session: usize) {
        debug_assert_eq!(features.len(), self.dim);
        self.x.extend_from_slice(features);
        self.y.push(class);
        self.session.push(session);
    }

    /// Rows whose session index is in `sessions` (sorted).
    pub fn subset(&self, keep: impl Fn(usize) -> bool) -> Dataset {
        let mut out = Dataset { dim: self.dim, n_classes: self.n_classes, ..Default::default() };
        for i in 0..self.len() {
            if keep(self.session[i]) {
                out.push(self.row(i), self.y[i], self.session[i]);
            }
        }
        out
    }
}

/// Replays each session into `(decision state, observed action)` pairs.
///
/// The decision before event `s >= 2` is taken in the post-recommendation state
/// built from the click at `s - 1`, the earlier clicks and every recommendation
/// shown up to and including event `s`.
pub fn observations(sessions: &[Session], k: usize, horizon: usize) -> Result<Vec<(RecState, usize, usize)>, PolicyError> {
    let mut out = Vec::new();
    for (si, s) in sessions.iter().enumerate() {
        let bad = |reason: &str| PolicyError::BadSession { session: s.id.clone(), reason: reason.into() };
        let mut state: Option<RecState> = None;
        for e in &s.events {
            match (&state, e.action) {
                (None, Action::Search(c)) => {
                    state = Some(RecState::initial(k, c).map_err(|err| bad(&alloc::format!("{err}")))?);
                }
                (None, _) => break,
                (Some(cur), action) => {
                    if cur.t >= horizon {
                        break;
                    }
                    let rec = e.rec_action().ok_or_else(|| bad("missing recommendations"))?;
                    out.push((cur.with_recs(&rec), action_index(action, k), si));
                    match action {
                        Action::Search(c) => {
                            state = Some(cur.transition(c, &rec, horizon).map_err(|err| bad(&alloc::format!("{err}")))?);
                        }
                        _ => break,
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Feature matrix for a set of sessions.
pub fn dataset(sessions: &[Session], k: usize, horizon: usize) -> Result<Dataset, PolicyError> {
    let layout = FeatureLayout { k };
    let mut d = Dataset { dim: layout.dim(), n_classes: n_actions(k), ..Default::default() };
    for (state, class, si) in observations(sessions, k, horizon)? {
        d.push(&featurize(&state, horizon), class, si);
    }
    Ok(d)
}

/// Session-level holdout split: returns `(train, holdout)` session indices,
/// each sorted.
pub fn split_sessions(n_sessions: usize, holdout: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), PolicyError> {
    if !(holdout > 0.0 && holdout < 1.0) {
        return Err(PolicyError::HoldoutFraction(holdout));
    }
    let mut idx: Vec<usize> = (0..n_sessions).collect();
    idx.shuffle(&mut rng::stream(seed, tag::SPLIT, 0));
    let n_hold = num_traits::Float::round(holdout * n_sessions as f64) as usize;
    let mut hold = idx[..n_hold].to_vec();
    let mut train = idx[n_hold..].to_vec();
    hold.sort_unstable();
    train.sort_unstable();
    Ok((train, hold))
}

/// Hyperparameters of the three estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub logit: LogitConfig,
    pub forest: TreeParams,
    pub boost: TreeParams,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig { logit: LogitConfig::default(), forest: TreeParams::forest(), boost: TreeParams::boost() }
    }
}

/// Fits `method` on `train` and wraps the result as a [`ConsumerPolicy`].
pub fn fit_policy(train: &Dataset, k: usize, horizon: usize, method: Method, cfg: &EstimatorConfig, seed: u64) -> Result<ConsumerPolicy, PolicyError> {
    let expected = FeatureLayout { k }.dim();
    if train.dim != expected {
        return Err(PolicyError::Dimension { expected, got: train.dim });
    }
    let mut meta = PolicyMeta { n_train: train.len(), ..Default::default() };
    let model = match method {
        Method::Logit => {
            let fit = fit_multinomial_logit(train, &cfg.logit)?;
            meta.iterations = fit.iterations;
            meta.grad_norm = Some(fit.grad_norm);
            meta.warnings = fit.warnings;
            PolicyModel::Logit(fit.model)
        }
        Method::Forest | Method::Boost => {
            let params = if method == Method::Forest { &cfg.forest } else { &cfg.boost };
            let e = fit_tree_ensemble(train, params, seed)?;
            meta.iterations = e.n_trees();
            for c in (0..train.n_classes).filter(|c| !e.active.contains(c)) {
                meta.warnings.push(alloc::format!("class {c} absent from training data; predicted with probability 0"));
            }
            PolicyModel::Trees(e)
        }
    };
    Ok(ConsumerPolicy { k, horizon, method, model, meta })
}

/// Convenience for building a post-recommendation state.
pub fn decision_state(state: &RecState, rec: &RecAction) -> RecState {
    state.with_recs(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn featurize_cold_start() {
        let s = RecState::initial(3, 1).unwrap();
        let x = featurize(&s, 22);
        let l = FeatureLayout { k: 3 };
        assert_eq!(x.len(), 1 + 3 + 4 + 4);
        assert_eq!(x.len(), l.dim());
        assert_eq!(x[l.t()], 1.0 / 22.0);
        assert_eq!(x[l.last(1)], 1.0);
        assert_eq!(x[l.last(0)], 0.0);
        assert_eq!(x[l.views_empty()], 1.0);
        assert_eq!(x[l.recs_empty()], 1.0);
        assert!((0..3).all(|c| x[l.views(c)] == 0.0 && x[l.recs(c)] == 0.0));
    }

    #[test]
    fn featurize_differs_only_in_t() {
        let s = RecState::initial(3, 1).unwrap();
        let mut s2 = s.clone();
        s2.t = 5;
        let (a, b) = (featurize(&s, 22), featurize(&s2, 22));
        let diff: Vec<usize> = (0..a.len()).filter(|&i| a[i] != b[i]).collect();
        assert_eq!(diff, vec![0]);
    }

    #[test]
    fn action_index_roundtrip() {
        for i in 0..n_actions(4) {
            assert_eq!(action_index(action_from_index(i, 4), 4), i);
        }
    }

    #[test]
    fn split_is_disjoint_and_covering() {
        let (tr, ho) = split_sessions(100, 0.4, 3).unwrap();
        assert_eq!(ho.len(), 40);
        assert_eq!(tr.len(), 60);
        assert!(tr.iter().all(|i| ho.binary_search(i).is_err()));
        assert!(split_sessions(10, 1.0, 0).is_err());
    }
}
