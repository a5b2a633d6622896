//! Cluster-level sessions: validation, vehicle-to-cluster recoding, the
//! synthetic generator and status-quo matrix extraction.

mod truth;

pub use truth::{diagonal_matrix, SyntheticMarket, TruthModel, TruthParams, CALIBRATED_DIAGONAL};

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::ClusterModel;
use crate::dpsolver::Recommender;
use crate::par;
use crate::policy::ChoiceModel;
use crate::rng::{self, tag};
use crate::staterec::{RecAction, RecState};
use crate::REC_SLOTS;

/// A consumer action. Cluster indices are zero-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Search(usize),
    Convert(usize),
    Exit,
}

impl Action {
    pub fn cluster(&self) -> Option<usize> {
        match *self {
            Action::Search(c) | Action::Convert(c) => Some(c),
            Action::Exit => None,
        }
    }

    pub fn is_terminal(&self) -> bool {
        !matches!(self, Action::Search(_))
    }
}

/// One interaction. `recs` holds the three recommended clusters shown with the
/// page on which the action was taken; it is empty for the first click.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub t: usize,
    pub action: Action,
    pub recs: Vec<usize>,
}

impl Event {
    pub fn rec_action(&self) -> Option<RecAction> {
        (self.recs.len() == REC_SLOTS).then(|| RecAction::new([self.recs[0], self.recs[1], self.recs[2]]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Convert(usize),
    Exit,
    /// Still browsing when the data (or the horizon) ended.
    Censored,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub events: Vec<Event>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClickstreamError {
    #[error("session {session}: no events")]
    Empty { session: String },
    #[error("session {session}: expected t = {expected}, found t = {found}")]
    Gap { session: String, expected: usize, found: usize },
    #[error("session {session}: event at t = {t} follows a terminal action")]
    AfterTerminal { session: String, t: usize },
    #[error("session {session}: event at t = {t} carries {found} recommendations (expected {expected})")]
    RecCount { session: String, t: usize, found: usize, expected: usize },
    #[error("session {session}: first event must be a search")]
    FirstNotSearch { session: String },
    #[error("session {session}: cluster {cluster} out of range for K = {k}")]
    ClusterOutOfRange { session: String, cluster: usize, k: usize },
    #[error("session {session}: unknown vehicle {vehicle:?}")]
    UnknownVehicle { session: String, vehicle: String },
}

impl Session {
    /// Builds a session and checks its invariants.
    pub fn new(id: impl Into<String>, events: Vec<Event>, k: Option<usize>) -> Result<Self, ClickstreamError> {
        let s = Session { id: id.into(), events };
        s.validate(k)?;
        Ok(s)
    }

    pub fn validate(&self, k: Option<usize>) -> Result<(), ClickstreamError> {
        let session = || self.id.clone();
        let first = self.events.first().ok_or_else(|| ClickstreamError::Empty { session: session() })?;
        if !matches!(first.action, Action::Search(_)) {
            return Err(ClickstreamError::FirstNotSearch { session: session() });
        }
        let mut ended = false;
        for (i, e) in self.events.iter().enumerate() {
            if e.t != i + 1 {
                return Err(ClickstreamError::Gap { session: session(), expected: i + 1, found: e.t });
            }
            if ended {
                return Err(ClickstreamError::AfterTerminal { session: session(), t: e.t });
            }
            let expected = if e.t == 1 { 0 } else { REC_SLOTS };
            if e.recs.len() != expected {
                return Err(ClickstreamError::RecCount { session: session(), t: e.t, found: e.recs.len(), expected });
            }
            if let Some(k) = k {
                if let Some(&bad) = e.action.cluster().iter().chain(e.recs.iter()).find(|&&c| c >= k) {
                    return Err(ClickstreamError::ClusterOutOfRange { session: session(), cluster: bad, k });
                }
            }
            ended = e.action.is_terminal();
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Number of vehicle pages viewed (search actions).
    pub fn pageviews(&self) -> usize {
        self.events.iter().filter(|e| matches!(e.action, Action::Search(_))).count()
    }

    pub fn terminal(&self) -> Terminal {
        match self.events.last().map(|e| e.action) {
            Some(Action::Convert(c)) => Terminal::Convert(c),
            Some(Action::Exit) => Terminal::Exit,
            _ => Terminal::Censored,
        }
    }

    pub fn first_click(&self) -> Option<usize> {
        match self.events.first()?.action {
            Action::Search(c) => Some(c),
            _ => None,
        }
    }
}

/// Session over vehicle identifiers before clustering.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSession {
    pub id: String,
    pub events: Vec<RawEvent>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEvent {
    pub t: usize,
    pub action: RawAction,
    pub recs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawAction {
    Search(String),
    Convert(String),
    Exit,
}

/// Replaces every vehicle reference by its cluster index.
pub fn recode_to_clusters(raw: &[RawSession], model: &ClusterModel) -> Result<Vec<Session>, ClickstreamError> {
    let lookup = model.lookup();
    raw.iter()
        .map(|s| {
            let find = |v: &String| {
                lookup
                    .get(v)
                    .copied()
                    .ok_or_else(|| ClickstreamError::UnknownVehicle { session: s.id.clone(), vehicle: v.clone() })
            };
            let events = s
                .events
                .iter()
                .map(|e| {
                    let action = match &e.action {
                        RawAction::Search(v) => Action::Search(find(v)?),
                        RawAction::Convert(v) => Action::Convert(find(v)?),
                        RawAction::Exit => Action::Exit,
                    };
                    let recs = e.recs.iter().map(find).collect::<Result<Vec<_>, _>>()?;
                    Ok(Event { t: e.t, action, recs })
                })
                .collect::<Result<Vec<_>, ClickstreamError>>()?;
            Session::new(s.id.clone(), events, Some(model.k))
        })
        .collect()
}

/// Settings for [`generate_synthetic`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub n_sessions: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Distribution of the first click over clusters.
    pub first_click: Vec<f64>,
}

/// Draws sessions from a consumer policy and a recommender.
///
/// The first click is drawn from `first_click`. Afterwards the recommender picks
/// `r` at `Θ_t`, the consumer acts according to `truth(Θ_t ⊕ r)` and a search
/// moves the state to `Θ_{t+1}`. Sessions still browsing at `t = horizon` end
/// censored. Session `i` uses its own random stream, so the output does not
/// depend on scheduling.
pub fn generate_synthetic(truth: &dyn ChoiceModel, rec: &dyn Recommender, cfg: &GenerateConfig) -> Vec<Session> {
    let k = truth.k();
    assert_eq!(cfg.first_click.len(), k, "first-click distribution has wrong length");
    assert!(cfg.horizon >= 1, "horizon must be positive");
    par::map_indexed(cfg.n_sessions, |i| {
        let mut rng = rng::stream(cfg.seed, tag::GENERATE, i as u64);
        let first = rng::sample_index(&mut rng, &cfg.first_click);
        let mut events = vec![Event { t: 1, action: Action::Search(first), recs: Vec::new() }];
        let mut state = RecState::initial(k, first).expect("first click in range");
        let mut probs = vec![0.0; 2 * k + 1];
        while state.t < cfg.horizon {
            let r = rec.recommend(&state, &mut rng);
            truth.predict_into(&state.with_recs(&r), &mut probs);
            let action = crate::policy::action_from_index(rng::sample_index(&mut rng, &probs), k);
            events.push(Event { t: events.len() + 1, action, recs: r.slots().to_vec() });
            match action {
                Action::Search(c) => state = state.transition(c, &r, cfg.horizon).expect("valid transition"),
                _ => break,
            }
        }
        let s = Session { id: format!("s{i:07}"), events };
        debug_assert!(s.validate(Some(k)).is_ok());
        s
    })
}

/// Empirical distribution of first clicks.
pub fn first_click_distribution(sessions: &[Session], k: usize) -> Vec<f64> {
    let mut c = vec![0.0; k];
    for s in sessions {
        if let Some(f) = s.first_click() {
            c[f] += 1.0;
        }
    }
    let n: f64 = c.iter().sum();
    if n == 0.0 {
        return vec![1.0 / k as f64; k];
    }
    c.iter().map(|v| v / n).collect()
}

/// Row-stochastic recommendation matrix conditioned on the cluster viewed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatusQuoMatrix {
    pub rows: Vec<Vec<f64>>,
    /// Rows never observed, filled with `1/K`.
    pub flagged: Vec<usize>,
    /// Recommendation pages observed per row.
    pub support: Vec<u64>,
}

/// Counts, for each viewed cluster `i`, how often each cluster was among the
/// three recommendations shown next, normalised by `3 ×` the number of such
/// pages.
pub fn extract_status_quo_matrix(sessions: &[Session], k: usize) -> StatusQuoMatrix {
    let mut counts = vec![vec![0u64; k]; k];
    let mut support = vec![0u64; k];
    for s in sessions {
        let mut viewing: Option<usize> = None;
        for e in &s.events {
            if let (Some(v), true) = (viewing, e.recs.len() == REC_SLOTS) {
                support[v] += 1;
                for &r in &e.recs {
                    counts[v][r] += 1;
                }
            }
            viewing = match e.action {
                Action::Search(c) => Some(c),
                _ => None,
            };
        }
    }
    let mut flagged = Vec::new();
    let rows = (0..k)
        .map(|i| {
            if support[i] == 0 {
                flagged.push(i);
                vec![1.0 / k as f64; k]
            } else {
                let d = (REC_SLOTS as u64 * support[i]) as f64;
                counts[i].iter().map(|&c| c as f64 / d).collect()
            }
        })
        .collect();
    StatusQuoMatrix { rows, flagged, support }
}

/// Descriptive statistics of a set of sessions (pageviews and outcomes).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionMoments {
    pub n_sessions: usize,
    pub mean_pageviews: f64,
    pub sd_pageviews: f64,
    pub median_pageviews: f64,
    pub conversion_rate: f64,
    pub exit_rate: f64,
    pub censored_rate: f64,
    /// Share of all searches landing on each cluster.
    pub search_share: Vec<f64>,
    /// Share of conversions going to each cluster.
    pub conversion_share: Vec<f64>,
}

pub fn moments(sessions: &[Session], k: usize) -> SessionMoments {
    let n = sessions.len();
    let nf = n.max(1) as f64;
    let mut pv: Vec<usize> = sessions.iter().map(Session::pageviews).collect();
    let mean = pv.iter().sum::<usize>() as f64 / nf;
    let var = pv.iter().map(|&p| (p as f64 - mean).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
    pv.sort_unstable();
    let median = match n {
        0 => 0.0,
        _ if n % 2 == 1 => pv[n / 2] as f64,
        _ => (pv[n / 2 - 1] + pv[n / 2]) as f64 / 2.0,
    };
    let mut searches = vec![0.0; k];
    let mut conv = vec![0.0; k];
    let mut terminal: BTreeMap<u8, usize> = BTreeMap::new();
    for s in sessions {
        for e in &s.events {
            if let Action::Search(c) = e.action {
                searches[c] += 1.0;
            }
        }
        let key = match s.terminal() {
            Terminal::Convert(c) => {
                conv[c] += 1.0;
                0
            }
            Terminal::Exit => 1,
            Terminal::Censored => 2,
        };
        *terminal.entry(key).or_default() += 1;
    }
    let share = |v: Vec<f64>| {
        let t: f64 = v.iter().sum();
        v.into_iter().map(|x| if t > 0.0 { x / t } else { 0.0 }).collect()
    };
    let rate = |key: u8| terminal.get(&key).copied().unwrap_or(0) as f64 / nf;
    SessionMoments {
        n_sessions: n,
        mean_pageviews: mean,
        sd_pageviews: var.sqrt(),
        median_pageviews: median,
        conversion_rate: rate(0),
        exit_rate: rate(1),
        censored_rate: rate(2),
        search_share: share(searches),
        conversion_share: share(conv),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(t: usize, action: Action, recs: &[usize]) -> Event {
        Event { t, action, recs: recs.to_vec() }
    }

    #[test]
    fn three_searches_then_exit() {
        let s = Session::new(
            "a",
            vec![
                ev(1, Action::Search(0), &[]),
                ev(2, Action::Search(1), &[0, 1, 1]),
                ev(3, Action::Search(1), &[1, 1, 2]),
                ev(4, Action::Exit, &[0, 0, 0]),
            ],
            Some(3),
        )
        .unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.pageviews(), 3);
        assert_eq!(s.terminal(), Terminal::Exit);
    }

    #[test]
    fn invalid_sessions() {
        let after = Session::new("x", vec![ev(1, Action::Search(0), &[]), ev(2, Action::Convert(0), &[0, 0, 0]), ev(3, Action::Exit, &[0, 0, 0])], None);
        assert_eq!(after.unwrap_err(), ClickstreamError::AfterTerminal { session: "x".into(), t: 3 });
        let gap = Session::new("g", vec![ev(1, Action::Search(0), &[]), ev(3, Action::Exit, &[0, 0, 0])], None);
        assert!(matches!(gap.unwrap_err(), ClickstreamError::Gap { expected: 2, found: 3, .. }));
        let recs = Session::new("r", vec![ev(1, Action::Search(0), &[]), ev(2, Action::Exit, &[0, 0])], None);
        assert!(matches!(recs.unwrap_err(), ClickstreamError::RecCount { found: 2, .. }));
        let first = Session::new("f", vec![ev(1, Action::Search(0), &[1, 1, 1])], None);
        assert!(matches!(first.unwrap_err(), ClickstreamError::RecCount { t: 1, .. }));
        let range = Session::new("c", vec![ev(1, Action::Search(4), &[])], Some(3));
        assert!(matches!(range.unwrap_err(), ClickstreamError::ClusterOutOfRange { cluster: 4, .. }));
    }

    #[test]
    fn status_quo_counting() {
        let s = Session::new("a", vec![ev(1, Action::Search(0), &[]), ev(2, Action::Exit, &[0, 1, 1])], None).unwrap();
        let m = extract_status_quo_matrix(&[s], 3);
        assert_eq!(m.rows[0], vec![1.0 / 3.0, 2.0 / 3.0, 0.0]);
        assert_eq!(m.flagged, vec![1, 2]);
        for row in &m.rows {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn moments_of_small_sample() {
        let a = Session::new("a", vec![ev(1, Action::Search(0), &[]), ev(2, Action::Convert(1), &[1, 1, 1])], None).unwrap();
        let b = Session::new("b", vec![ev(1, Action::Search(1), &[]), ev(2, Action::Search(1), &[0, 0, 0]), ev(3, Action::Exit, &[0, 0, 0])], None).unwrap();
        let m = moments(&[a, b], 2);
        assert_eq!(m.mean_pageviews, 1.5);
        assert_eq!(m.conversion_rate, 0.5);
        assert_eq!(m.exit_rate, 0.5);
        assert_eq!(m.conversion_share, vec![0.0, 1.0]);
        assert_eq!(m.search_share, vec![1.0 / 3.0, 2.0 / 3.0]);
    }
}
