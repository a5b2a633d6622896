// Ground-truth consumer used to generate synthetic clickstreams: a multinomial
// logit over hand-set utilities of (t, a, A, R).

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::policy::{ChoiceModel, ConsumerPolicy, FeatureLayout, LogitModel, Method, PolicyMeta, PolicyModel};
use crate::rng;
use crate::staterec::RecState;

/// Utility parameters. With `match_bonus == 0` the model is an ordinary
/// multinomial logit on the policy features (see [`TruthModel::to_policy`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthParams {
    pub search_base: Vec<f64>,
    pub convert_base: Vec<f64>,
    /// Search utility for staying in the cluster being viewed.
    pub persist: f64,
    /// Search utility per unit of recommendation share of the cluster.
    pub rec_pull: f64,
    /// Search utility per unit of view share of the cluster.
    pub view_pull: f64,
    pub convert_view: f64,
    pub convert_history: f64,
    pub convert_rec: f64,
    /// Utility shift of searching / converting per unit of `t / T`.
    pub search_time: f64,
    pub convert_time: f64,
    /// Exit utility per unit of `t / T`.
    pub exit_time: f64,
    /// Exit utility reduction per unit of recommendation share of the cluster
    /// being viewed.
    pub match_bonus: f64,
}

impl TruthParams {
    /// Hand-tuned parameters producing browsing moments close to the reference
    /// data (about 7 pageviews per session, 3% conversion).
    pub fn calibrated(k: usize) -> Self {
        let spread = |lo: f64, hi: f64| -> Vec<f64> {
            (0..k).map(|i| if k == 1 { lo } else { lo + (hi - lo) * i as f64 / (k - 1) as f64 }).collect()
        };
        TruthParams {
            search_base: spread(-1.3, -1.6),
            convert_base: spread(-6.3, -6.6),
            persist: 0.3,
            rec_pull: 2.5,
            view_pull: 0.3,
            convert_view: 0.8,
            convert_history: 0.6,
            convert_rec: 0.6,
            search_time: 0.0,
            convert_time: 0.5,
            exit_time: 0.3,
            match_bonus: 1.0,
        }
    }

    /// Random linear-in-features parameters for estimator recovery checks.
    pub fn random_linear(k: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, rng::tag::GENERATE, u64::MAX);
        let mut u = |lo: f64, hi: f64| lo + (hi - lo) * r.gen::<f64>();
        let search_base = (0..k).map(|_| u(0.3, 1.0)).collect();
        let convert_base = (0..k).map(|_| u(-3.5, -2.5)).collect();
        TruthParams {
            search_base,
            convert_base,
            persist: u(0.5, 1.5),
            rec_pull: u(0.5, 1.5),
            view_pull: u(0.0, 1.0),
            convert_view: u(0.0, 1.0),
            convert_history: u(0.0, 1.0),
            convert_rec: u(0.0, 1.0),
            search_time: u(-0.5, 0.5),
            convert_time: u(-0.5, 0.5),
            exit_time: u(0.0, 1.0),
            match_bonus: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthModel {
    pub params: TruthParams,
    pub horizon: usize,
}

impl TruthModel {
    pub fn new(params: TruthParams, horizon: usize) -> Self {
        assert_eq!(params.search_base.len(), params.convert_base.len(), "utility vectors differ in length");
        TruthModel { params, horizon }
    }

    pub fn utilities(&self, state: &RecState) -> Vec<f64> {
        let p = &self.params;
        let k = self.k();
        let tau = state.t as f64 / self.horizon as f64;
        let views = state.views.to_f64();
        let recs = state.recs.to_f64();
        let mut u = vec![0.0; 2 * k + 1];
        for c in 0..k {
            let here = if c == state.last { 1.0 } else { 0.0 };
            u[c] = p.search_base[c] + p.persist * here + p.rec_pull * recs[c] + p.view_pull * views[c] + p.search_time * tau;
            u[k + c] = p.convert_base[c]
                + p.convert_view * here
                + p.convert_history * views[c]
                + p.convert_rec * recs[c]
                + p.convert_time * tau;
        }
        u[2 * k] = p.exit_time * tau - p.match_bonus * recs[state.last];
        u
    }

    /// The same model as a fitted-policy object, when it is linear in the
    /// policy features.
    pub fn to_policy(&self) -> Option<ConsumerPolicy> {
        let p = &self.params;
        if p.match_bonus != 0.0 {
            return None;
        }
        let k = self.k();
        let l = FeatureLayout { k };
        let mut m = LogitModel::zeros(k, l.dim());
        for c in 0..k {
            let (s, v) = (c, k + c);
            m.set_intercept(s, p.search_base[c]);
            m.set_slope(s, l.last(c), p.persist);
            m.set_slope(s, l.recs(c), p.rec_pull);
            m.set_slope(s, l.views(c), p.view_pull);
            m.set_slope(s, l.t(), p.search_time - p.exit_time);
            m.set_intercept(v, p.convert_base[c]);
            m.set_slope(v, l.last(c), p.convert_view);
            m.set_slope(v, l.views(c), p.convert_history);
            m.set_slope(v, l.recs(c), p.convert_rec);
            m.set_slope(v, l.t(), p.convert_time - p.exit_time);
        }
        Some(ConsumerPolicy { k, horizon: self.horizon, method: Method::Logit, model: PolicyModel::Logit(m), meta: PolicyMeta::default() })
    }
}

impl ChoiceModel for TruthModel {
    fn k(&self) -> usize {
        self.params.search_base.len()
    }

    fn predict_into(&self, state: &RecState, out: &mut [f64]) {
        linalg::softmax_into(&self.utilities(state), out);
    }
}

/// Everything needed to generate a synthetic market: ground truth, first-click
/// distribution, margins and the status-quo recommendation matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMarket {
    pub truth: TruthModel,
    pub first_click: Vec<f64>,
    pub margins: Vec<f64>,
    pub status_quo: Vec<Vec<f64>>,
}

/// Diagonal weight of the calibrated status-quo matrix.
pub const CALIBRATED_DIAGONAL: f64 = 0.9;

impl SyntheticMarket {
    pub fn calibrated(k: usize, horizon: usize) -> Self {
        let first_click = if k == 4 {
            vec![0.35, 0.3, 0.2, 0.15]
        } else {
            let w: Vec<f64> = (0..k).map(|i| 1.0 / (1.0 + 0.25 * i as f64)).collect();
            let s: f64 = w.iter().sum();
            w.iter().map(|x| x / s).collect()
        };
        let margins = if k == 4 {
            vec![1500.0, 2200.0, 2800.0, 3600.0]
        } else {
            (0..k).map(|i| if k == 1 { 2500.0 } else { 1500.0 + 2100.0 * i as f64 / (k - 1) as f64 }).collect()
        };
        SyntheticMarket {
            truth: TruthModel::new(TruthParams::calibrated(k), horizon),
            first_click,
            margins,
            status_quo: diagonal_matrix(k, CALIBRATED_DIAGONAL),
        }
    }
}

/// `K × K` matrix with `diag` on the diagonal and the rest spread evenly.
pub fn diagonal_matrix(k: usize, diag: f64) -> Vec<Vec<f64>> {
    (0..k)
        .map(|i| (0..k).map(|j| if k == 1 { 1.0 } else if i == j { diag } else { (1.0 - diag) / (k - 1) as f64 }).collect())
        .collect()
}
