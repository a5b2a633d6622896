//! Synthetic inputs for the pipeline: a catalog drawn from segment profiles,
//! a vehicle-level clickstream generated from the calibrated ground truth
//! under the status-quo recommender, and the truth itself.

use std::path::{Path, PathBuf};

use searchrec_core::catalog::{reference_profiles, synthetic_catalog};
use searchrec_core::clickstream::{generate_synthetic, GenerateConfig, RawAction, RawEvent, RawSession, SyntheticMarket};
use searchrec_core::rng::{self, tag};
use searchrec_core::{Action, RecPolicy, Session};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::formats::catalog::{write_catalog, ColumnMapping};
use crate::formats::clickstream::{write_raw_sessions, write_sessions};
use crate::formats::write_json;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateOptions {
    pub seed: u64,
    pub sessions: usize,
    pub horizon: usize,
    /// Number of vehicle segments, which is also the number of clusters of the
    /// ground truth (2..=8).
    pub segments: usize,
    /// Total catalog size; the reference composition when absent.
    pub vehicles: Option<usize>,
    /// Standard deviation of the normalised log features around the segment means.
    pub spread: f64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions { seed: 0, sessions: 20_000, horizon: searchrec_core::DEFAULT_HORIZON, segments: 4, vehicles: None, spread: 0.05 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Truth {
    pub options: GenerateOptions,
    pub market: SyntheticMarket,
    /// `(vehicle_id, segment)` with one-based segments.
    pub segment_of: Vec<(String, usize)>,
}

pub struct Generated {
    pub catalog: PathBuf,
    pub mapping: PathBuf,
    pub clickstream: PathBuf,
    pub segment_sessions: PathBuf,
    pub truth: PathBuf,
    pub config: PathBuf,
}

/// Maps segment-level sessions onto concrete vehicles; session `i` draws from
/// its own stream.
pub fn to_vehicles(sessions: &[Session], members: &[Vec<String>], seed: u64) -> Vec<RawSession> {
    sessions
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut r = rng::stream(seed, tag::VEHICLE, i as u64);
            let mut pick = |c: usize| {
                let m = &members[c];
                m[rand::Rng::gen_range(&mut r, 0..m.len())].clone()
            };
            let events = s
                .events
                .iter()
                .map(|e| {
                    let action = match e.action {
                        Action::Search(c) => RawAction::Search(pick(c)),
                        Action::Convert(c) => RawAction::Convert(pick(c)),
                        Action::Exit => RawAction::Exit,
                    };
                    let recs = e.recs.iter().map(|&c| pick(c)).collect();
                    RawEvent { t: e.t, action, recs }
                })
                .collect();
            RawSession { id: s.id.clone(), events }
        })
        .collect()
}

pub fn generate(opts: &GenerateOptions, out: &Path) -> Result<Generated> {
    if !(2..=8).contains(&opts.segments) {
        return Err(Error::Validation(format!("segments must lie in 2..=8, got {}", opts.segments)));
    }
    if opts.horizon < 1 || opts.sessions == 0 {
        return Err(Error::Validation("horizon and sessions must be positive".into()));
    }
    if !(opts.spread >= 0.0 && opts.spread.is_finite()) {
        return Err(Error::Validation("spread must be non-negative".into()));
    }
    let mut profiles = reference_profiles();
    profiles.truncate(opts.segments);
    if let Some(n) = opts.vehicles {
        if n < opts.segments.max(2) {
            return Err(Error::Validation(format!("need at least {} vehicles", opts.segments.max(2))));
        }
        let total: usize = profiles.iter().map(|p| p.count).sum();
        for p in &mut profiles {
            p.count = ((p.count * n) as f64 / total as f64).round().max(1.0) as usize;
        }
    }
    let (catalog, labels) = synthetic_catalog(&profiles, opts.spread, opts.seed);
    let mut members = vec![Vec::new(); opts.segments];
    for (r, &l) in catalog.records().iter().zip(&labels) {
        members[l].push(r.vehicle_id.clone());
    }
    let market = SyntheticMarket::calibrated(opts.segments, opts.horizon);
    let sq = RecPolicy::StaticMatrix { rows: market.status_quo.clone() };
    let gen = GenerateConfig { n_sessions: opts.sessions, horizon: opts.horizon, seed: opts.seed, first_click: market.first_click.clone() };
    let sessions = generate_synthetic(&market.truth, &sq, &gen);
    let raw = to_vehicles(&sessions, &members, opts.seed);
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let out = &out.canonicalize().map_err(|e| Error::io(out, e))?;

    let g = Generated {
        catalog: out.join("catalog.csv"),
        mapping: out.join("mapping.json"),
        clickstream: out.join("clickstream.jsonl"),
        segment_sessions: out.join("segment_sessions.jsonl"),
        truth: out.join("truth.json"),
        config: out.join("config.json"),
    };
    write_catalog(&g.catalog, &catalog)?;
    write_json(&g.mapping, &ColumnMapping::default())?;
    write_raw_sessions(&g.clickstream, &raw)?;
    write_sessions(&g.segment_sessions, &sessions)?;
    let segment_of = catalog.records().iter().zip(&labels).map(|(r, &l)| (r.vehicle_id.clone(), l + 1)).collect();
    write_json(&g.truth, &Truth { options: opts.clone(), market, segment_of })?;
    let mut cfg = RunConfig::default();
    cfg.paths.catalog = Some(g.catalog.clone());
    cfg.paths.mapping = Some(g.mapping.clone());
    cfg.paths.clickstream = Some(g.clickstream.clone());
    cfg.dp.horizon = opts.horizon;
    // silhouette tends to split segments along categorical levels into more
    // clusters than the decision table can hold; estimate at the planted K
    cfg.clustering.k_min = cfg.clustering.k_min.min(opts.segments);
    cfg.estimation.k_candidates = vec![opts.segments];
    cfg.seed = Some(opts.seed);
    write_json(&g.config, &cfg)?;
    Ok(g)
}
