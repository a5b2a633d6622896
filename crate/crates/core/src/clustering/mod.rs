//! Ward-initialised k-means with silhouette-based choice of K.

mod kmeans;
mod silhouette;
mod ward;

pub use kmeans::{kmeans, KMeansFit};
pub use silhouette::silhouette;
pub use ward::{Dendrogram, Merge};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::rng::{self, tag};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("cannot form {k} clusters from {n} points")]
    TooFewPoints { k: usize, n: usize },
    #[error("k must be at least 2, got {0}")]
    KTooSmall(usize),
    #[error("initial allocation covers {got} points, expected {expected}")]
    InitLength { expected: usize, got: usize },
    #[error("label {label} out of range for k = {k}")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("silhouette needs at least two clusters")]
    SingleCluster,
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("empty K range")]
    EmptyRange,
    #[error("vehicle ids ({ids}) and points ({points}) differ in length")]
    IdMismatch { ids: usize, points: usize },
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    num_traits::Float::sqrt(sq_dist(a, b))
}

/// Index of the nearest centroid; ties go to the lowest index.
pub fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(p, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Ward initialisation cut at `k` clusters.
pub fn ward_init(points: &[Vec<f64>], k: usize) -> Result<Vec<usize>, ClusterError> {
    if k < 2 {
        return Err(ClusterError::KTooSmall(k));
    }
    if points.len() < k {
        return Err(ClusterError::TooFewPoints { k, n: points.len() });
    }
    Ok(Dendrogram::ward(points).cut(k))
}

/// A fitted partition for one K. Cluster labels are zero-based internally.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub vehicle_ids: Vec<String>,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub silhouette: f64,
    pub within_ss: f64,
    pub ss_history: Vec<f64>,
    pub iterations: usize,
}

impl ClusterModel {
    pub fn lookup(&self) -> BTreeMap<String, usize> {
        self.vehicle_ids.iter().cloned().zip(self.assignments.iter().copied()).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = alloc::vec![0; self.k];
        for &a in &self.assignments {
            s[a] += 1;
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Run the Ward stage on at most this many points; the rest join the
    /// nearest Ward centroid.
    pub ward_max_points: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { k_min: 3, k_max: 10, max_iter: 300, tol: 1e-10, ward_max_points: None }
    }
}

fn subsample_init(points: &[Vec<f64>], ks: &[usize], max_points: Option<usize>, seed: u64) -> Vec<Vec<usize>> {
    let n = points.len();
    match max_points {
        Some(m) if m < n => {
            let mut idx: Vec<usize> = (0..n).collect();
            let mut rng = rng::stream(seed, tag::CLUSTER, 0);
            idx.shuffle(&mut rng);
            idx.truncate(m);
            idx.sort_unstable();
            let sub: Vec<Vec<f64>> = idx.iter().map(|&i| points[i].clone()).collect();
            let tree = Dendrogram::ward(&sub);
            ks.iter()
                .map(|&k| {
                    let labels = tree.cut(k);
                    let mut c = alloc::vec![alloc::vec![0.0; points[0].len()]; k];
                    let mut cnt = alloc::vec![0usize; k];
                    for (p, &l) in sub.iter().zip(&labels) {
                        cnt[l] += 1;
                        c[l].iter_mut().zip(p).for_each(|(a, b)| *a += b);
                    }
                    c.iter_mut().zip(&cnt).for_each(|(v, &m)| v.iter_mut().for_each(|x| *x /= m as f64));
                    points.iter().map(|p| nearest(p, &c)).collect()
                })
                .collect()
        }
        _ => {
            let tree = Dendrogram::ward(points);
            ks.iter().map(|&k| tree.cut(k)).collect()
        }
    }
}

/// Ward → k-means → silhouette for one K.
pub fn fit_k(points: &[Vec<f64>], ids: &[String], k: usize, cfg: &SweepConfig) -> Result<ClusterModel, ClusterError> {
    let init = ward_init(points, k)?;
    finish(points, ids, k, &init, cfg)
}

fn finish(points: &[Vec<f64>], ids: &[String], k: usize, init: &[usize], cfg: &SweepConfig) -> Result<ClusterModel, ClusterError> {
    let fit = kmeans(points, init, k, cfg.max_iter, cfg.tol)?;
    let silhouette = silhouette(points, &fit.assignments)?;
    Ok(ClusterModel {
        k,
        vehicle_ids: ids.to_vec(),
        assignments: fit.assignments,
        centroids: fit.centroids,
        silhouette,
        within_ss: fit.within_ss,
        ss_history: fit.ss_history,
        iterations: fit.iterations,
    })
}

/// One model per K in `k_min..=k_max`. The Ward tree is built once and cut at
/// every K; the per-K k-means runs are independent.
pub fn sweep(points: &[Vec<f64>], ids: &[String], cfg: &SweepConfig, seed: u64) -> Result<Vec<ClusterModel>, ClusterError> {
    if cfg.k_min > cfg.k_max {
        return Err(ClusterError::EmptyRange);
    }
    if ids.len() != points.len() {
        return Err(ClusterError::IdMismatch { ids: ids.len(), points: points.len() });
    }
    if cfg.k_min < 2 {
        return Err(ClusterError::KTooSmall(cfg.k_min));
    }
    if points.len() < cfg.k_max {
        return Err(ClusterError::TooFewPoints { k: cfg.k_max, n: points.len() });
    }
    let ks: Vec<usize> = (cfg.k_min..=cfg.k_max).collect();
    let inits = subsample_init(points, &ks, cfg.ward_max_points, seed);
    par::map_indexed(ks.len(), |i| finish(points, ids, ks[i], &inits[i], cfg))
        .into_iter()
        .collect()
}

/// K with the largest silhouette (first on ties).
pub fn best_by_silhouette(models: &[ClusterModel]) -> Option<&ClusterModel> {
    models.iter().fold(None, |best: Option<&ClusterModel>, m| match best {
        Some(b) if b.silhouette >= m.silhouette => Some(b),
        _ => Some(m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn two_points_two_clusters_are_singletons() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert_eq!(ward_init(&pts, 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn ward_groups_near_pairs() {
        let pts = vec![vec![0.0, 0.0], vec![10.0, 10.0], vec![0.1, 0.0], vec![10.0, 10.2]];
        assert_eq!(ward_init(&pts, 2).unwrap(), vec![0, 1, 0, 1]);
        assert!(ward_init(&pts, 5).is_err());
        assert!(ward_init(&pts, 1).is_err());
    }

    #[test]
    fn kmeans_fixpoint_in_one_iteration() {
        let pts = vec![vec![0.0], vec![0.2], vec![5.0], vec![5.2]];
        let fit = kmeans(&pts, &[0, 0, 1, 1], 2, 50, 1e-12).unwrap();
        assert_eq!(fit.iterations, 1);
        assert!(fit.converged);
        assert_eq!(fit.assignments, vec![0, 0, 1, 1]);
    }

    #[test]
    fn kmeans_repairs_empty_clusters() {
        let pts = vec![vec![0.0], vec![1.0], vec![9.0], vec![10.0]];
        let fit = kmeans(&pts, &[0, 0, 0, 0], 2, 50, 1e-12).unwrap();
        let mut sizes = [0; 2];
        fit.assignments.iter().for_each(|&a| sizes[a] += 1);
        assert!(sizes.iter().all(|&s| s > 0));
    }

    #[test]
    fn silhouette_limits() {
        let pts = vec![vec![0.0], vec![0.1], vec![10.0], vec![10.1]];
        let s = silhouette(&pts, &[0, 0, 1, 1]).unwrap();
        assert!(s >= 0.9, "{s}");
        let same = vec![vec![1.0]; 4];
        assert_eq!(silhouette(&same, &[0, 1, 0, 1]).unwrap(), 0.0);
        assert_eq!(silhouette(&pts, &[0, 0, 0, 0]), Err(ClusterError::SingleCluster));
    }

    #[test]
    fn silhouette_hand_instance() {
        // 1-D points {0, 1, 3} in cluster 0 and {7, 8} in cluster 1
        let pts = vec![vec![0.0], vec![1.0], vec![3.0], vec![7.0], vec![8.0]];
        let labels = [0, 0, 0, 1, 1];
        let hand = |a: f64, b: f64| (b - a) / a.max(b);
        let expected = (hand((1.0 + 3.0) / 2.0, (7.0 + 8.0) / 2.0)
            + hand((1.0 + 2.0) / 2.0, (6.0 + 7.0) / 2.0)
            + hand((3.0 + 2.0) / 2.0, (4.0 + 5.0) / 2.0)
            + hand(1.0, (7.0 + 6.0 + 4.0) / 3.0)
            + hand(1.0, (8.0 + 7.0 + 5.0) / 3.0))
            / 5.0;
        let s = silhouette(&pts, &labels).unwrap();
        assert!((s - expected).abs() < 1e-12);
    }

    #[test]
    fn sweep_single_k() {
        let pts: Vec<Vec<f64>> = (0..12).map(|i| vec![(i / 4) as f64 * 10.0 + (i % 4) as f64 * 0.1]).collect();
        let ids: Vec<String> = (0..12).map(|i| alloc::format!("v{i}")).collect();
        let cfg = SweepConfig { k_min: 3, k_max: 3, ..Default::default() };
        let models = sweep(&pts, &ids, &cfg, 1).unwrap();
        assert_eq!(models.len(), 1);
        assert_eq!(models[0].k, 3);
    }
}
