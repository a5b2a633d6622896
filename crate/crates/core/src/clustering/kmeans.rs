use alloc::vec;
use alloc::vec::Vec;

use super::{nearest, sq_dist, ClusterError};

/// Converged Lloyd iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct KMeansFit {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub within_ss: f64,
    /// Objective after every centroid update, starting from the initial
    /// allocation. Non-increasing.
    pub ss_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn centroids_of(points: &[Vec<f64>], assign: &[usize], k: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let d = points[0].len();
    let mut c = vec![vec![0.0; d]; k];
    let mut n = vec![0usize; k];
    for (p, &a) in points.iter().zip(assign) {
        n[a] += 1;
        for (cj, &x) in c[a].iter_mut().zip(p) {
            *cj += x;
        }
    }
    for (cj, &nj) in c.iter_mut().zip(&n) {
        if nj > 0 {
            cj.iter_mut().for_each(|x| *x /= nj as f64);
        }
    }
    (c, n)
}

fn within(points: &[Vec<f64>], assign: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points.iter().zip(assign).map(|(p, &a)| sq_dist(p, &centroids[a])).sum()
}

// Moves the point farthest from its own centroid (among clusters with at least
// two members) into each empty cluster.
fn repair_empty(points: &[Vec<f64>], assign: &mut [usize], k: usize) -> bool {
    let mut repaired = false;
    loop {
        let (centroids, counts) = centroids_of(points, assign, k);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return repaired;
        };
        let mut best = None;
        let mut best_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            if counts[assign[i]] < 2 {
                continue;
            }
            let dd = sq_dist(p, &centroids[assign[i]]);
            if dd > best_d {
                best_d = dd;
                best = Some(i);
            }
        }
        match best {
            Some(i) => {
                assign[i] = empty;
                repaired = true;
            }
            None => return repaired,
        }
    }
}

const MONOTONE_SLACK: f64 = 1e-9;

/// Lloyd iterations from an initial allocation until the assignment is a
/// fixpoint, the largest centroid shift drops below `tol`, or `max_iter` rounds.
///
/// Panics if the objective ever increases (beyond round-off), which would mean
/// a broken update step.
pub fn kmeans(points: &[Vec<f64>], init: &[usize], k: usize, max_iter: usize, tol: f64) -> Result<KMeansFit, ClusterError> {
    if init.len() != points.len() {
        return Err(ClusterError::InitLength { expected: points.len(), got: init.len() });
    }
    if k == 0 || points.len() < k {
        return Err(ClusterError::TooFewPoints { k, n: points.len() });
    }
    if let Some(&bad) = init.iter().find(|&&a| a >= k) {
        return Err(ClusterError::LabelOutOfRange { label: bad, k });
    }
    let mut assign = init.to_vec();
    repair_empty(points, &mut assign, k);
    let (mut centroids, _) = centroids_of(points, &assign, k);
    let mut ss = within(points, &assign, &centroids);
    let mut history = vec![ss];
    let mut iterations = 0;
    let mut converged = false;
    let check = |prev: f64, cur: f64| {
        assert!(cur <= prev + MONOTONE_SLACK * prev.abs().max(1.0), "k-means objective increased: {prev} -> {cur}");
    };
    while iterations < max_iter {
        iterations += 1;
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let a = nearest(p, &centroids);
            if a != assign[i] {
                assign[i] = a;
                changed = true;
            }
        }
        changed |= repair_empty(points, &mut assign, k);
        if !changed {
            converged = true;
            break;
        }
        let (next, _) = centroids_of(points, &assign, k);
        let shift = next
            .iter()
            .zip(&centroids)
            .map(|(a, b)| sq_dist(a, b))
            .fold(0.0f64, f64::max);
        centroids = next;
        let new_ss = within(points, &assign, &centroids);
        check(ss, new_ss);
        ss = new_ss;
        history.push(ss);
        if num_traits::Float::sqrt(shift) < tol {
            // settle the assignment against the final centroids
            let settled = points.iter().map(|p| nearest(p, &centroids)).collect::<Vec<_>>();
            if settled == assign {
                converged = true;
                break;
            }
        }
    }
    Ok(KMeansFit { assignments: assign, centroids, within_ss: ss, ss_history: history, iterations, converged })
}
