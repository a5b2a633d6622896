use alloc::vec;

use super::{dist, ClusterError};
use crate::par;

/// Mean silhouette width. Points in singleton clusters score 0, and a point
/// with `a = b = 0` scores 0.
pub fn silhouette(points: &[alloc::vec::Vec<f64>], assignments: &[usize]) -> Result<f64, ClusterError> {
    let k = assignments.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    if k < 2 {
        return Err(ClusterError::SingleCluster);
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(ClusterError::EmptyCluster(empty));
    }
    let n = points.len();
    let scores = par::map_indexed(n, |i| {
        let own = assignments[i];
        if sizes[own] == 1 {
            return 0.0;
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if j != i {
                sums[assignments[j]] += dist(&points[i], &points[j]);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m == 0.0 {
            0.0
        } else {
            (b - a) / m
        }
    });
    Ok(scores.iter().sum::<f64>() / n as f64)
}
