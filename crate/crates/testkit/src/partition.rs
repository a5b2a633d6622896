//! Exhaustive k-partitioning and planted-cluster data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn within_ss(points: &[Vec<f64>], labels: &[usize], k: usize) -> Option<f64> {
    let d = points[0].len();
    let mut sum = vec![vec![0.0; d]; k];
    let mut n = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        n[l] += 1;
        for (s, x) in sum[l].iter_mut().zip(p) {
            *s += x;
        }
    }
    if n.contains(&0) {
        return None;
    }
    let mut ss = 0.0;
    for (p, &l) in points.iter().zip(labels) {
        for (j, x) in p.iter().enumerate() {
            let c = sum[l][j] / n[l] as f64;
            ss += (x - c) * (x - c);
        }
    }
    Some(ss)
}

/// Smallest within-cluster sum of squares over every labelling with exactly
/// `k` nonempty groups. Exponential in the number of points.
pub fn best_partition(points: &[Vec<f64>], k: usize) -> (f64, Vec<usize>) {
    let n = points.len();
    let mut labels = vec![0usize; n];
    let mut best = (f64::INFINITY, labels.clone());
    loop {
        if let Some(ss) = within_ss(points, &labels, k) {
            if ss < best.0 {
                best = (ss, labels.clone());
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}

/// `k` tight Gaussian blobs of `per` points each in `dim` dimensions, centres
/// spread on a unit cube. Returns points and true labels.
pub fn planted_blobs(k: usize, per: usize, dim: usize, sd: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centres: Vec<Vec<f64>> = Vec::new();
    while centres.len() < k {
        let c: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
        let far = centres.iter().all(|o| o.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() > 0.45);
        if far {
            centres.push(c);
        }
    }
    let mut pts = Vec::new();
    let mut lab = Vec::new();
    for (l, c) in centres.iter().enumerate() {
        for _ in 0..per {
            pts.push(
                c.iter()
                    .map(|&x| {
                        let (u1, u2): (f64, f64) = (rng.gen::<f64>().max(1e-300), rng.gen());
                        x + sd * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
                    })
                    .collect(),
            );
            lab.push(l);
        }
    }
    (pts, lab)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_obvious_groups() {
        let pts = vec![vec![0.0], vec![0.1], vec![5.0], vec![5.2]];
        let (ss, l) = best_partition(&pts, 2);
        assert!((ss - (0.005 + 0.02)).abs() < 1e-12);
        assert_eq!(l[0], l[1]);
        assert_ne!(l[1], l[2]);
    }
}
