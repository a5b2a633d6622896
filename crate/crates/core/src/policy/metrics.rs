use alloc::vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::Dataset;

/// Probabilities below this are clamped when taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Out-of-sample fit metrics for one estimator.
///
/// `log_loss` is the negative mean log-likelihood (smaller is better),
/// `hellinger` the mean of `Σ_j (√y_j − √p̂_j)²` and `lift` the accuracy times
/// the number of classes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n: usize,
    pub accuracy: f64,
    pub log_loss: f64,
    pub hellinger: f64,
    pub lift: f64,
    pub nagelkerke_r2: f64,
    /// Number of observations whose predicted probability had to be clamped.
    pub clamped: usize,
}

/// Scores `predict` on every row of `holdout`.
///
/// The null model for the pseudo-R² predicts the holdout class frequencies.
pub fn evaluate(predict: impl Fn(&[f64], &mut [f64]), holdout: &Dataset) -> FitReport {
    let c = holdout.n_classes;
    let n = holdout.len();
    let mut p = vec![0.0; c];
    let (mut correct, mut ll, mut hell, mut clamped) = (0usize, 0.0, 0.0, 0usize);
    for i in 0..n {
        predict(holdout.row(i), &mut p);
        let y = holdout.y[i];
        // argmax with lowest-index ties
        let best = (1..c).fold(0, |b, j| if p[j] > p[b] { j } else { b });
        if best == y {
            correct += 1;
        }
        let py = p[y];
        if py < PROB_FLOOR {
            clamped += 1;
        }
        ll += py.max(PROB_FLOOR).ln();
        hell += (0..c)
            .map(|j| {
                let yj = if j == y { 1.0 } else { 0.0 };
                let d = yj - p[j].max(0.0).sqrt();
                d * d
            })
            .sum::<f64>();
    }
    let nf = n as f64;
    let accuracy = if n == 0 { 0.0 } else { correct as f64 / nf };
    let counts = holdout.class_counts();
    let ll0: f64 = counts.iter().filter(|&&k| k > 0).map(|&k| k as f64 * (k as f64 / nf).ln()).sum();
    FitReport {
        n,
        accuracy,
        log_loss: if n == 0 { 0.0 } else { -ll / nf },
        hellinger: if n == 0 { 0.0 } else { hell / nf },
        lift: accuracy * c as f64,
        nagelkerke_r2: nagelkerke(ll0, ll, n),
        clamped,
    }
}

/// Nagelkerke pseudo-R² from null and model log-likelihoods, computed in log
/// space to avoid underflow of the likelihoods themselves.
pub fn nagelkerke(ll0: f64, ll1: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let s = 2.0 / n as f64;
    let denom = -(s * ll0).exp_m1();
    if denom <= 0.0 {
        return 0.0;
    }
    let num = -(s * (ll0 - ll1)).exp_m1();
    num / denom
}
