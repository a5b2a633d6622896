// Matrix recommendation policies: projected gradient ascent and the quadratic
// fast path used for bootstrap re-optimisation.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dpsolver::{evaluate_exact, matrix_gradient, DecisionModel, DpError, RecPolicy};
use crate::linalg;

/// Settings for projected gradient ascent over row-stochastic matrices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AscentConfig {
    pub max_iter: usize,
    /// Stop when the projected-gradient step, relative to the objective, is
    /// below this.
    pub tol: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        AscentConfig { max_iter: 1000, tol: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixOptimum {
    pub policy: RecPolicy,
    pub value: f64,
    pub iterations: usize,
    pub stationarity: f64,
    pub converged: bool,
}

/// Matrices flattened row-major, one block of `K × K` per period.
fn pack(policy: &RecPolicy) -> Vec<f64> {
    match policy {
        RecPolicy::StaticMatrix { rows } => rows.iter().flatten().copied().collect(),
        RecPolicy::DynamicMatrix { periods } => periods.iter().flatten().flatten().copied().collect(),
        _ => panic!("matrix policy expected"),
    }
}

fn unpack(like: &RecPolicy, x: &[f64], k: usize) -> RecPolicy {
    let rows = |chunk: &[f64]| chunk.chunks(k).map(<[f64]>::to_vec).collect::<Vec<_>>();
    match like {
        RecPolicy::StaticMatrix { .. } => RecPolicy::StaticMatrix { rows: rows(x) },
        RecPolicy::DynamicMatrix { .. } => RecPolicy::DynamicMatrix { periods: x.chunks(k * k).map(rows).collect() },
        _ => panic!("matrix policy expected"),
    }
}

fn gradient(model: &DecisionModel, policy: &RecPolicy, margins: &[f64], initial: &[f64]) -> Result<(f64, Vec<f64>), DpError> {
    let g = matrix_gradient(model, policy, margins, initial)?;
    let flat = match policy {
        RecPolicy::StaticMatrix { .. } => g.summed(model.k).into_iter().flatten().collect(),
        _ => g.per_period.into_iter().flatten().flatten().collect(),
    };
    Ok((g.value, flat))
}

fn project_rows(x: &[f64], k: usize) -> Vec<f64> {
    x.chunks(k).flat_map(linalg::project_simplex).collect()
}

/// Maximises exact expected profit over matrix policies of the same kind as
/// `start` (static or dynamic) by projected gradient ascent with Armijo
/// backtracking. The value never decreases from `start`.
pub fn optimize_matrix(
    model: &DecisionModel,
    margins: &[f64],
    initial: &[f64],
    start: &RecPolicy,
    cfg: &AscentConfig,
) -> Result<MatrixOptimum, DpError> {
    let k = model.k;
    let mut x = project_rows(&pack(start), k);
    let mut policy = unpack(start, &x, k);
    let (mut value, mut g) = gradient(model, &policy, margins, initial)?;
    let mut step = 1.0 / linalg::norm_inf(&g).max(1e-300);
    let mut stationarity = f64::INFINITY;
    for iter in 0..cfg.max_iter {
        let scale = value.abs().max(1e-12);
        let probe: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + b / scale).collect();
        let mapped = project_rows(&probe, k);
        stationarity = x.iter().zip(&mapped).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if stationarity < cfg.tol {
            return Ok(MatrixOptimum { policy, value, iterations: iter, stationarity, converged: true });
        }
        let mut accepted = false;
        step *= 4.0;
        for _ in 0..60 {
            let trial_x = project_rows(&x.iter().zip(&g).map(|(a, b)| a + step * b).collect::<Vec<_>>(), k);
            let ascent: f64 = trial_x.iter().zip(&x).zip(&g).map(|((t, a), b)| (t - a) * b).sum();
            let trial = unpack(start, &trial_x, k);
            let v = evaluate_exact(model, &trial, margins, initial)?;
            if v >= value + 1e-4 * ascent && v >= value {
                x = trial_x;
                policy = trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        let (v, gg) = gradient(model, &policy, margins, initial)?;
        value = v;
        g = gg;
    }
    Ok(MatrixOptimum { policy, value, iterations: cfg.max_iter, stationarity, converged: false })
}

/// Replicates a static matrix into a dynamic policy over `T − 1` periods.
pub fn as_dynamic(policy: &RecPolicy, horizon: usize) -> RecPolicy {
    match policy {
        RecPolicy::StaticMatrix { rows } => RecPolicy::DynamicMatrix { periods: vec![rows.clone(); horizon.saturating_sub(1).max(1)] },
        other => other.clone(),
    }
}

/// Newton step `x₀ − H⁻¹D` for maximising `f`, with `D` the central-difference
/// gradient of `f` and `H` the symmetrised central-difference Jacobian of
/// `grad`. Returns `None` when `H` is singular.
pub fn quadratic_step(x0: &[f64], f: impl Fn(&[f64]) -> f64, grad: impl Fn(&[f64]) -> Vec<f64>, h: f64) -> Option<Vec<f64>> {
    let n = x0.len();
    let mut d = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    let mut x = x0.to_vec();
    for j in 0..n {
        x[j] = x0[j] + h;
        let (fu, gu) = (f(&x), grad(&x));
        x[j] = x0[j] - h;
        let (fd, gd) = (f(&x), grad(&x));
        x[j] = x0[j];
        d[j] = (fu - fd) / (2.0 * h);
        for i in 0..n {
            hess[i * n + j] = (gu[i] - gd[i]) / (2.0 * h);
        }
    }
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (hess[i * n + j] + hess[j * n + i]);
            hess[i * n + j] = s;
            hess[j * n + i] = s;
        }
    }
    let delta = linalg::lu_solve(&hess, &d, 1e-12)?;
    Some(x0.iter().zip(&delta).map(|(a, b)| a - b).collect())
}

/// How the fast path produced its matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FastPathStep {
    Newton,
    /// `H` was singular; one projected gradient step was taken instead.
    GradientFallback,
    /// The projected Newton point was worse than the starting matrix.
    Kept,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FastPathResult {
    pub policy: RecPolicy,
    pub value: f64,
    pub start_value: f64,
    pub step: FastPathStep,
}

/// Support entries of each row move; the last support entry absorbs the
/// slack so rows keep summing to one.
struct FreeFace {
    k: usize,
    base: Vec<f64>,
    /// `(flat index, reference flat index)` per free coordinate.
    coords: Vec<(usize, usize)>,
}

impl FreeFace {
    fn new(base: Vec<f64>, k: usize) -> Self {
        let mut coords = Vec::new();
        for row in 0..base.len() / k {
            let support: Vec<usize> = (0..k).map(|j| row * k + j).filter(|&i| base[i] > 1e-9).collect();
            if let Some((&reference, free)) = support.split_last() {
                coords.extend(free.iter().map(|&i| (i, reference)));
            }
        }
        FreeFace { k, base, coords }
    }

    fn point(&self) -> Vec<f64> {
        self.coords.iter().map(|&(i, _)| self.base[i]).collect()
    }

    fn full(&self, free: &[f64]) -> Vec<f64> {
        let mut x = self.base.clone();
        for (&(i, r), &v) in self.coords.iter().zip(free) {
            x[r] -= v - x[i];
            x[i] = v;
        }
        x
    }

    fn reduce(&self, g: &[f64]) -> Vec<f64> {
        self.coords.iter().map(|&(i, r)| g[i] - g[r]).collect()
    }
}

/// Re-optimises the matrix `phi0` for a perturbed model with one quadratic
/// (Newton) step on the free entries, then projects rows back onto the simplex.
pub fn fast_path(model: &DecisionModel, margins: &[f64], initial: &[f64], phi0: &RecPolicy, h: f64) -> Result<FastPathResult, DpError> {
    let k = model.k;
    let face = FreeFace::new(pack(phi0), k);
    let start_value = evaluate_exact(model, phi0, margins, initial)?;
    let value_at = |free: &[f64]| evaluate_exact(model, &unpack(phi0, &face.full(free), k), margins, initial).unwrap_or(f64::NAN);
    let grad_at = |free: &[f64]| {
        gradient(model, &unpack(phi0, &face.full(free), k), margins, initial)
            .map(|(_, g)| face.reduce(&g))
            .unwrap_or_else(|_| vec![f64::NAN; free.len()])
    };
    let x0 = face.point();
    if x0.is_empty() {
        return Ok(FastPathResult { policy: phi0.clone(), value: start_value, start_value, step: FastPathStep::Kept });
    }
    let (candidate, step) = match quadratic_step(&x0, value_at, grad_at, h) {
        Some(x) if x.iter().all(|v| v.is_finite()) => (face.full(&x), FastPathStep::Newton),
        _ => {
            // one projected gradient step moving no entry by more than 0.05
            let g = gradient(model, phi0, margins, initial)?.1;
            let alpha = 0.05 / linalg::norm_inf(&g).max(1e-300);
            (pack(phi0).iter().zip(&g).map(|(a, b)| a + alpha * b).collect(), FastPathStep::GradientFallback)
        }
    };
    let policy = unpack(phi0, &project_rows(&candidate, face.k), k);
    let value = evaluate_exact(model, &policy, margins, initial)?;
    if value < start_value {
        return Ok(FastPathResult { policy: phi0.clone(), value: start_value, start_value, step: FastPathStep::Kept });
    }
    Ok(FastPathResult { policy, value, start_value, step })
}
