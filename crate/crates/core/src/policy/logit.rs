use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{n_actions, Dataset, PolicyError};
use crate::linalg;
use crate::par;

const CHUNK: usize = 4096;

/// Softmax model with one coefficient row `[intercept, slopes...]` per
/// non-reference class. Classes absent from training get probability zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogitModel {
    pub n_classes: usize,
    pub dim: usize,
    pub reference: usize,
    /// Non-reference classes carrying a coefficient row, ascending.
    pub classes: Vec<usize>,
    /// `classes.len() * (dim + 1)` coefficients.
    pub coef: Vec<f64>,
}

impl LogitModel {
    /// All classes active, exit (the last class) as reference, zero coefficients.
    pub fn zeros(k: usize, dim: usize) -> Self {
        let n_classes = n_actions(k);
        let classes: Vec<usize> = (0..n_classes - 1).collect();
        LogitModel { n_classes, dim, reference: n_classes - 1, coef: vec![0.0; classes.len() * (dim + 1)], classes }
    }

    fn row_of(&self, class: usize) -> Option<usize> {
        self.classes.iter().position(|&c| c == class)
    }

    /// Intercept of `class`.
    pub fn set_intercept(&mut self, class: usize, value: f64) {
        let r = self.row_of(class).expect("class has no coefficient row");
        self.coef[r * (self.dim + 1)] = value;
    }

    /// Slope of `class` on feature `feature`.
    pub fn set_slope(&mut self, class: usize, feature: usize, value: f64) {
        let r = self.row_of(class).expect("class has no coefficient row");
        self.coef[r * (self.dim + 1) + 1 + feature] = value;
    }

    pub fn intercept(&self, class: usize) -> f64 {
        self.row_of(class).map_or(0.0, |r| self.coef[r * (self.dim + 1)])
    }

    pub fn slope(&self, class: usize, feature: usize) -> f64 {
        self.row_of(class).map_or(0.0, |r| self.coef[r * (self.dim + 1) + 1 + feature])
    }

    pub fn predict_features(&self, x: &[f64], out: &mut [f64]) {
        let mut p = vec![0.0; self.classes.len()];
        let p_ref = scores_to_probs(&self.coef, self.dim, x, &mut p);
        out.iter_mut().for_each(|o| *o = 0.0);
        out[self.reference] = p_ref;
        for (i, &c) in self.classes.iter().enumerate() {
            out[c] = p[i];
        }
    }
}

/// Fills `p` with the probabilities of the non-reference rows and returns the
/// reference probability.
fn scores_to_probs(coef: &[f64], dim: usize, x: &[f64], p: &mut [f64]) -> f64 {
    let w = dim + 1;
    let mut max = 0.0f64;
    for (i, pi) in p.iter_mut().enumerate() {
        let row = &coef[i * w..(i + 1) * w];
        let s = row[0] + linalg::dot(&row[1..], x);
        *pi = s;
        max = max.max(s);
    }
    let mut total = (-max).exp();
    for pi in p.iter_mut() {
        *pi = (*pi - max).exp();
        total += *pi;
    }
    for pi in p.iter_mut() {
        *pi /= total;
    }
    (-max).exp() / total
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogitConfig {
    /// Ridge weight on slopes (intercepts are unpenalised).
    pub ridge: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogitConfig {
    fn default() -> Self {
        LogitConfig { ridge: 1e-4, max_iter: 100, tol: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogitFit {
    pub model: LogitModel,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Mean penalised log-likelihood at the solution.
    pub objective: f64,
    pub warnings: Vec<alloc::string::String>,
}

struct Accum {
    ll: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

/// Mean penalised log-likelihood `(1/N) Σ ln p_y − (λ/2)‖slopes‖²` of `model`
/// on `data`.
pub fn penalized_loglik(model: &LogitModel, data: &Dataset, ridge: f64) -> f64 {
    let (ll, _) = loglik_and_grad(model, data, ridge, false);
    ll
}

/// Gradient of [`penalized_loglik`] with respect to `model.coef`.
pub fn penalized_gradient(model: &LogitModel, data: &Dataset, ridge: f64) -> Vec<f64> {
    loglik_and_grad(model, data, ridge, true).1
}

fn loglik_and_grad(model: &LogitModel, data: &Dataset, ridge: f64, grad: bool) -> (f64, Vec<f64>) {
    let acc = accumulate(model, data, grad, false);
    let n = data.len() as f64;
    let w = model.dim + 1;
    let mut g: Vec<f64> = acc.grad.iter().map(|v| v / n).collect();
    let mut pen = 0.0;
    for (i, &b) in model.coef.iter().enumerate() {
        if i % w != 0 {
            pen += b * b;
            if grad {
                g[i] -= ridge * b;
            }
        }
    }
    (acc.ll / n - 0.5 * ridge * pen, g)
}

fn accumulate(model: &LogitModel, data: &Dataset, grad: bool, hess: bool) -> Accum {
    let m = model.classes.len();
    let w = model.dim + 1;
    let np = m * w;
    // class -> row lookup, reference / absent classes map to None
    let mut row_of = vec![None; model.n_classes];
    for (i, &c) in model.classes.iter().enumerate() {
        row_of[c] = Some(i);
    }
    let n_chunks = data.len().div_ceil(CHUNK);
    let parts = par::map_indexed(n_chunks, |ci| {
        let mut acc = Accum {
            ll: 0.0,
            grad: if grad { vec![0.0; np] } else { Vec::new() },
            hess: if hess { vec![0.0; np * np] } else { Vec::new() },
        };
        let mut p = vec![0.0; m];
        let mut xt = vec![0.0; w];
        let mut nz = Vec::with_capacity(w);
        for r in ci * CHUNK..((ci + 1) * CHUNK).min(data.len()) {
            let x = data.row(r);
            let p_ref = scores_to_probs(&model.coef, model.dim, x, &mut p);
            let yrow = row_of[data.y[r]];
            let py = match yrow {
                Some(i) => p[i],
                None if data.y[r] == model.reference => p_ref,
                None => 0.0,
            };
            acc.ll += py.max(f64::MIN_POSITIVE).ln();
            if !grad && !hess {
                continue;
            }
            xt[0] = 1.0;
            xt[1..].copy_from_slice(x);
            nz.clear();
            nz.extend((0..w).filter(|&a| xt[a] != 0.0));
            if grad {
                for i in 0..m {
                    let resid = if yrow == Some(i) { 1.0 } else { 0.0 } - p[i];
                    for &a in &nz {
                        acc.grad[i * w + a] += resid * xt[a];
                    }
                }
            }
            if hess {
                for i in 0..m {
                    for j in i..m {
                        let wt = p[i] * (if i == j { 1.0 } else { 0.0 } - p[j]);
                        for (ia, &a) in nz.iter().enumerate() {
                            let base = (i * w + a) * np + j * w;
                            let wa = wt * xt[a];
                            for &b in &nz[if i == j { ia } else { 0 }..] {
                                acc.hess[base + b] += wa * xt[b];
                            }
                        }
                    }
                }
            }
        }
        acc
    });
    let mut total = Accum {
        ll: 0.0,
        grad: if grad { vec![0.0; np] } else { Vec::new() },
        hess: if hess { vec![0.0; np * np] } else { Vec::new() },
    };
    for part in parts {
        total.ll += part.ll;
        for (t, v) in total.grad.iter_mut().zip(&part.grad) {
            *t += v;
        }
        for (t, v) in total.hess.iter_mut().zip(&part.hess) {
            *t += v;
        }
    }
    if hess {
        // mirror: diagonal blocks were filled on b >= a, off-diagonal blocks on i < j
        for i in 0..m {
            for a in 0..w {
                for b in 0..a {
                    let (u, v) = (i * w + a, i * w + b);
                    total.hess[u * np + v] = total.hess[v * np + u];
                }
            }
        }
        for u in 0..np {
            for v in 0..u {
                if u / w != v / w {
                    total.hess[u * np + v] = total.hess[v * np + u];
                }
            }
        }
    }
    total
}

/// Ridge-penalised multinomial logit fitted by damped Newton ascent.
///
/// Classes never observed in `data` are dropped and predicted with
/// probability zero (a warning is recorded). The reference class is the last
/// class (exit) when present. Iteration stops when the gradient norm drops
/// below `tol` or the Newton decrement falls to round-off level.
pub fn fit_multinomial_logit(data: &Dataset, cfg: &LogitConfig) -> Result<LogitFit, PolicyError> {
    if data.is_empty() {
        return Err(PolicyError::EmptyTrainingSet);
    }
    let counts = data.class_counts();
    let mut warnings = Vec::new();
    let present: Vec<usize> = (0..data.n_classes).filter(|&c| counts[c] > 0).collect();
    for c in (0..data.n_classes).filter(|&c| counts[c] == 0) {
        warnings.push(format!("class {c} absent from training data; predicted with probability 0"));
    }
    let reference = *present.last().expect("nonempty data has a class");
    if reference != data.n_classes - 1 {
        warnings.push(format!("exit class absent; class {reference} used as reference"));
    }
    let classes: Vec<usize> = present.iter().copied().filter(|&c| c != reference).collect();
    let w = data.dim + 1;
    let np = classes.len() * w;
    let n = data.len() as f64;
    // intercepts start at the log-odds of the empirical frequencies
    let mut coef = vec![0.0; np];
    for (i, &c) in classes.iter().enumerate() {
        coef[i * w] = (counts[c] as f64 / counts[reference] as f64).ln();
    }
    let mut model = LogitModel { n_classes: data.n_classes, dim: data.dim, reference, classes, coef };
    let ridge = cfg.ridge.max(0.0);

    let mut grad_norm = f64::INFINITY;
    let mut objective;
    for iter in 0..=cfg.max_iter {
        let acc = accumulate(&model, data, true, true);
        let mut g: Vec<f64> = acc.grad.iter().map(|v| v / n).collect();
        let mut neg_h: Vec<f64> = acc.hess.iter().map(|v| v / n).collect();
        let mut pen = 0.0;
        for i in 0..np {
            if i % w != 0 {
                pen += model.coef[i] * model.coef[i];
                g[i] -= ridge * model.coef[i];
                neg_h[i * np + i] += ridge;
            }
        }
        objective = acc.ll / n - 0.5 * ridge * pen;
        grad_norm = linalg::norm2(&g);
        if grad_norm < cfg.tol {
            return Ok(LogitFit { model, iterations: iter, grad_norm, objective, warnings });
        }
        if iter == cfg.max_iter {
            break;
        }
        let step = newton_direction(&neg_h, &g, np);
        // backtracking on the penalised objective
        let slope = linalg::dot(&g, &step);
        if 0.5 * slope <= 8.0 * f64::EPSILON * objective.abs().max(1.0) {
            // predicted gain below round-off: the gradient norm is at its noise floor
            return Ok(LogitFit { model, iterations: iter, grad_norm, objective, warnings });
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = model.clone();
            for (b, d) in trial.coef.iter_mut().zip(&step) {
                *b += alpha * d;
            }
            let f = penalized_loglik(&trial, data, ridge);
            if f >= objective + 1e-4 * alpha * slope || (f >= objective && alpha < 1e-6) {
                model = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // no ascent possible at machine precision
            break;
        }
    }
    Err(PolicyError::NoConvergence { iterations: cfg.max_iter, grad_norm })
}

fn newton_direction(neg_h: &[f64], g: &[f64], np: usize) -> Vec<f64> {
    let mut jitter = 0.0;
    let scale = (0..np).map(|i| neg_h[i * np + i]).fold(0.0f64, f64::max).max(1e-300);
    for _ in 0..12 {
        let mut h = neg_h.to_vec();
        if jitter > 0.0 {
            for i in 0..np {
                h[i * np + i] += jitter;
            }
        }
        if let Some(d) = linalg::cholesky_solve(&h, g) {
            if d.iter().all(|v| v.is_finite()) {
                return d;
            }
        }
        jitter = if jitter == 0.0 { 1e-12 * scale } else { jitter * 100.0 };
    }
    g.to_vec()
}
