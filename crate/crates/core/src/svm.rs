//! Linear soft-margin SVM trained on its dual, plus a one-vs-rest wrapper.
//!
//! The binary trainer solves
//!
//! ```text
//! min_a  1/2 a'Qa - sum(a)   s.t.  0 <= a_i <= C,  sum(a_i y_i) = 0,
//! Q_ij = y_i y_j <x_i, x_j>
//! ```
//!
//! by sequential minimal optimization: each step updates one pair of dual
//! variables analytically. The pair is the maximal violating pair with
//! second-order selection of the partner, and the loop stops once the largest
//! KKT violation `max_up(-y G) - min_low(-y G)` drops below `tol`. Pair
//! selection breaks ties by lowest index, so training is deterministic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::FeatureVector;
use crate::schema::DisorderLabel;

const TAU: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SvmError {
    #[error("need at least two training points, got {0}")]
    TooFew(usize),
    #[error("{points} points but {labels} labels")]
    LabelCount { points: usize, labels: usize },
    #[error("labels must be -1 or +1, got {0}")]
    BadLabel(f64),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("C must be positive, got {0}")]
    NonPositiveC(f64),
    #[error("tolerance must be positive, got {0}")]
    NonPositiveTol(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("label {0} absent from training data")]
    MissingLabel(DisorderLabel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub tol: f64,
    /// Iteration budget in units of `n` pair updates.
    pub max_epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 1.0, tol: 1e-3, max_epochs: 10_000 }
    }
}

impl SvmParams {
    fn check(&self) -> Result<(), SvmError> {
        if !(self.c > 0.0) {
            return Err(SvmError::NonPositiveC(self.c));
        }
        if !(self.tol > 0.0) {
            return Err(SvmError::NonPositiveTol(self.tol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub alphas: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl BinarySvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_shapes(x: &[Vec<f64>], y: &[f64]) -> Result<usize, SvmError> {
    if x.len() != y.len() {
        return Err(SvmError::LabelCount { points: x.len(), labels: y.len() });
    }
    if x.len() < 2 {
        return Err(SvmError::TooFew(x.len()));
    }
    if let Some(&bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(SvmError::BadLabel(bad));
    }
    let dim = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != dim) {
        return Err(SvmError::DimensionMismatch { expected: dim, got: bad.len() });
    }
    Ok(dim)
}

/// Trains a binary linear SVM. Labels must be `-1.0` or `+1.0`.
///
/// Hitting the iteration budget is not an error: the model is returned with
/// `converged == false`.
pub fn train_binary(x: &[Vec<f64>], y: &[f64], params: &SvmParams) -> Result<BinarySvmModel, SvmError> {
    params.check()?;
    let dim = check_shapes(x, y)?;
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(SvmError::SingleClass);
    }
    let n = x.len();
    let c = params.c;
    let max_iter = params.max_epochs.saturating_mul(n).max(1);

    let diag: Vec<f64> = x.iter().map(|r| dot(r, r)).collect();
    let kernel_row = |i: usize, out: &mut Vec<f64>| {
        out.clear();
        out.extend(x.iter().map(|r| dot(&x[i], r)));
    };

    let mut alpha = vec![0.0; n];
    // Gradient of the dual objective: G = Q a - 1.
    let mut grad = vec![-1.0; n];
    let mut ki = Vec::with_capacity(n);
    let mut kj = Vec::with_capacity(n);
    let mut iterations = 0;
    let mut converged = false;

    let up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    while iterations < max_iter {
        // First index: argmax over I_up of -y G.
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        if i == usize::MAX {
            converged = true;
            break;
        }
        kernel_row(i, &mut ki);

        // Second index: among I_low violators, largest guaranteed decrease.
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            let b = gmax - v;
            if b > 0.0 {
                let a = (diag[i] + diag[t] - 2.0 * ki[t]).max(TAU);
                let obj = -(b * b) / a;
                if obj < best_obj {
                    best_obj = obj;
                    j = t;
                }
            }
        }
        if gmax - gmin < params.tol || j == usize::MAX {
            converged = true;
            break;
        }
        kernel_row(j, &mut kj);

        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (ai_old, aj_old);
        if y[i] != y[j] {
            let quad = (diag[i] + diag[j] - 2.0 * ki[j]).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (diag[i] + diag[j] - 2.0 * ki[j]).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }

        alpha[i] = ai;
        alpha[j] = aj;

        let dai = alpha[i] - ai_old;
        let daj = alpha[j] - aj_old;
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ki[t] * dai + y[j] * kj[t] * daj);
        }
        iterations += 1;
    }

    let bias = bias_from_gradient(&alpha, &grad, y, c);
    let mut weights = vec![0.0; dim];
    for ((a, yi), xi) in alpha.iter().zip(y).zip(x) {
        if *a != 0.0 {
            for (w, v) in weights.iter_mut().zip(xi) {
                *w += a * yi * v;
            }
        }
    }
    Ok(BinarySvmModel { weights, bias, c, alphas: alpha, iterations, converged })
}

/// Bias averaged over free support vectors; with none, the midpoint of the
/// interval allowed by the bounded ones.
fn bias_from_gradient(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free = 0usize;
    let mut sum = 0.0;
    for t in 0..alpha.len() {
        // -y G equals the bias that puts point t exactly on its margin.
        let v = -y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] > 0.0 {
                ub = ub.min(v);
            } else {
                lb = lb.max(v);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                lb = lb.max(v);
            } else {
                ub = ub.min(v);
            }
        } else {
            free += 1;
            sum += v;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Primal objective `1/2 |w|^2 + C sum(max(0, 1 - y f(x)))`.
pub fn hinge_objective(model: &BinarySvmModel, x: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let reg = 0.5 * dot(&model.weights, &model.weights);
    let slack: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (1.0 - yi * model.decision(xi)).max(0.0))
        .sum();
    reg + c * slack
}

/// Dual objective `sum(a) - 1/2 |sum(a_i y_i x_i)|^2`, computed from the duals.
pub fn dual_objective(model: &BinarySvmModel, x: &[Vec<f64>], y: &[f64]) -> f64 {
    let dim = x.first().map_or(0, Vec::len);
    let mut w = vec![0.0; dim];
    for ((a, yi), xi) in model.alphas.iter().zip(y).zip(x) {
        for (wk, v) in w.iter_mut().zip(xi) {
            *wk += a * yi * v;
        }
    }
    model.alphas.iter().sum::<f64>() - 0.5 * dot(&w, &w)
}

/// Largest KKT violation of a trained model on its training data, measured on
/// the margin `y f(x)`.
pub fn kkt_residual(model: &BinarySvmModel, x: &[Vec<f64>], y: &[f64]) -> f64 {
    let c = model.c;
    x.iter()
        .zip(y)
        .zip(&model.alphas)
        .map(|((xi, yi), &a)| {
            let m = yi * model.decision(xi);
            if a <= 0.0 {
                (1.0 - m).max(0.0)
            } else if a >= c {
                (m - 1.0).max(0.0)
            } else {
                (m - 1.0).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// One binary model per disorder, each trained label-vs-rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassSvmModel {
    pub params: SvmParams,
    /// Indexed by [`DisorderLabel::index`].
    pub models: Vec<BinarySvmModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmPrediction {
    pub label: DisorderLabel,
    /// Decision values in label-code order.
    pub decision_values: [f64; 3],
}

impl MulticlassSvmModel {
    pub fn train(train: &[(FeatureVector, DisorderLabel)], params: &SvmParams) -> Result<Self, SvmError> {
        params.check()?;
        for label in DisorderLabel::ALL {
            if !train.iter().any(|(_, l)| *l == label) {
                return Err(SvmError::MissingLabel(label));
            }
        }
        let x: Vec<Vec<f64>> = train.iter().map(|(v, _)| v.values.clone()).collect();
        let models = DisorderLabel::ALL
            .into_iter()
            .map(|label| {
                let y: Vec<f64> = train.iter().map(|(_, l)| if *l == label { 1.0 } else { -1.0 }).collect();
                train_binary(&x, &y, params)
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { params: *params, models })
    }

    pub fn validate(&self) -> Result<(), SvmError> {
        if self.models.len() != 3 {
            return Err(SvmError::LabelCount { points: 3, labels: self.models.len() });
        }
        let dim = self.models[0].weights.len();
        if let Some(m) = self.models.iter().find(|m| m.weights.len() != dim) {
            return Err(SvmError::DimensionMismatch { expected: dim, got: m.weights.len() });
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.models[0].weights.len()
    }

    pub fn converged(&self) -> bool {
        self.models.iter().all(|m| m.converged)
    }

    /// Argmax of the three decision values; exact ties go to the smaller code.
    pub fn predict(&self, x: &[f64]) -> Result<SvmPrediction, SvmError> {
        if x.len() != self.dimension() {
            return Err(SvmError::DimensionMismatch { expected: self.dimension(), got: x.len() });
        }
        let mut values = [0.0; 3];
        for (v, m) in values.iter_mut().zip(&self.models) {
            *v = m.decision(x);
        }
        let mut best = 0;
        for i in 1..3 {
            if values[i] > values[best] {
                best = i;
            }
        }
        Ok(SvmPrediction { label: DisorderLabel::ALL[best], decision_values: values })
    }
}
