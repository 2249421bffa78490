//! Output layer: affine readout over the reservoir features, softmax
//! cross-entropy with its gradients, and the closed-form ridge refit with
//! regularization sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regularization candidates swept after gradient training.
pub const DEFAULT_BETAS: [f64; 4] = [1e-6, 1e-4, 1e-2, 1.0];

/// Readout weights: `n_classes` rows over `n_features` reservoir features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputHead {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl OutputHead {
    pub fn zeros(n_classes: usize, n_features: usize) -> OutputHead {
        OutputHead {
            weights: vec![vec![0.0; n_features]; n_classes],
            bias: vec![0.0; n_classes],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn n_features(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }
}

/// Logits and their softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Prediction {
    /// Argmax class, ties broken toward the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (c, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = c;
            }
        }
        best
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

/// logits = W r + b, probs = softmax(logits) with max subtraction.
pub fn forward_head(head: &OutputHead, features: &[f64]) -> Prediction {
    debug_assert_eq!(features.len(), head.n_features());
    let logits: Vec<f64> = head
        .weights
        .iter()
        .zip(&head.bias)
        .map(|(row, b)| row.iter().zip(features).map(|(w, r)| w * r).sum::<f64>() + b)
        .collect();
    let probs = softmax(&logits);
    Prediction { logits, probs }
}

/// Cross-entropy against a one-hot target: `-log probs[label]`, clamped so
/// an underflowed probability cannot produce infinity.
pub fn loss(pred: &Prediction, label: usize) -> f64 {
    -pred.probs[label].max(f64::MIN_POSITIVE).ln()
}

/// Gradients of the cross-entropy with respect to the head and the features.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradients {
    pub d_weights: Vec<Vec<f64>>,
    pub d_bias: Vec<f64>,
    /// dL/dr, backpropagated into the reservoir layers.
    pub d_features: Vec<f64>,
}

/// With delta = probs - onehot(label): db = delta, dW = delta ⊗ r,
/// dr = W^T delta.
pub fn head_gradients(
    pred: &Prediction,
    label: usize,
    features: &[f64],
    head: &OutputHead,
) -> HeadGradients {
    let mut delta = pred.probs.clone();
    delta[label] -= 1.0;

    let d_weights: Vec<Vec<f64>> = delta
        .iter()
        .map(|&d| features.iter().map(|&r| d * r).collect())
        .collect();

    let mut d_features = vec![0.0; features.len()];
    for (&d, w_row) in delta.iter().zip(&head.weights) {
        for (slot, &w) in d_features.iter_mut().zip(w_row) {
            *slot += w * d;
        }
    }

    HeadGradients {
        d_weights,
        d_bias: delta,
        d_features,
    }
}

/// In-place lower Cholesky factorization of a flat row-major SPD matrix.
fn cholesky_factor(g: &mut [f64], n: usize) -> Result<()> {
    for j in 0..n {
        let (head, tail) = g.split_at_mut(j * n + j);
        let row_j = &head[j * n..];
        let mut d = tail[0];
        for v in row_j.iter() {
            d -= v * v;
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::Solver(format!(
                "matrix not positive definite at pivot {j} (d = {d})"
            )));
        }
        let pivot = d.sqrt();
        tail[0] = pivot;
        for i in j + 1..n {
            let (upper, lower) = g.split_at_mut(i * n);
            let row_j = &upper[j * n..j * n + j];
            let row_i = &lower[..j];
            let mut s = lower[j];
            for (a, b) in row_i.iter().zip(row_j) {
                s -= a * b;
            }
            lower[j] = s / pivot;
        }
    }
    Ok(())
}

/// Solve L L^T x = rhs in place, given the lower factor.
fn cholesky_solve(l: &[f64], n: usize, rhs: &mut [f64]) {
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[i * n + k] * rhs[k];
        }
        rhs[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for k in i + 1..n {
            s -= l[k * n + i] * rhs[k];
        }
        rhs[i] = s / l[i * n + i];
    }
}

/// Normal equations of the bias-augmented ridge problem, built once and
/// reusable across regularization candidates.
struct NormalEq {
    /// n = n_features + 1 (trailing bias column).
    n: usize,
    n_y: usize,
    /// R~^T R~, flat row-major, without the ridge term.
    gram: Vec<f64>,
    /// R~^T D, column-major per class.
    rhs: Vec<f64>,
}

impl NormalEq {
    fn build(rows: &[Vec<f64>], labels: &[usize], n_y: usize) -> NormalEq {
        let n_r = rows[0].len();
        let n = n_r + 1;
        let mut gram = vec![0.0; n * n];
        let mut rhs = vec![0.0; n * n_y];
        for (row, &label) in rows.iter().zip(labels) {
            // Upper triangle of the rank-1 update; the bias column is 1.
            for i in 0..n_r {
                let ri = row[i];
                let slot = &mut gram[i * n + i..i * n + n_r];
                for (s, &rj) in slot.iter_mut().zip(&row[i..]) {
                    *s += ri * rj;
                }
                gram[i * n + n_r] += ri;
            }
            gram[n * n - 1] += 1.0;
            let col = &mut rhs[label * n..(label + 1) * n];
            for (c, &ri) in col.iter_mut().zip(row) {
                *c += ri;
            }
            col[n_r] += 1.0;
        }
        for i in 0..n {
            for j in 0..i {
                gram[i * n + j] = gram[j * n + i];
            }
        }
        NormalEq { n, n_y, gram, rhs }
    }

    /// Solve (gram + beta I) theta = rhs and verify the residual against the
    /// unfactored system.
    fn solve(&self, beta: f64) -> Result<OutputHead> {
        let n = self.n;
        let mut factor = self.gram.clone();
        for i in 0..n {
            factor[i * n + i] += beta;
        }
        cholesky_factor(&mut factor, n)?;

        let mut theta = vec![0.0; n * self.n_y];
        let mut rhs_inf: f64 = 0.0;
        let mut res_inf: f64 = 0.0;
        for c in 0..self.n_y {
            let col = &mut theta[c * n..(c + 1) * n];
            col.copy_from_slice(&self.rhs[c * n..(c + 1) * n]);
            cholesky_solve(&factor, n, col);
            // Residual of the original normal equations.
            for i in 0..n {
                let mut g_theta = beta * col[i];
                let row = &self.gram[i * n..(i + 1) * n];
                for (g, t) in row.iter().zip(col.iter()) {
                    g_theta += g * t;
                }
                let rhs_i = self.rhs[c * n + i];
                res_inf = res_inf.max((g_theta - rhs_i).abs());
                rhs_inf = rhs_inf.max(rhs_i.abs());
            }
        }
        let bound = 1e-8 * rhs_inf.max(1.0);
        if res_inf > bound {
            return Err(Error::Solver(format!(
                "ridge residual {res_inf:.3e} exceeds bound {bound:.3e}"
            )));
        }

        let n_r = n - 1;
        let weights = (0..self.n_y)
            .map(|c| theta[c * n..c * n + n_r].to_vec())
            .collect();
        let bias = (0..self.n_y).map(|c| theta[c * n + n_r]).collect();
        Ok(OutputHead { weights, bias })
    }
}

/// Closed-form ridge fit of the readout against one-hot targets.
///
/// The feature matrix is augmented with a constant-1 column for the bias;
/// the ridge penalty applies to the whole augmented parameter block.
pub fn ridge_fit(
    rows: &[Vec<f64>],
    labels: &[usize],
    n_y: usize,
    beta: f64,
) -> Result<OutputHead> {
    if rows.is_empty() || rows.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows vs {} labels",
            rows.len(),
            labels.len()
        )));
    }
    if beta <= 0.0 {
        return Err(Error::InvalidData(format!(
            "ridge regularization must be positive, got {beta}"
        )));
    }
    NormalEq::build(rows, labels, n_y).solve(beta)
}

/// Mean cross-entropy of a head over labeled feature rows.
pub fn mean_loss(head: &OutputHead, rows: &[Vec<f64>], labels: &[usize]) -> f64 {
    let total: f64 = rows
        .iter()
        .zip(labels)
        .map(|(row, &label)| loss(&forward_head(head, row), label))
        .sum();
    total / rows.len() as f64
}

/// Outcome of the regularization sweep.
#[derive(Debug, Clone)]
pub struct BetaSelection {
    pub beta: f64,
    pub head: OutputHead,
    /// Mean cross-entropy of the winning head on the fitting rows.
    pub loss: f64,
}

/// Fit every candidate, score each by mean cross-entropy on `rows`, and keep
/// the minimizer. Ties break toward the larger beta.
pub fn select_beta(
    rows: &[Vec<f64>],
    labels: &[usize],
    n_y: usize,
    betas: &[f64],
) -> Result<BetaSelection> {
    if betas.is_empty() {
        return Err(Error::InvalidData("empty beta candidate list".into()));
    }
    let eq = NormalEq::build(rows, labels, n_y);
    let candidates: Vec<Result<BetaSelection>> = betas
        .par_iter()
        .map(|&beta| {
            let head = eq.solve(beta)?;
            let loss = mean_loss(&head, rows, labels);
            Ok(BetaSelection { beta, head, loss })
        })
        .collect();

    let mut best: Option<BetaSelection> = None;
    for candidate in candidates {
        let candidate = candidate?;
        let replace = match &best {
            None => true,
            Some(b) => {
                candidate.loss < b.loss || (candidate.loss == b.loss && candidate.beta > b.beta)
            }
        };
        if replace {
            best = Some(candidate);
        }
    }
    Ok(best.expect("non-empty candidates"))
}
