//! Training: stable softmax cross-entropy, Adam, seeded epoch shuffling
//! with best-validation-epoch weight keeping, and a central-difference
//! gradient checker that exercises every layer kind.

use super::model::{Model, ModelError};
use super::tensor::Tensor;
use crate::iq::SeedSpec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use std::path::Path;
use thiserror::Error;

/// Label-offset base for per-epoch derived seeds.
const EPOCH_LABEL_BASE: u64 = 0xE000_0000;

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("bad training config: {reason}")]
    BadConfig { reason: String },
    #[error("label {label} at row {index} out of range for {classes} classes")]
    BadLabel {
        index: usize,
        label: usize,
        classes: usize,
    },
    #[error("{got} labels for a batch of {batch}")]
    LabelCount { got: usize, batch: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {where_}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        where_: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    /// Stop after this many epochs without a validation-loss improvement.
    pub patience: Option<usize>,
    pub seed: SeedSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 1024,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 60,
            patience: Some(10),
            seed: SeedSpec::new(77, 0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |reason: &str| {
            Err(TrainError::BadConfig {
                reason: reason.to_string(),
            })
        };
        if self.batch_size < 1 {
            return bad("batch_size must be >= 1");
        }
        if !(self.lr > 0.0) {
            return bad("learning rate must be > 0");
        }
        if !(0.0 < self.beta1 && self.beta1 < 1.0 && 0.0 < self.beta2 && self.beta2 < 1.0) {
            return bad("Adam betas must lie in (0, 1)");
        }
        if !(self.eps > 0.0) {
            return bad("Adam epsilon must be > 0");
        }
        if self.epochs < 1 {
            return bad("epochs must be >= 1");
        }
        Ok(())
    }
}

/// Mean cross-entropy of logits against integer class labels, computed via
/// log-sum-exp, plus the gradient d(loss)/d(logits) = (softmax − onehot)/batch.
pub fn softmax_xent(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor), TrainError> {
    let k = *logits.shape.last().expect("logits need a class dim");
    let batch = logits.batch();
    if labels.len() != batch {
        return Err(TrainError::LabelCount {
            got: labels.len(),
            batch,
        });
    }
    let mut grad = Tensor::zeros(&logits.shape);
    let inv_b = 1.0 / batch as f64;
    let mut loss = 0.0;
    for (i, (row, grow)) in logits
        .data
        .chunks_exact(k)
        .zip(grad.data.chunks_exact_mut(k))
        .enumerate()
    {
        let y = labels[i];
        if y >= k {
            return Err(TrainError::BadLabel {
                index: i,
                label: y,
                classes: k,
            });
        }
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (g, &v) in grow.iter_mut().zip(row) {
            *g = (v - m).exp();
            sum += *g;
        }
        loss += m + sum.ln() - row[y];
        for g in grow.iter_mut() {
            *g *= inv_b / sum;
        }
        grow[y] -= inv_b;
    }
    Ok((loss * inv_b, grad))
}

/// First (strictly greatest) argmax of each row.
pub fn argmax_rows(t: &Tensor) -> Vec<usize> {
    let k = *t.shape.last().expect("needs a class dim");
    t.data
        .chunks_exact(k)
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Adam first/second-moment accumulators, one pair per parameter slice.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn for_model(model: &Model) -> Self {
        let zeros: Vec<Vec<f64>> = model.params().iter().map(|p| vec![0.0; p.len()]).collect();
        Self {
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update over all parameter slices.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[Vec<f64>],
    st: &mut AdamState,
    cfg: &TrainConfig,
) {
    st.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(st.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(st.t as i32);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut st.m).zip(&mut st.v) {
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            p[i] -= cfg.lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + cfg.eps);
        }
    }
}

/// Loss and accuracy recorded after one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

/// Full training history plus the epoch whose weights were kept.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

fn snapshot(model: &Model) -> Vec<Vec<f64>> {
    model.params().iter().map(|p| p.to_vec()).collect()
}

fn restore(model: &mut Model, snap: &[Vec<f64>]) {
    for (p, s) in model.params_mut().iter_mut().zip(snap) {
        p.copy_from_slice(s);
    }
}

/// Eval-mode data loss and accuracy over a labeled set, in batches.
pub fn evaluate(
    model: &Model,
    x: &Tensor,
    y: &[usize],
    batch_size: usize,
) -> Result<(f64, f64), TrainError> {
    let n = x.batch();
    if y.len() != n {
        return Err(TrainError::LabelCount { got: y.len(), batch: n });
    }
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let mut start = 0;
    while start < n {
        let end = (start + batch_size).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let logits = model.forward_logits(&x.gather(&idx))?;
        let yb = &y[start..end];
        let (l, _) = softmax_xent(&logits, yb)?;
        loss_sum += l * (end - start) as f64;
        correct += argmax_rows(&logits)
            .iter()
            .zip(yb)
            .filter(|(p, t)| p == t)
            .count();
        start = end;
    }
    Ok((loss_sum / n as f64, correct as f64 / n as f64))
}

fn nan_diagnostic(model: &Model, trace: &super::model::ForwardTrace, epoch: usize, batch: usize) -> TrainError {
    let where_ = trace
        .acts
        .iter()
        .position(|a| a.data.iter().any(|v| !v.is_finite()))
        .map(|j| {
            if j == 0 {
                "non-finite values in the input batch".to_string()
            } else {
                format!(
                    "first non-finite activation after layer {} ({})",
                    j - 1,
                    model.spec.layers[j - 1].kind()
                )
            }
        })
        .unwrap_or_else(|| "activations finite; loss itself overflowed".to_string());
    TrainError::NonFiniteLoss { epoch, batch, where_ }
}

/// Minibatch Adam training with seeded shuffling. Weights left in the model
/// are those of the epoch with the lowest validation loss.
pub fn train(
    model: &mut Model,
    x_train: &Tensor,
    y_train: &[usize],
    x_val: &Tensor,
    y_val: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    let n = x_train.batch();
    if y_train.len() != n {
        return Err(TrainError::LabelCount { got: y_train.len(), batch: n });
    }
    if n == 0 || x_val.batch() == 0 {
        return Err(TrainError::BadConfig {
            reason: "training and validation sets must be non-empty".to_string(),
        });
    }

    let mut adam = AdamState::for_model(model);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params = snapshot(model);

    for epoch in 0..cfg.epochs {
        let mut rng = cfg.seed.derive(EPOCH_LABEL_BASE + epoch as u64).rng();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let xb = x_train.gather(chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| y_train[i]).collect();
            let trace = model.forward_train(&xb, &mut rng)?;
            let logits = trace.acts.last().expect("trace holds the logits");
            let (data_loss, grad_logits) = softmax_xent(logits, &yb)?;
            let obj = data_loss + model.penalty(&trace);
            if !obj.is_finite() {
                return Err(nan_diagnostic(model, &trace, epoch, bi));
            }
            loss_sum += obj * chunk.len() as f64;
            correct += argmax_rows(logits)
                .iter()
                .zip(&yb)
                .filter(|(p, t)| p == t)
                .count();
            let grads = model.backward(&trace, grad_logits)?;
            let mut params = model.params_mut();
            adam_step(&mut params, &grads, &mut adam, cfg);
        }

        let (val_loss, val_acc) = evaluate(model, x_val, y_val, cfg.batch_size)?;
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / n as f64,
            val_loss,
            train_acc: correct as f64 / n as f64,
            val_acc,
        });
        if val_loss < best_loss {
            best_loss = val_loss;
            best_epoch = epoch;
            best_params = snapshot(model);
        }
        if let Some(p) = cfg.patience {
            if epoch - best_epoch >= p {
                break;
            }
        }
    }

    restore(model, &best_params);
    Ok(TrainReport { history, best_epoch })
}

/// History as CSV: epoch, train_loss, val_loss, train_acc, val_acc.
pub fn write_history_csv(path: &Path, history: &[EpochStats]) -> io::Result<()> {
    let mut out = Vec::new();
    writeln!(out, "epoch,train_loss,val_loss,train_acc,val_acc")?;
    for h in history {
        writeln!(
            out,
            "{},{:.9},{:.9},{:.6},{:.6}",
            h.epoch, h.train_loss, h.val_loss, h.train_acc, h.val_acc
        )?;
    }
    std::fs::write(path, out)
}

/// Training objective (data loss + penalties) under a fixed dropout seed.
fn objective(model: &Model, x: &Tensor, y: &[usize], seed: SeedSpec) -> Result<f64, TrainError> {
    let mut rng = seed.rng();
    let trace = model.forward_train(x, &mut rng)?;
    let (dl, _) = softmax_xent(trace.acts.last().expect("logits"), y)?;
    Ok(dl + model.penalty(&trace))
}

fn analytic_grads(
    model: &Model,
    x: &Tensor,
    y: &[usize],
    seed: SeedSpec,
) -> Result<Vec<Vec<f64>>, TrainError> {
    let mut rng = seed.rng();
    let trace = model.forward_train(x, &mut rng)?;
    let (_, grad_logits) = softmax_xent(trace.acts.last().expect("logits"), y)?;
    Ok(model.backward(&trace, grad_logits)?)
}

fn numeric_grads(
    model: &mut Model,
    x: &Tensor,
    y: &[usize],
    eps: f64,
    seed: SeedSpec,
) -> Result<Vec<Vec<f64>>, TrainError> {
    let n_groups = model.params().len();
    let mut out = Vec::with_capacity(n_groups);
    for gi in 0..n_groups {
        let len = model.params()[gi].len();
        let mut g = vec![0.0; len];
        for i in 0..len {
            model.params_mut()[gi][i] += eps;
            let fp = objective(model, x, y, seed)?;
            model.params_mut()[gi][i] -= 2.0 * eps;
            let fm = objective(model, x, y, seed)?;
            model.params_mut()[gi][i] += eps;
            g[i] = (fp - fm) / (2.0 * eps);
        }
        out.push(g);
    }
    Ok(out)
}

fn max_rel_err(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for (ga, gb) in a.iter().zip(b) {
        for (&x, &y) in ga.iter().zip(gb) {
            let rel = (x - y).abs() / (x.abs() + y.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Central-difference check of every parameter gradient (penalties included);
/// returns the maximum relative error. Dropout draws are replayed from the
/// seed, so stochastic layers check cleanly too.
pub fn grad_check(
    model: &mut Model,
    x: &Tensor,
    y: &[usize],
    eps: f64,
    seed: SeedSpec,
) -> Result<f64, TrainError> {
    let analytic = analytic_grads(model, x, y, seed)?;
    let numeric = numeric_grads(model, x, y, eps, seed)?;
    Ok(max_rel_err(&analytic, &numeric))
}

/// [`grad_check`] with a deliberately corrupted analytic gradient: the
/// largest-magnitude component is sign-flipped (or set to 1.0 if all are
/// tiny) before the comparison. A sound checker must report a large error
/// here; a small return value means the check could not catch a real bug.
pub fn grad_check_negative_control(
    model: &mut Model,
    x: &Tensor,
    y: &[usize],
    eps: f64,
    seed: SeedSpec,
) -> Result<f64, TrainError> {
    let mut analytic = analytic_grads(model, x, y, seed)?;
    let numeric = numeric_grads(model, x, y, eps, seed)?;
    let mut slot = 0;
    let mut idx = 0;
    let mut best = -1.0f64;
    for (s, g) in analytic.iter().enumerate() {
        for (i, &v) in g.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                slot = s;
                idx = i;
            }
        }
    }
    analytic[slot][idx] = if best > 1e-9 { -analytic[slot][idx] } else { 1.0 };
    Ok(max_rel_err(&analytic, &numeric))
}
