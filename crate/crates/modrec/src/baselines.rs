//! Classical classifiers over expert features, written from scratch:
//! 1-nearest-neighbor, Gaussian naive Bayes, a CART decision tree, and a
//! one-vs-rest RBF-kernel SVM trained by sequential minimal optimization.
//!
//! All four are deterministic given data and hyperparameters: no RNG enters
//! fitting, ties break toward the lowest index or class id, and the SVM
//! sweeps samples in a fixed order with a fixed second-choice heuristic. Rows
//! are plain `&[f64]` slices so the same code serves 32-feature frames and
//! the low-dimensional oracle cases in the tests; each model records its
//! training dimension and rejects queries of any other length.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("cannot fit on empty training data")]
    EmptyTraining,
    #[error("feature rows ({rows}) and labels ({labels}) differ in count")]
    LabelMismatch { rows: usize, labels: usize },
    #[error("feature vector has dimension {got}, classifier expects {want}")]
    DimMismatch { got: usize, want: usize },
    #[error("training rows differ in dimension: row {index} has {got}, row 0 has {want}")]
    RaggedRows { index: usize, got: usize, want: usize },
    #[error("class {cls} has only {n} samples, need at least 2")]
    ClassTooSmall { cls: u16, n: usize },
    #[error("svm needs at least 2 distinct classes, got {got}")]
    TooFewClasses { got: usize },
}

fn check_xy(x: &[Vec<f64>], y: &[u16]) -> Result<usize, BaselineError> {
    if x.is_empty() {
        return Err(BaselineError::EmptyTraining);
    }
    if x.len() != y.len() {
        return Err(BaselineError::LabelMismatch {
            rows: x.len(),
            labels: y.len(),
        });
    }
    let dim = x[0].len();
    for (index, row) in x.iter().enumerate() {
        if row.len() != dim {
            return Err(BaselineError::RaggedRows {
                index,
                got: row.len(),
                want: dim,
            });
        }
    }
    Ok(dim)
}

fn check_dim(got: usize, want: usize) -> Result<(), BaselineError> {
    if got != want {
        return Err(BaselineError::DimMismatch { got, want });
    }
    Ok(())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Any of the four classical models, with a uniform predict interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Classifier {
    Knn1(Knn1),
    GaussianNb(GaussianNb),
    DecisionTree(DecisionTree),
    RbfSvm(RbfSvm),
}

impl Classifier {
    pub fn kind(&self) -> &'static str {
        match self {
            Classifier::Knn1(_) => "knn1",
            Classifier::GaussianNb(_) => "gaussian_nb",
            Classifier::DecisionTree(_) => "decision_tree",
            Classifier::RbfSvm(_) => "rbf_svm",
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<u16, BaselineError> {
        match self {
            Classifier::Knn1(m) => m.predict(x),
            Classifier::GaussianNb(m) => m.predict(x),
            Classifier::DecisionTree(m) => m.predict(x),
            Classifier::RbfSvm(m) => m.predict(x),
        }
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<u16>, BaselineError> {
        rows.par_iter().map(|r| self.predict(r)).collect()
    }
}

// ---------------------------------------------------------------------------
// 1-nearest-neighbor
// ---------------------------------------------------------------------------

/// Memorizes the training set; predicts the label of the Euclidean-nearest
/// row, ties to the lowest row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn1 {
    dim: usize,
    rows: Vec<Vec<f64>>,
    labels: Vec<u16>,
}

impl Knn1 {
    pub fn fit(x: &[Vec<f64>], y: &[u16]) -> Result<Self, BaselineError> {
        let dim = check_xy(x, y)?;
        Ok(Self {
            dim,
            rows: x.to_vec(),
            labels: y.to_vec(),
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<u16, BaselineError> {
        check_dim(x.len(), self.dim)?;
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, row) in self.rows.iter().enumerate() {
            let d = sq_dist(x, row);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        Ok(self.labels[best])
    }
}

// ---------------------------------------------------------------------------
// Gaussian naive Bayes
// ---------------------------------------------------------------------------

/// Per-class diagonal Gaussians with variance floored at 1e-9; predicts the
/// argmax of log-prior plus summed log densities, ties to the lowest class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    dim: usize,
    /// Ascending class id, log prior, per-feature mean and variance.
    classes: Vec<NbClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbClass {
    pub cls: u16,
    pub log_prior: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

pub const NB_VAR_FLOOR: f64 = 1e-9;

impl GaussianNb {
    pub fn fit(x: &[Vec<f64>], y: &[u16]) -> Result<Self, BaselineError> {
        let dim = check_xy(x, y)?;
        let mut by_class: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
        for (i, &cls) in y.iter().enumerate() {
            by_class.entry(cls).or_default().push(i);
        }
        let n = x.len() as f64;
        let mut classes = Vec::with_capacity(by_class.len());
        for (cls, idx) in by_class {
            if idx.len() < 2 {
                return Err(BaselineError::ClassTooSmall { cls, n: idx.len() });
            }
            let nc = idx.len() as f64;
            let mut mean = vec![0.0; dim];
            for &i in &idx {
                for (m, v) in mean.iter_mut().zip(&x[i]) {
                    *m += v;
                }
            }
            for m in &mut mean {
                *m /= nc;
            }
            let mut var = vec![0.0; dim];
            for &i in &idx {
                for ((s, v), m) in var.iter_mut().zip(&x[i]).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            for s in &mut var {
                *s = (*s / nc).max(NB_VAR_FLOOR);
            }
            classes.push(NbClass {
                cls,
                log_prior: (nc / n).ln(),
                mean,
                var,
            });
        }
        Ok(Self { dim, classes })
    }

    /// Log prior plus sum of per-feature log Gaussian densities.
    pub fn log_posterior(&self, c: &NbClass, x: &[f64]) -> f64 {
        let mut score = c.log_prior;
        for ((v, m), s2) in x.iter().zip(&c.mean).zip(&c.var) {
            score += -0.5 * (2.0 * std::f64::consts::PI * s2).ln() - (v - m) * (v - m) / (2.0 * s2);
        }
        score
    }

    pub fn predict(&self, x: &[f64]) -> Result<u16, BaselineError> {
        check_dim(x.len(), self.dim)?;
        let mut best = self.classes[0].cls;
        let mut best_score = f64::NEG_INFINITY;
        for c in &self.classes {
            let score = self.log_posterior(c, x);
            if score > best_score {
                best_score = score;
                best = c.cls;
            }
        }
        Ok(best)
    }
}

// ---------------------------------------------------------------------------
// CART decision tree
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 16,
            min_leaf: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { cls: u16, n_samples: usize },
    Split { feat: usize, thresh: f64, left: usize, right: usize },
}

/// Binary CART minimizing Gini impurity over midpoint thresholds; ties break
/// to the lowest feature index, then the lowest threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    dim: usize,
    pub params: TreeParams,
    /// Node 0 is the root; split children index into this vec.
    pub nodes: Vec<Node>,
}

/// The split CART would choose, or None if nothing reduces impurity within
/// the leaf-size budget. Gini is computed from integer label counts, so equal
/// candidates compare bit-identically and the tie rule is exact.
fn best_split(
    x: &[Vec<f64>],
    y: &[u16],
    idx: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64, f64)> {
    let dim = x[0].len();
    let n = idx.len();
    let n_classes = usize::from(*y.iter().max().unwrap()) + 1;
    let mut total = vec![0i64; n_classes];
    for &i in idx {
        total[usize::from(y[i])] += 1;
    }
    let gini_of = |sumsq: i64, n: i64| 1.0 - sumsq as f64 / (n as f64 * n as f64);
    let total_sumsq: i64 = total.iter().map(|c| c * c).sum();
    let parent_gini = gini_of(total_sumsq, n as i64);

    let mut best: Option<(f64, usize, f64)> = None; // (weighted gini, feat, thresh)
    let mut order: Vec<usize> = idx.to_vec();
    for feat in 0..dim {
        order.sort_by(|&a, &b| x[a][feat].partial_cmp(&x[b][feat]).unwrap().then(a.cmp(&b)));
        let mut left = vec![0i64; n_classes];
        let mut left_sumsq = 0i64;
        let mut right = total.clone();
        let mut right_sumsq = total_sumsq;
        for (k, &i) in order.iter().enumerate().take(n - 1) {
            let c = usize::from(y[i]);
            left_sumsq += 2 * left[c] + 1;
            left[c] += 1;
            right_sumsq -= 2 * right[c] - 1;
            right[c] -= 1;
            let nl = k + 1;
            let nr = n - nl;
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let (v, next) = (x[i][feat], x[order[k + 1]][feat]);
            if next <= v {
                continue; // no room for a threshold between equal values
            }
            let thresh = (v + next) / 2.0;
            let g = (nl as f64 * gini_of(left_sumsq, nl as i64)
                + nr as f64 * gini_of(right_sumsq, nr as i64))
                / n as f64;
            let better = match best {
                None => true,
                // Strictly-less keeps the earliest (lowest feat, lowest
                // thresh) candidate on exact ties.
                Some((bg, _, _)) => g < bg,
            };
            if better {
                best = Some((g, feat, thresh));
            }
        }
    }
    best.filter(|&(g, _, _)| g < parent_gini)
        .map(|(g, feat, thresh)| (feat, thresh, g))
}

fn majority(y: &[u16], idx: &[usize]) -> u16 {
    let mut counts: BTreeMap<u16, usize> = BTreeMap::new();
    for &i in idx {
        *counts.entry(y[i]).or_insert(0) += 1;
    }
    // BTreeMap iterates ascending; strictly-greater keeps the lowest class.
    let mut best = (0u16, 0usize);
    for (cls, n) in counts {
        if n > best.1 {
            best = (cls, n);
        }
    }
    best.0
}

impl DecisionTree {
    pub fn fit(x: &[Vec<f64>], y: &[u16], params: TreeParams) -> Result<Self, BaselineError> {
        let dim = check_xy(x, y)?;
        let mut tree = Self {
            dim,
            params,
            nodes: Vec::new(),
        };
        let idx: Vec<usize> = (0..x.len()).collect();
        tree.grow(x, y, &idx, 0);
        Ok(tree)
    }

    fn grow(&mut self, x: &[Vec<f64>], y: &[u16], idx: &[usize], depth: usize) -> usize {
        let node_id = self.nodes.len();
        let leaf = Node::Leaf {
            cls: majority(y, idx),
            n_samples: idx.len(),
        };
        self.nodes.push(leaf);
        if depth >= self.params.max_depth || idx.len() < 2 * self.params.min_leaf {
            return node_id;
        }
        let Some((feat, thresh, _)) = best_split(x, y, idx, self.params.min_leaf) else {
            return node_id;
        };
        let (li, ri): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| x[i][feat] <= thresh);
        let left = self.grow(x, y, &li, depth + 1);
        let right = self.grow(x, y, &ri, depth + 1);
        self.nodes[node_id] = Node::Split {
            feat,
            thresh,
            left,
            right,
        };
        node_id
    }

    pub fn predict(&self, x: &[f64]) -> Result<u16, BaselineError> {
        check_dim(x.len(), self.dim)?;
        let mut node = 0usize;
        loop {
            match self.nodes[node] {
                Node::Leaf { cls, .. } => return Ok(cls),
                Node::Split {
                    feat,
                    thresh,
                    left,
                    right,
                } => node = if x[feat] <= thresh { left } else { right },
            }
        }
    }

    /// (depth, n_samples) of every leaf — the structural invariants hook.
    pub fn leaf_stats(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, 0usize)];
        while let Some((node, depth)) = stack.pop() {
            match self.nodes[node] {
                Node::Leaf { n_samples, .. } => out.push((depth, n_samples)),
                Node::Split { left, right, .. } => {
                    stack.push((left, depth + 1));
                    stack.push((right, depth + 1));
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// One-vs-rest RBF SVM via SMO
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    /// KKT tolerance for convergence.
    pub tol: f64,
    /// Hard cap on full sweeps per binary problem.
    pub max_sweeps: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            // At c = 1 the margin is soft enough to underfit overlapping
            // classes; 10 fits them without memorizing the training set.
            c: 10.0,
            gamma: 1.0 / 32.0,
            tol: 1e-3,
            max_sweeps: 150,
        }
    }
}

/// One binary soft-margin machine of the one-vs-rest ensemble: only rows
/// with nonzero dual weight are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub cls: u16,
    pub support: Vec<Vec<f64>>,
    /// alpha_i * t_i per support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfSvm {
    dim: usize,
    pub params: SvmParams,
    pub machines: Vec<BinarySvm>,
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * sq_dist(a, b)).exp()
}

impl RbfSvm {
    pub fn fit(x: &[Vec<f64>], y: &[u16], params: SvmParams) -> Result<Self, BaselineError> {
        let dim = check_xy(x, y)?;
        let mut classes: Vec<u16> = y.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(BaselineError::TooFewClasses { got: classes.len() });
        }
        // Gram matrix shared by all one-vs-rest problems.
        let n = x.len();
        let gram: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| rbf(&x[i], &x[j], params.gamma))
            .collect();
        let machines: Vec<BinarySvm> = classes
            .par_iter()
            .map(|&cls| train_binary(x, y, cls, &gram, n, &params))
            .collect();
        Ok(Self {
            dim,
            params,
            machines,
        })
    }

    /// Signed distance to the separating surface of each machine.
    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<(u16, f64)>, BaselineError> {
        check_dim(x.len(), self.dim)?;
        Ok(self
            .machines
            .iter()
            .map(|m| {
                let f: f64 = m
                    .support
                    .iter()
                    .zip(&m.coef)
                    .map(|(sv, c)| c * rbf(sv, x, self.params.gamma))
                    .sum::<f64>()
                    + m.bias;
                (m.cls, f)
            })
            .collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<u16, BaselineError> {
        let scores = self.decision_values(x)?;
        let mut best = scores[0].0;
        let mut best_f = f64::NEG_INFINITY;
        for (cls, f) in scores {
            if f > best_f {
                best_f = f;
                best = cls;
            }
        }
        Ok(best)
    }

    pub fn all_converged(&self) -> bool {
        self.machines.iter().all(|m| m.converged)
    }
}

/// Sequential minimal optimization for one one-vs-rest problem, deterministic
/// throughout: samples are swept in index order, the partner is the argmax of
/// |E_i - E_j| (lowest j on ties), and there is no random restart.
fn train_binary(
    x: &[Vec<f64>],
    y: &[u16],
    cls: u16,
    gram: &[f64],
    n: usize,
    p: &SvmParams,
) -> BinarySvm {
    let t: Vec<f64> = y.iter().map(|&c| if c == cls { 1.0 } else { -1.0 }).collect();
    let mut alpha = vec![0.0f64; n];
    let mut bias = 0.0f64;
    // E_i = f(x_i) - t_i; with all-zero alphas f == bias == 0.
    let mut err: Vec<f64> = t.iter().map(|ti| -ti).collect();
    let k = |i: usize, j: usize| gram[i * n + j];

    let mut converged = false;
    for _ in 0..p.max_sweeps {
        let mut changed = 0usize;
        for i in 0..n {
            let violates = (t[i] * err[i] < -p.tol && alpha[i] < p.c)
                || (t[i] * err[i] > p.tol && alpha[i] > 0.0);
            if !violates {
                continue;
            }
            // Second-choice heuristic: the partner with the largest |E_i - E_j|.
            let mut j = usize::MAX;
            let mut best_gap = -1.0;
            for cand in 0..n {
                if cand == i {
                    continue;
                }
                let gap = (err[i] - err[cand]).abs();
                if gap > best_gap {
                    best_gap = gap;
                    j = cand;
                }
            }
            if step(i, j, &mut alpha, &mut bias, &mut err, &t, &k, p) {
                changed += 1;
            }
        }
        if changed == 0 {
            converged = true;
            break;
        }
    }

    let mut support = Vec::new();
    let mut coef = Vec::new();
    for i in 0..n {
        if alpha[i] > 0.0 {
            support.push(x[i].clone());
            coef.push(alpha[i] * t[i]);
        }
    }
    BinarySvm {
        cls,
        support,
        coef,
        bias,
        converged,
    }
}

/// One SMO pair update; returns whether the pair moved.
#[allow(clippy::too_many_arguments)]
fn step(
    i: usize,
    j: usize,
    alpha: &mut [f64],
    bias: &mut f64,
    err: &mut [f64],
    t: &[f64],
    k: &impl Fn(usize, usize) -> f64,
    p: &SvmParams,
) -> bool {
    let (ai_old, aj_old) = (alpha[i], alpha[j]);
    let (lo, hi) = if t[i] == t[j] {
        ((ai_old + aj_old - p.c).max(0.0), (ai_old + aj_old).min(p.c))
    } else {
        ((aj_old - ai_old).max(0.0), (p.c + aj_old - ai_old).min(p.c))
    };
    if hi - lo < 1e-12 {
        return false;
    }
    let eta = 2.0 * k(i, j) - k(i, i) - k(j, j);
    if eta >= 0.0 {
        return false; // degenerate curvature; skip (simplified SMO)
    }
    let mut aj = aj_old - t[j] * (err[i] - err[j]) / eta;
    aj = aj.clamp(lo, hi);
    if (aj - aj_old).abs() < 1e-12 {
        return false;
    }
    let ai = ai_old + t[i] * t[j] * (aj_old - aj);
    alpha[i] = ai;
    alpha[j] = aj;

    let b1 = *bias - err[i] - t[i] * (ai - ai_old) * k(i, i) - t[j] * (aj - aj_old) * k(i, j);
    let b2 = *bias - err[j] - t[i] * (ai - ai_old) * k(i, j) - t[j] * (aj - aj_old) * k(j, j);
    let new_bias = if ai > 0.0 && ai < p.c {
        b1
    } else if aj > 0.0 && aj < p.c {
        b2
    } else {
        (b1 + b2) / 2.0
    };
    let db = new_bias - *bias;
    *bias = new_bias;
    for m in 0..err.len() {
        err[m] += t[i] * (ai - ai_old) * k(i, m) + t[j] * (aj - aj_old) * k(j, m) + db;
    }
    true
}
