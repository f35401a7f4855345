//! Dense row-major tensors and the one matrix kernel everything runs on.
//!
//! The GEMM uses a fixed i-k-j loop order with no fused multiply-add, so
//! every forward and backward pass is a fixed sequence of IEEE operations:
//! two runs with the same seed produce bit-identical trajectories.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("shape {shape:?} implies {want} elements, data holds {got}")]
    LengthMismatch {
        shape: Vec<usize>,
        want: usize,
        got: usize,
    },
    #[error("cannot reshape {from:?} ({a} elements) to {to:?} ({b} elements)")]
    ReshapeMismatch {
        from: Vec<usize>,
        to: Vec<usize>,
        a: usize,
        b: usize,
    },
}

/// Row-major n-dimensional array of f64 (at most 4 dims in practice:
/// batch, channels, height, width).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, TensorError> {
        let want: usize = shape.iter().product();
        if data.len() != want {
            return Err(TensorError::LengthMismatch {
                shape: shape.to_vec(),
                want,
                got: data.len(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Same data, new shape (element counts must agree).
    pub fn reshape(mut self, shape: &[usize]) -> Result<Self, TensorError> {
        let want: usize = shape.iter().product();
        if want != self.data.len() {
            return Err(TensorError::ReshapeMismatch {
                from: self.shape.clone(),
                to: shape.to_vec(),
                a: self.data.len(),
                b: want,
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Leading dimension, i.e. the batch size of an activation tensor.
    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Elements per batch item.
    pub fn item_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    /// New tensor holding the listed batch items, in the order given.
    pub fn gather(&self, idx: &[usize]) -> Tensor {
        let il = self.item_len();
        let mut shape = self.shape.clone();
        shape[0] = idx.len();
        let mut data = Vec::with_capacity(idx.len() * il);
        for &i in idx {
            data.extend_from_slice(&self.data[i * il..(i + 1) * il]);
        }
        Tensor { shape, data }
    }
}

/// C += A * B with A: m x k, B: k x n, C: m x n, all row-major.
pub fn gemm_acc(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aik = a[i * k + p];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                crow[j] += aik * brow[j];
            }
        }
    }
}

/// Row-major transpose copy: out is n x m for a: m x n.
pub fn transpose(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}
