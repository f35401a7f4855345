//! Layer primitives: valid-mode convolution (im2col + GEMM), dense affine,
//! ReLU, softmax, and inverted dropout — forward and exact backward.
//!
//! Convolutions run per sample: the patch matrix of one input is materialized
//! (a few hundred KB) and multiplied against the filter bank, so batch memory
//! stays proportional to the activations, not to an all-batch patch matrix.
//! A quadruple-nested reference implementation lives in the tests as the
//! oracle the fast path must match to 1e-12.

use super::tensor::{gemm_acc, transpose, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LayerError {
    #[error("kernel {kh}x{kw} exceeds input {h}x{w}")]
    KernelTooLarge {
        kh: usize,
        kw: usize,
        h: usize,
        w: usize,
    },
    #[error("layer expected input shape {want}, got {got}")]
    ShapeMismatch { want: String, got: String },
    #[error("dropout rate must be in [0, 1), got {got}")]
    BadDropRate { got: f64 },
}

fn shape_err(want: impl std::fmt::Debug, got: &[usize]) -> LayerError {
    LayerError::ShapeMismatch {
        want: format!("{want:?}"),
        got: format!("{got:?}"),
    }
}

/// Output spatial size of a valid-mode convolution.
pub fn conv_out_hw(h: usize, w: usize, kh: usize, kw: usize) -> Result<(usize, usize), LayerError> {
    if kh > h || kw > w {
        return Err(LayerError::KernelTooLarge { kh, kw, h, w });
    }
    Ok((h - kh + 1, w - kw + 1))
}

/// Patch matrix of one sample, row-major [oh*ow, c*kh*kw]: row p lists the
/// receptive field of output position p.
fn im2col(x: &[f64], c: usize, h: usize, w: usize, kh: usize, kw: usize, col: &mut [f64]) {
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let ck = c * kh * kw;
    for oi in 0..oh {
        for oj in 0..ow {
            let row = (oi * ow + oj) * ck;
            let mut k = 0;
            for ch in 0..c {
                for di in 0..kh {
                    let base = ch * h * w + (oi + di) * w + oj;
                    col[row + k..row + k + kw].copy_from_slice(&x[base..base + kw]);
                    k += kw;
                }
            }
        }
    }
}

/// Scatter-add of a patch-matrix gradient back onto the input layout.
fn col2im(col: &[f64], c: usize, h: usize, w: usize, kh: usize, kw: usize, gx: &mut [f64]) {
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let ck = c * kh * kw;
    for oi in 0..oh {
        for oj in 0..ow {
            let row = (oi * ow + oj) * ck;
            let mut k = 0;
            for ch in 0..c {
                for di in 0..kh {
                    let base = ch * h * w + (oi + di) * w + oj;
                    for dj in 0..kw {
                        gx[base + dj] += col[row + k + dj];
                    }
                    k += kw;
                }
            }
        }
    }
}

/// Valid-mode cross-correlation, stride 1:
/// out[s, f, i, j] = b[f] + sum over (c, di, dj) of x[s, c, i+di, j+dj] * w[f, c, di, dj].
pub fn conv2d_forward(x: &Tensor, w: &Tensor, bias: &[f64]) -> Result<Tensor, LayerError> {
    let [batch, c, h, wd] = x.shape[..] else {
        return Err(shape_err("[batch, c, h, w]", &x.shape));
    };
    let [f, wc, kh, kw] = w.shape[..] else {
        return Err(shape_err("[filters, c, kh, kw]", &w.shape));
    };
    if wc != c || bias.len() != f {
        return Err(shape_err(&w.shape, &x.shape));
    }
    let (oh, ow) = conv_out_hw(h, wd, kh, kw)?;
    let (ck, ohw) = (c * kh * kw, oh * ow);

    let mut out = Tensor::zeros(&[batch, f, oh, ow]);
    let mut col = vec![0.0; ohw * ck];
    let mut col_t = vec![0.0; ck * ohw];
    for s in 0..batch {
        let xs = &x.data[s * c * h * wd..(s + 1) * c * h * wd];
        im2col(xs, c, h, wd, kh, kw, &mut col);
        col_t.copy_from_slice(&transpose(&col, ohw, ck));
        let ys = &mut out.data[s * f * ohw..(s + 1) * f * ohw];
        for (fi, y) in ys.chunks_exact_mut(ohw).enumerate() {
            y.fill(bias[fi]);
        }
        // y[f, p] += w[f, ck] * col_t[ck, p]
        gemm_acc(ys, &w.data, &col_t, f, ck, ohw);
    }
    Ok(out)
}

/// Exact gradients of [`conv2d_forward`]: returns (grad_x, grad_w, grad_b).
pub fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Vec<f64>), LayerError> {
    let [batch, c, h, wd] = x.shape[..] else {
        return Err(shape_err("[batch, c, h, w]", &x.shape));
    };
    let [f, _, kh, kw] = w.shape[..] else {
        return Err(shape_err("[filters, c, kh, kw]", &w.shape));
    };
    let (oh, ow) = conv_out_hw(h, wd, kh, kw)?;
    if grad_out.shape != [batch, f, oh, ow] {
        return Err(shape_err([batch, f, oh, ow], &grad_out.shape));
    }
    let (ck, ohw) = (c * kh * kw, oh * ow);

    let mut gx = Tensor::zeros(&x.shape);
    let mut gw = Tensor::zeros(&w.shape);
    let mut gb = vec![0.0; f];
    let mut col = vec![0.0; ohw * ck];
    let mut gcol = vec![0.0; ohw * ck];
    for s in 0..batch {
        let xs = &x.data[s * c * h * wd..(s + 1) * c * h * wd];
        let gys = &grad_out.data[s * f * ohw..(s + 1) * f * ohw];
        for (fi, gy) in gys.chunks_exact(ohw).enumerate() {
            gb[fi] += gy.iter().sum::<f64>();
        }
        // gw[f, ck] += gy[f, p] * col[p, ck]
        im2col(xs, c, h, wd, kh, kw, &mut col);
        gemm_acc(&mut gw.data, gys, &col, f, ohw, ck);
        // gcol[p, ck] = gy_t[p, f] * w[f, ck], then scatter back to gx
        let gy_t = transpose(gys, f, ohw);
        gcol.fill(0.0);
        gemm_acc(&mut gcol, &gy_t, &w.data, ohw, f, ck);
        col2im(
            &gcol,
            c,
            h,
            wd,
            kh,
            kw,
            &mut gx.data[s * c * h * wd..(s + 1) * c * h * wd],
        );
    }
    Ok((gx, gw, gb))
}

/// y = x * W^T + b for x: [batch, in], W: [out, in].
pub fn dense_forward(x: &Tensor, w: &Tensor, bias: &[f64]) -> Result<Tensor, LayerError> {
    let [batch, n_in] = x.shape[..] else {
        return Err(shape_err("[batch, in]", &x.shape));
    };
    let [n_out, win] = w.shape[..] else {
        return Err(shape_err("[out, in]", &w.shape));
    };
    if win != n_in || bias.len() != n_out {
        return Err(shape_err(&w.shape, &x.shape));
    }
    let mut out = Tensor::zeros(&[batch, n_out]);
    for (row, _) in out.data.chunks_exact_mut(n_out).zip(0..batch) {
        row.copy_from_slice(bias);
    }
    let w_t = transpose(&w.data, n_out, n_in);
    gemm_acc(&mut out.data, &x.data, &w_t, batch, n_in, n_out);
    Ok(out)
}

/// Gradients of [`dense_forward`]: (grad_x, grad_w, grad_b).
pub fn dense_backward(
    x: &Tensor,
    w: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Vec<f64>), LayerError> {
    let [batch, n_in] = x.shape[..] else {
        return Err(shape_err("[batch, in]", &x.shape));
    };
    let [n_out, _] = w.shape[..] else {
        return Err(shape_err("[out, in]", &w.shape));
    };
    if grad_out.shape != [batch, n_out] {
        return Err(shape_err([batch, n_out], &grad_out.shape));
    }
    let mut gx = Tensor::zeros(&x.shape);
    gemm_acc(&mut gx.data, &grad_out.data, &w.data, batch, n_out, n_in);
    let mut gw = Tensor::zeros(&w.shape);
    let gy_t = transpose(&grad_out.data, batch, n_out);
    gemm_acc(&mut gw.data, &gy_t, &x.data, n_out, batch, n_in);
    let mut gb = vec![0.0; n_out];
    for row in grad_out.data.chunks_exact(n_out) {
        for (g, v) in gb.iter_mut().zip(row) {
            *g += v;
        }
    }
    Ok((gx, gw, gb))
}

pub fn relu_forward(x: &Tensor) -> Tensor {
    Tensor {
        shape: x.shape.clone(),
        data: x.data.iter().map(|&v| v.max(0.0)).collect(),
    }
}

/// Masks the upstream gradient where the forward input was non-positive.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Tensor {
    Tensor {
        shape: x.shape.clone(),
        data: x
            .data
            .iter()
            .zip(&grad_out.data)
            .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
            .collect(),
    }
}

/// Row-wise softmax over the last dimension of a [batch, k] tensor,
/// max-shifted for stability.
pub fn softmax(logits: &Tensor) -> Tensor {
    let k = *logits.shape.last().expect("softmax needs a class dim");
    let mut out = logits.clone();
    for row in out.data.chunks_exact_mut(k) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Per-unit keep decisions of one inverted-dropout pass: 1 marks a survivor,
/// scaled by 1/(1-rate) in the output.
#[derive(Debug, Clone)]
pub struct DropMask {
    pub keep: Vec<u8>,
    pub scale: f64,
}

/// Inverted dropout, train mode: zero each unit with probability `rate` and
/// scale survivors by 1/(1-rate), so the expectation matches eval mode
/// (which is the identity and never calls this).
pub fn dropout(
    x: &Tensor,
    rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Tensor, DropMask), LayerError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(LayerError::BadDropRate { got: rate });
    }
    let scale = 1.0 / (1.0 - rate);
    let mut out = x.clone();
    let mut keep = vec![1u8; x.numel()];
    if rate > 0.0 {
        for (v, k) in out.data.iter_mut().zip(&mut keep) {
            if rng.gen::<f64>() < rate {
                *v = 0.0;
                *k = 0;
            } else {
                *v *= scale;
            }
        }
    }
    Ok((out, DropMask { keep, scale }))
}

/// Backward of [`dropout`] under the same mask.
pub fn dropout_backward(grad_out: &Tensor, mask: &DropMask) -> Tensor {
    Tensor {
        shape: grad_out.shape.clone(),
        data: grad_out
            .data
            .iter()
            .zip(&mask.keep)
            .map(|(&g, &k)| if k == 1 { g * mask.scale } else { 0.0 })
            .collect(),
    }
}
