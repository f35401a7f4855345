//! Network assembly: layer specs, the three stock architectures, seeded
//! weight initialization, and the forward/backward walk with the CNN's
//! penalty terms (L2 on convolution weights, L1 on the first dense layer's
//! activation) folded into the gradients.

use super::layers::{
    conv2d_backward, conv2d_forward, conv_out_hw, dense_backward, dense_forward, dropout,
    dropout_backward, relu_backward, relu_forward, softmax, DropMask, LayerError,
};
use super::tensor::Tensor;
use crate::iq::SeedSpec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const N_CLASSES: usize = crate::modem::ALL_CLASSES.len();

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("layer {index} ({kind}): {reason}")]
    BadLayer {
        index: usize,
        kind: String,
        reason: String,
    },
    #[error("model must end with exactly one softmax layer")]
    BadTerminal,
    #[error("l1 activation penalty set but no dense+relu pair exists")]
    NoPenaltyTarget,
    #[error(transparent)]
    Layer(#[from] LayerError),
}

/// One layer of a network description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv { filters: usize, kh: usize, kw: usize },
    Dense { units: usize },
    Relu,
    Dropout { rate: f64 },
    Flatten,
    Softmax,
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Relu => "relu",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Softmax => "softmax",
        }
    }
}

/// A full network description: input item shape, layer list, and the two
/// penalty coefficients (zero disables a penalty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub l2_conv: f64,
    pub l1_act: f64,
}

impl ModelSpec {
    /// Two small convolution layers and two dense layers over raw 2x128 IQ
    /// frames, with both penalty terms active.
    pub fn cnn() -> Self {
        Self::conv_net("cnn", 64, 16, 128, 0.5, 1e-4, 1e-5)
    }

    /// The wider variant: 256 and 80 filters, a 256-unit dense layer, and
    /// dropout 0.6 as the only regularizer.
    pub fn cnn2() -> Self {
        Self::conv_net("cnn2", 256, 80, 256, 0.6, 0.0, 0.0)
    }

    fn conv_net(
        name: &str,
        f1: usize,
        f2: usize,
        dense_units: usize,
        drop: f64,
        l2_conv: f64,
        l1_act: f64,
    ) -> Self {
        Self {
            name: name.to_string(),
            input_shape: vec![1, 2, crate::dataset::WINDOW],
            layers: vec![
                LayerSpec::Conv { filters: f1, kh: 1, kw: 3 },
                LayerSpec::Relu,
                LayerSpec::Dropout { rate: drop },
                LayerSpec::Conv { filters: f2, kh: 2, kw: 3 },
                LayerSpec::Relu,
                LayerSpec::Dropout { rate: drop },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: dense_units },
                LayerSpec::Relu,
                LayerSpec::Dropout { rate: drop },
                LayerSpec::Dense { units: N_CLASSES },
                LayerSpec::Softmax,
            ],
            l2_conv,
            l1_act,
        }
    }

    /// Dense 512 -> 256 -> 128 -> classes over the 32 expert features.
    pub fn dnn_feat() -> Self {
        let mut layers = Vec::new();
        for units in [512, 256, 128] {
            layers.push(LayerSpec::Dense { units });
            layers.push(LayerSpec::Relu);
            layers.push(LayerSpec::Dropout { rate: 0.5 });
        }
        layers.push(LayerSpec::Dense { units: N_CLASSES });
        layers.push(LayerSpec::Softmax);
        Self {
            name: "dnn_feat".to_string(),
            input_shape: vec![crate::features::FEATURE_COUNT],
            layers,
            l2_conv: 0.0,
            l1_act: 0.0,
        }
    }

    /// Look up a stock architecture by its name.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "cnn" => Some(Self::cnn()),
            "cnn2" => Some(Self::cnn2()),
            "dnn_feat" => Some(Self::dnn_feat()),
            _ => None,
        }
    }
}

/// One built layer: the spec plus its weights, if it has any.
#[derive(Debug, Clone)]
pub enum Layer {
    Conv { w: Tensor, b: Vec<f64> },
    Dense { w: Tensor, b: Vec<f64> },
    Relu,
    Dropout { rate: f64 },
    Flatten,
    Softmax,
}

/// Everything the backward pass needs from a training forward pass: the
/// activation at every layer boundary (ending at the logits) and the
/// dropout masks drawn along the way.
pub struct ForwardTrace {
    pub acts: Vec<Tensor>,
    pub masks: Vec<Option<DropMask>>,
}

/// A built network: weights, per-boundary item shapes, and the boundary the
/// L1 activation penalty attaches to.
#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub layers: Vec<Layer>,
    /// Item shape (no batch dim) entering each layer; last entry is the output.
    pub shapes: Vec<Vec<usize>>,
    /// Index of the relu layer whose output carries the L1 penalty, if any.
    pub l1_layer: Option<usize>,
}

fn glorot_uniform(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
}

impl Model {
    /// Walk the spec, checking shape compatibility at every boundary, and
    /// draw the initial weights from the seeded generator (biases zero).
    pub fn build(spec: ModelSpec, seed: SeedSpec) -> Result<Model, ModelError> {
        let mut rng = seed.rng();
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut shapes = vec![spec.input_shape.clone()];
        let bad = |index: usize, ls: &LayerSpec, reason: String| ModelError::BadLayer {
            index,
            kind: ls.kind().to_string(),
            reason,
        };
        for (i, ls) in spec.layers.iter().enumerate() {
            let cur = shapes.last().unwrap().clone();
            let next = match ls {
                LayerSpec::Conv { filters, kh, kw } => {
                    let [c, h, w] = cur[..] else {
                        return Err(bad(i, ls, format!("needs a 3-d input, got {cur:?}")));
                    };
                    let (oh, ow) = conv_out_hw(h, w, *kh, *kw)?;
                    let fan_in = c * kh * kw;
                    let wt = Tensor::from_vec(
                        &[*filters, c, *kh, *kw],
                        glorot_uniform(&mut rng, fan_in, filters * kh * kw, filters * fan_in),
                    )
                    .expect("init length matches shape");
                    layers.push(Layer::Conv { w: wt, b: vec![0.0; *filters] });
                    vec![*filters, oh, ow]
                }
                LayerSpec::Dense { units } => {
                    let [n_in] = cur[..] else {
                        return Err(bad(i, ls, format!("needs a flat input, got {cur:?}")));
                    };
                    let wt = Tensor::from_vec(
                        &[*units, n_in],
                        glorot_uniform(&mut rng, n_in, *units, units * n_in),
                    )
                    .expect("init length matches shape");
                    layers.push(Layer::Dense { w: wt, b: vec![0.0; *units] });
                    vec![*units]
                }
                LayerSpec::Relu => {
                    layers.push(Layer::Relu);
                    cur
                }
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(rate) {
                        return Err(LayerError::BadDropRate { got: *rate }.into());
                    }
                    layers.push(Layer::Dropout { rate: *rate });
                    cur
                }
                LayerSpec::Flatten => {
                    layers.push(Layer::Flatten);
                    vec![cur.iter().product()]
                }
                LayerSpec::Softmax => {
                    if i + 1 != spec.layers.len() {
                        return Err(ModelError::BadTerminal);
                    }
                    layers.push(Layer::Softmax);
                    cur
                }
            };
            shapes.push(next);
        }
        if !matches!(spec.layers.last(), Some(LayerSpec::Softmax)) {
            return Err(ModelError::BadTerminal);
        }

        let l1_layer = if spec.l1_act != 0.0 {
            let first_dense = spec
                .layers
                .iter()
                .position(|l| matches!(l, LayerSpec::Dense { .. }))
                .ok_or(ModelError::NoPenaltyTarget)?;
            match spec.layers.get(first_dense + 1) {
                Some(LayerSpec::Relu) => Some(first_dense + 1),
                _ => return Err(ModelError::NoPenaltyTarget),
            }
        } else {
            None
        };

        Ok(Model { spec, layers, shapes, l1_layer })
    }

    fn check_input(&self, x: &Tensor) -> Result<(), ModelError> {
        if x.shape.len() != self.shapes[0].len() + 1 || x.shape[1..] != self.shapes[0][..] {
            return Err(LayerError::ShapeMismatch {
                want: format!("[batch, {:?}]", self.shapes[0]),
                got: format!("{:?}", x.shape),
            }
            .into());
        }
        Ok(())
    }

    fn batched_shape(&self, boundary: usize, batch: usize) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.shapes[boundary].len() + 1);
        s.push(batch);
        s.extend_from_slice(&self.shapes[boundary]);
        s
    }

    /// Training-mode forward pass: dropout active, stops at the logits (the
    /// softmax layer is folded into the loss).
    pub fn forward_train(
        &self,
        x: &Tensor,
        rng: &mut ChaCha8Rng,
    ) -> Result<ForwardTrace, ModelError> {
        self.check_input(x)?;
        let batch = x.batch();
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut masks: Vec<Option<DropMask>> = Vec::with_capacity(self.layers.len());
        acts.push(x.clone());
        for (k, layer) in self.layers.iter().enumerate() {
            let cur = acts.last().unwrap();
            let (next, mask) = match layer {
                Layer::Conv { w, b } => (conv2d_forward(cur, w, b)?, None),
                Layer::Dense { w, b } => (dense_forward(cur, w, b)?, None),
                Layer::Relu => (relu_forward(cur), None),
                Layer::Dropout { rate } => {
                    let (y, m) = dropout(cur, *rate, rng)?;
                    (y, Some(m))
                }
                Layer::Flatten => (
                    cur.clone()
                        .reshape(&self.batched_shape(k + 1, batch))
                        .expect("flatten preserves element count"),
                    None,
                ),
                Layer::Softmax => break,
            };
            acts.push(next);
            masks.push(mask);
        }
        Ok(ForwardTrace { acts, masks })
    }

    /// Evaluation-mode logits: dropout is the identity, softmax withheld.
    pub fn forward_logits(&self, x: &Tensor) -> Result<Tensor, ModelError> {
        self.check_input(x)?;
        let batch = x.batch();
        let mut cur = x.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            cur = match layer {
                Layer::Conv { w, b } => conv2d_forward(&cur, w, b)?,
                Layer::Dense { w, b } => dense_forward(&cur, w, b)?,
                Layer::Relu => relu_forward(&cur),
                Layer::Dropout { .. } => cur,
                Layer::Flatten => cur
                    .reshape(&self.batched_shape(k + 1, batch))
                    .expect("flatten preserves element count"),
                Layer::Softmax => break,
            };
        }
        Ok(cur)
    }

    /// Evaluation-mode class probabilities, one row per frame.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor, ModelError> {
        Ok(softmax(&self.forward_logits(x)?))
    }

    /// Backward pass from d(loss)/d(logits), injecting the L1 activation
    /// penalty at its boundary and the L2 penalty into conv weight
    /// gradients. Returns gradients in [`Model::params`] order.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        grad_logits: Tensor,
    ) -> Result<Vec<Vec<f64>>, ModelError> {
        let batch = trace.acts[0].batch();
        let n_weighted = self
            .layers
            .iter()
            .filter(|l| matches!(l, Layer::Conv { .. } | Layer::Dense { .. }))
            .count();
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); 2 * n_weighted];
        let mut slot = 2 * n_weighted;
        let mut grad = grad_logits;
        let l1_scale = self.spec.l1_act / batch as f64;
        for (k, layer) in self.layers.iter().enumerate().rev() {
            if matches!(layer, Layer::Softmax) {
                continue;
            }
            if self.l1_layer == Some(k) {
                for (g, &a) in grad.data.iter_mut().zip(&trace.acts[k + 1].data) {
                    // Subgradient of |a|: zero at a == 0.
                    if a != 0.0 {
                        *g += l1_scale * a.signum();
                    }
                }
            }
            match layer {
                Layer::Conv { w, .. } => {
                    let (gx, mut gw, gb) = conv2d_backward(&trace.acts[k], w, &grad)?;
                    if self.spec.l2_conv != 0.0 {
                        for (g, &wv) in gw.data.iter_mut().zip(&w.data) {
                            *g += 2.0 * self.spec.l2_conv * wv;
                        }
                    }
                    slot -= 2;
                    grads[slot] = gw.data;
                    grads[slot + 1] = gb;
                    grad = gx;
                }
                Layer::Dense { w, .. } => {
                    let (gx, gw, gb) = dense_backward(&trace.acts[k], w, &grad)?;
                    slot -= 2;
                    grads[slot] = gw.data;
                    grads[slot + 1] = gb;
                    grad = gx;
                }
                Layer::Relu => grad = relu_backward(&trace.acts[k], &grad),
                Layer::Dropout { .. } => {
                    let mask = trace.masks[k].as_ref().expect("dropout layer has a mask");
                    grad = dropout_backward(&grad, mask);
                }
                Layer::Flatten => {
                    grad = grad
                        .reshape(&trace.acts[k].shape)
                        .expect("flatten preserves element count");
                }
                Layer::Softmax => unreachable!(),
            }
        }
        Ok(grads)
    }

    /// Penalty part of the objective: l2·Σ‖W_conv‖² plus l1·mean over the
    /// batch of Σ|h| at the penalized activation.
    pub fn penalty(&self, trace: &ForwardTrace) -> f64 {
        let mut p = 0.0;
        if self.spec.l2_conv != 0.0 {
            for layer in &self.layers {
                if let Layer::Conv { w, .. } = layer {
                    p += self.spec.l2_conv * w.data.iter().map(|v| v * v).sum::<f64>();
                }
            }
        }
        if let Some(r) = self.l1_layer {
            let h = &trace.acts[r + 1];
            p += self.spec.l1_act * h.data.iter().map(|v| v.abs()).sum::<f64>()
                / trace.acts[0].batch() as f64;
        }
        p
    }

    /// Weight slices in a fixed order: per weighted layer, weights then bias.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv { w, b } | Layer::Dense { w, b } => {
                    out.push(w.data.as_slice());
                    out.push(b.as_slice());
                }
                _ => {}
            }
        }
        out
    }

    /// Mutable view of the same slices, same order as [`Model::params`].
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv { w, b } | Layer::Dense { w, b } => {
                    out.push(w.data.as_mut_slice());
                    out.push(b.as_mut_slice());
                }
                _ => {}
            }
        }
        out
    }

    /// Total number of trainable scalars.
    pub fn n_params(&self) -> usize {
        self.params().iter().map(|s| s.len()).sum()
    }
}
