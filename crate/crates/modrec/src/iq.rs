//! Core IQ sample types, seeded random streams, and power helpers.
//!
//! Every stochastic stage in the crate draws from a [`SeedSpec`]: a master
//! seed plus a stream id, mapped onto an independent ChaCha8 stream. Frames,
//! noise, channel impairments, weight init, and shuffles all take one, which
//! is what makes whole runs bit-reproducible.
//!
//! Arithmetic is `f64` end to end; datasets serialize samples as `f32` (see
//! [`crate::dataset`]), which is why frames that round-trip through disk are
//! quantized to `f32` precision at build time.

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// One complex baseband sample. Components must stay finite; constructors
/// that admit external data ([`IqFrame::new`], the dataset loader) enforce it.
pub type Cpx = Complex64;

/// Samples per analysis frame, fixed across the whole pipeline.
pub const FRAME_LEN: usize = 128;

/// Errors from the IQ core operations.
#[derive(Debug, Error, PartialEq)]
pub enum IqError {
    #[error("empty signal")]
    EmptySignal,
    #[error("cannot normalize zero signal")]
    ZeroSignal,
    #[error("frame must contain {FRAME_LEN} samples, got {got}")]
    BadFrameLen { got: usize },
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
}

/// A fixed-length window of 128 complex samples, the unit every classifier
/// consumes. Construction validates length and finiteness.
#[derive(Debug, Clone, PartialEq)]
pub struct IqFrame {
    samples: Vec<Cpx>,
}

impl IqFrame {
    /// Wrap a 128-sample window, rejecting wrong lengths and non-finite values.
    pub fn new(samples: Vec<Cpx>) -> Result<Self, IqError> {
        if samples.len() != FRAME_LEN {
            return Err(IqError::BadFrameLen { got: samples.len() });
        }
        if let Some(index) = samples
            .iter()
            .position(|s| !s.re.is_finite() || !s.im.is_finite())
        {
            return Err(IqError::NonFinite { index });
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[Cpx] {
        &self.samples
    }
}

/// Master seed plus stream id, addressing one independent ChaCha8 stream.
///
/// Convention used by the dataset builder: `stream_id` is the global frame /
/// signal index, and each consumer stage derives its own sub-stream with
/// [`SeedSpec::derive`] at a fixed label. The master-seed-to-key expansion
/// (SplitMix64) is part of the on-disk reproducibility contract: changing it
/// changes every generated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// Sub-stream at a fixed label, independent of the parent and of other
    /// labels. Used to give each effect (source bits, fading, noise, ...) its
    /// own stream without coordinating draw counts.
    pub fn derive(&self, label: u64) -> Self {
        Self {
            master_seed: splitmix64(&mut (self.master_seed ^ label.wrapping_mul(GOLDEN))),
            stream_id: self.stream_id,
        }
    }

    /// The deterministic generator for this (master, stream) pair.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.master_seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_id);
        rng
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean of |x[t]|² over the signal.
pub fn mean_power(x: &[Cpx]) -> Result<f64, IqError> {
    if x.is_empty() {
        return Err(IqError::EmptySignal);
    }
    Ok(x.iter().map(|s| s.norm_sqr()).sum::<f64>() / x.len() as f64)
}

/// Scale a signal to unit mean power. The gain is a single positive real, so
/// phases are untouched and the operation is idempotent.
pub fn normalize_power(x: &[Cpx]) -> Result<Vec<Cpx>, IqError> {
    let p = mean_power(x)?;
    if p == 0.0 {
        return Err(IqError::ZeroSignal);
    }
    let g = 1.0 / p.sqrt();
    Ok(x.iter().map(|s| s * g).collect())
}

/// `n` samples of circular complex Gaussian noise with total variance
/// `variance` (`variance / 2` per real component), deterministic per seed.
pub fn gaussian_iq_noise(n: usize, variance: f64, seed: SeedSpec) -> Vec<Cpx> {
    let mut rng = seed.rng();
    let sigma = (variance / 2.0).sqrt();
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Cpx::new(re * sigma, im * sigma)
        })
        .collect()
}

/// In-place radix-2 FFT; `inverse` applies the conjugate transform and the
/// 1/n scale, so forward-then-inverse is the identity. Bin k of the forward
/// transform is frequency k/n cycles per sample (negative frequencies in the
/// upper half).
///
/// Panics if the length is not a power of two (zero included).
pub fn fft_inplace(x: &mut [Cpx], inverse: bool) {
    let n = x.len();
    assert!(n.is_power_of_two(), "fft length {n} is not a power of two");
    if n == 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            x.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * std::f64::consts::PI / len as f64;
        let w_len = Cpx::new(ang.cos(), ang.sin());
        for start in (0..n).step_by(len) {
            let mut w = Cpx::new(1.0, 0.0);
            for k in start..start + len / 2 {
                let u = x[k];
                let v = x[k + len / 2] * w;
                x[k] = u + v;
                x[k + len / 2] = u - v;
                w *= w_len;
            }
        }
        len <<= 1;
    }
    if inverse {
        let scale = 1.0 / n as f64;
        for v in x.iter_mut() {
            *v *= scale;
        }
    }
}
