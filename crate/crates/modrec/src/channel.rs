//! Channel impairments: clock drift, multipath fading, carrier offset, AWGN.
//!
//! [`apply_channel`] composes the four stages in a fixed order — clock drift,
//! then fading, then CFO, then noise — mirroring how a receiver sees them:
//! the sample clock warps the waveform, the air adds multipath, the
//! downconverter leaves a drifting carrier residual, and the front end adds
//! noise. The SNR label is defined against the faded signal's realized power
//! (post-fading, pre-noise), so the label is exact for every frame rather
//! than on average.
//!
//! Every stage draws from its own sub-stream of the caller's [`SeedSpec`], so
//! the whole chain is bit-reproducible and each effect can be regenerated in
//! isolation (the SNR calibration tests rebuild the exact noise realization
//! this way via [`apply_channel_traced`]).

use crate::iq::{gaussian_iq_noise, mean_power, Cpx, SeedSpec};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Impairment strengths for one channel realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Step std of the carrier phase-rate random walk, radians/sample.
    pub cfo_walk_std: f64,
    /// Max initial carrier offset, cycles/sample (drawn uniform in +-max).
    pub cfo_init_max: f64,
    /// Step std of the resampling-ratio random walk (dimensionless).
    pub clk_walk_std: f64,
    /// Max initial resampling-ratio offset from 1.0.
    pub clk_init_max: f64,
    /// Multipath tap count (1 = flat).
    pub n_taps: usize,
    /// Exponential power-delay-profile constant: E[|h_k|^2] ~ e^(-k/decay).
    pub pdp_decay: f64,
    /// Normalized Doppler of tap variation, cycles/sample.
    pub max_doppler: f64,
    /// Target SNR in dB, defined post-fading / pre-noise.
    pub snr_db: f64,
}

impl Default for ChannelParams {
    /// The "harsh" profile used for dataset builds.
    fn default() -> Self {
        Self {
            cfo_walk_std: 1e-4,
            cfo_init_max: 0.01,
            clk_walk_std: 1e-6,
            clk_init_max: 5e-5,
            n_taps: 4,
            pdp_decay: 1.5,
            max_doppler: 0.001,
            snr_db: 0.0,
        }
    }
}

impl ChannelParams {
    /// A parameter set with every impairment off (identity up to noise).
    pub fn clean() -> Self {
        Self {
            cfo_walk_std: 0.0,
            cfo_init_max: 0.0,
            clk_walk_std: 0.0,
            clk_init_max: 0.0,
            n_taps: 1,
            pdp_decay: 1.5,
            max_doppler: 0.0,
            snr_db: 60.0,
        }
    }

    pub fn with_snr(mut self, snr_db: f64) -> Self {
        self.snr_db = snr_db;
        self
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.cfo_walk_std < 0.0
            || self.cfo_init_max < 0.0
            || self.clk_walk_std < 0.0
            || self.clk_init_max < 0.0
            || self.pdp_decay <= 0.0
            || self.max_doppler < 0.0
        {
            return Err(ChannelError::BadParams(
                "impairment strengths must be non-negative and pdp_decay positive".into(),
            ));
        }
        if self.n_taps < 1 {
            return Err(ChannelError::BadParams("n_taps must be at least 1".into()));
        }
        if self.snr_db > MAX_SNR_DB {
            return Err(ChannelError::SnrTooHigh { got: self.snr_db });
        }
        Ok(())
    }

    /// Input length needed so `apply_channel` can emit `n_out` samples: the
    /// fading history plus clock-drift margin (sized at 6 sigma of the walk,
    /// so the "insufficient input margin" error only fires for genuinely
    /// escaped drifts).
    pub fn required_input_len(&self, n_out: usize) -> usize {
        let m = n_out + self.n_taps - 1;
        let worst_ratio = self.clk_init_max + 6.0 * self.clk_walk_std * (m as f64).sqrt();
        m + (m as f64 * worst_ratio).ceil() as usize + 4
    }
}

/// Highest supported SNR; above this the noise floor would be below f64
/// round-off for normalized signals, so it is rejected rather than faked.
pub const MAX_SNR_DB: f64 = 60.0;

/// One of the 21 discrete SNR labels: even dB values in [-20, +20].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SnrLabel(i16);

/// All 21 labels in ascending order.
pub const ALL_SNRS: [i16; 21] = [
    -20, -18, -16, -14, -12, -10, -8, -6, -4, -2, 0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20,
];

impl SnrLabel {
    pub fn new(db: i16) -> Result<Self, ChannelError> {
        if db < -20 || db > 20 || db % 2 != 0 {
            return Err(ChannelError::BadSnrLabel { got: db });
        }
        Ok(Self(db))
    }

    pub fn db(self) -> i16 {
        self.0
    }

    pub fn db_f64(self) -> f64 {
        f64::from(self.0)
    }

    pub fn all() -> impl Iterator<Item = SnrLabel> {
        ALL_SNRS.iter().map(|&db| SnrLabel(db))
    }
}

impl std::fmt::Display for SnrLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("invalid channel params: {0}")]
    BadParams(String),
    #[error("snr label must be an even dB value in [-20, 20], got {got}")]
    BadSnrLabel { got: i16 },
    #[error("snr above +{MAX_SNR_DB} dB is not supported, got {got}")]
    SnrTooHigh { got: f64 },
    #[error("cannot add noise to zero-power signal")]
    ZeroPower,
    #[error("insufficient input margin")]
    InsufficientMargin,
}

// Sub-stream labels, one per effect.
const SUB_CLOCK: u64 = 0x11;
const SUB_FADING: u64 = 0x12;
const SUB_CFO: u64 = 0x13;
const SUB_NOISE: u64 = 0x14;

/// Rotate by a residual carrier whose frequency random-walks.
///
/// The phase starts at zero (any bulk rotation belongs to the fading stage),
/// the initial phase rate is uniform in +-2*pi*cfo_init_max, and each step
/// adds N(0, cfo_walk_std^2). Pure rotation: |y[t]| == |x[t]| exactly.
pub fn apply_cfo(x: &[Cpx], p: &ChannelParams, seed: SeedSpec) -> Vec<Cpx> {
    let mut rng = seed.rng();
    let mut omega: f64 = 2.0 * PI * p.cfo_init_max * (2.0 * rng.gen::<f64>() - 1.0);
    let mut phase: f64 = 0.0;
    x.iter()
        .map(|&s| {
            let y = s * Cpx::new(phase.cos(), phase.sin());
            let step: f64 = StandardNormal.sample(&mut rng);
            omega += p.cfo_walk_std * step;
            phase += omega;
            if phase > PI {
                phase -= 2.0 * PI;
            } else if phase <= -PI {
                phase += 2.0 * PI;
            }
            y
        })
        .collect()
}

/// Resample at a ratio that random-walks around 1.0, by 4-point Lagrange
/// cubic interpolation (exact on cubic sequences, exact pass-through at
/// integer positions). Produces `n_out` samples; errors if the accumulated
/// read position leaves the input.
pub fn apply_clock_drift(
    x: &[Cpx],
    p: &ChannelParams,
    seed: SeedSpec,
    n_out: usize,
) -> Result<Vec<Cpx>, ChannelError> {
    let mut rng = seed.rng();
    let mut ratio: f64 = 1.0 + p.clk_init_max * (2.0 * rng.gen::<f64>() - 1.0);
    let mut pos: f64 = 0.0;
    let last = (x.len() - 1) as f64;
    let mut out = Vec::with_capacity(n_out);
    for _ in 0..n_out {
        if pos < 0.0 || pos > last {
            return Err(ChannelError::InsufficientMargin);
        }
        out.push(interp_cubic(x, pos));
        let step: f64 = StandardNormal.sample(&mut rng);
        ratio += p.clk_walk_std * step;
        pos += ratio;
    }
    Ok(out)
}

/// Lagrange cubic through the 4 samples around `pos` (stencil clamped at the
/// signal edges). At integer `pos` the basis collapses to the center sample
/// exactly, which is what makes the zero-drift channel bit-transparent.
fn interp_cubic(x: &[Cpx], pos: f64) -> Cpx {
    let i = pos.floor() as usize; // caller guarantees 0 <= pos <= len-1
    let mu = pos - i as f64;
    let n = x.len();
    let p0 = x[i.saturating_sub(1)];
    let p1 = x[i];
    let p2 = x[(i + 1).min(n - 1)];
    let p3 = x[(i + 2).min(n - 1)];
    // Lagrange basis on nodes {-1, 0, 1, 2} evaluated at mu.
    let l0 = -mu * (mu - 1.0) * (mu - 2.0) / 6.0;
    let l1 = (mu + 1.0) * (mu - 1.0) * (mu - 2.0) / 2.0;
    let l2 = -(mu + 1.0) * mu * (mu - 2.0) / 2.0;
    let l3 = (mu + 1.0) * mu * (mu - 1.0) / 6.0;
    p0 * l0 + p1 * l1 + p2 * l2 + p3 * l3
}

/// Time-varying multipath: y[t] = sum_k h_k[t] * x[t-k].
///
/// Each tap is a Rayleigh process built from 16 complex sinusoids with
/// random Doppler angles and phases, band-limited to `max_doppler`, with
/// exponential power-delay profile e^(-k/pdp_decay) normalized to unit total
/// power. Missing history at the head (t < k) reads as zero, leaving a
/// transient of `n_taps - 1` samples that `apply_channel` trims away.
///
/// The degenerate flat-static case (`n_taps == 1 && max_doppler == 0`)
/// passes the signal through unchanged: the unit-power static tap y = c*x
/// with |c| = 1, realized at c = 1.
pub fn apply_fading(x: &[Cpx], p: &ChannelParams, seed: SeedSpec) -> Vec<Cpx> {
    if p.n_taps == 1 && p.max_doppler == 0.0 {
        return x.to_vec();
    }
    let taps = FadingTaps::new(p, seed);
    let mut out = vec![Cpx::new(0.0, 0.0); x.len()];
    taps.run(x.len(), |t, k, h| {
        if t >= k {
            out[t] += h * x[t - k];
        }
    });
    out
}

/// The sum-of-sinusoids tap processes, shared by `apply_fading` (zero-prefix
/// convention) and `apply_channel` (full-history convention).
struct FadingTaps {
    /// Per (tap, sinusoid): current phasor and its per-sample rotation.
    osc: Vec<(Cpx, Cpx)>,
    /// Per tap: sqrt(power) / sqrt(n_osc) amplitude scale.
    amp: Vec<f64>,
    n_taps: usize,
}

const N_SINUSOIDS: usize = 16;

impl FadingTaps {
    fn new(p: &ChannelParams, seed: SeedSpec) -> Self {
        let mut rng = seed.rng();
        // Exponential PDP normalized to unit total power.
        let raw: Vec<f64> = (0..p.n_taps).map(|k| (-(k as f64) / p.pdp_decay).exp()).collect();
        let total: f64 = raw.iter().sum();
        let mut osc = Vec::with_capacity(p.n_taps * N_SINUSOIDS);
        for _ in 0..p.n_taps {
            for _ in 0..N_SINUSOIDS {
                let angle: f64 = 2.0 * PI * rng.gen::<f64>();
                let phase: f64 = 2.0 * PI * rng.gen::<f64>();
                let omega = 2.0 * PI * p.max_doppler * angle.cos();
                osc.push((
                    Cpx::new(phase.cos(), phase.sin()),
                    Cpx::new(omega.cos(), omega.sin()),
                ));
            }
        }
        let amp = raw
            .iter()
            .map(|pk| (pk / total).sqrt() / (N_SINUSOIDS as f64).sqrt())
            .collect();
        Self {
            osc,
            amp,
            n_taps: p.n_taps,
        }
    }

    /// Drive `f(t, k, h_k[t])` for t in 0..n, advancing the oscillators one
    /// step per output sample.
    fn run(mut self, n: usize, mut f: impl FnMut(usize, usize, Cpx)) {
        for t in 0..n {
            for k in 0..self.n_taps {
                let mut h = Cpx::new(0.0, 0.0);
                for (phasor, _) in &self.osc[k * N_SINUSOIDS..(k + 1) * N_SINUSOIDS] {
                    h += phasor;
                }
                f(t, k, h * self.amp[k]);
            }
            for (phasor, rot) in &mut self.osc {
                *phasor *= *rot;
            }
        }
    }
}

/// Add circular white Gaussian noise at `snr_db` relative to the realized
/// mean power of `x`.
pub fn add_awgn(x: &[Cpx], snr_db: f64, seed: SeedSpec) -> Result<Vec<Cpx>, ChannelError> {
    if snr_db > MAX_SNR_DB {
        return Err(ChannelError::SnrTooHigh { got: snr_db });
    }
    let p = mean_power(x).map_err(|_| ChannelError::ZeroPower)?;
    if p == 0.0 {
        return Err(ChannelError::ZeroPower);
    }
    let variance = p * 10f64.powf(-snr_db / 10.0);
    let noise = gaussian_iq_noise(x.len(), variance, seed);
    Ok(x.iter().zip(&noise).map(|(s, n)| s + n).collect())
}

/// Everything `apply_channel` produced, kept separate so tests and SNR
/// calibration can measure the exact noise realization.
#[derive(Debug, Clone)]
pub struct ChannelTrace {
    /// The impaired signal (what `apply_channel` returns).
    pub output: Vec<Cpx>,
    /// The same signal just before noise was added.
    pub pre_noise: Vec<Cpx>,
}

impl ChannelTrace {
    /// The realized noise samples (output - pre_noise).
    pub fn noise(&self) -> Vec<Cpx> {
        self.output
            .iter()
            .zip(&self.pre_noise)
            .map(|(y, c)| y - c)
            .collect()
    }
}

/// Run the full impairment chain — clock drift, fading, CFO, AWGN — and trim
/// to `n_out` samples. `x` must be at least `p.required_input_len(n_out)`
/// long (the fading history and clock margin), or the clock stage reports
/// "insufficient input margin".
pub fn apply_channel(
    x: &[Cpx],
    p: &ChannelParams,
    seed: SeedSpec,
    n_out: usize,
) -> Result<Vec<Cpx>, ChannelError> {
    Ok(apply_channel_traced(x, p, seed, n_out)?.output)
}

/// [`apply_channel`] with the pre-noise signal kept alongside the output.
pub fn apply_channel_traced(
    x: &[Cpx],
    p: &ChannelParams,
    seed: SeedSpec,
    n_out: usize,
) -> Result<ChannelTrace, ChannelError> {
    p.validate()?;
    let history = p.n_taps - 1;
    // Clock drift produces the fading stage's full input: n_out samples plus
    // the history the first output sample needs.
    let driven = apply_clock_drift(x, p, seed.derive(SUB_CLOCK), n_out + history)?;

    // Fading with full history: output t draws on driven[t + history - k].
    let faded = if p.n_taps == 1 && p.max_doppler == 0.0 {
        driven
    } else {
        let taps = FadingTaps::new(p, seed.derive(SUB_FADING));
        let mut out = vec![Cpx::new(0.0, 0.0); n_out];
        taps.run(n_out, |t, k, h| {
            out[t] += h * driven[t + history - k];
        });
        out
    };

    let rotated = apply_cfo(&faded, p, seed.derive(SUB_CFO));
    let output = add_awgn(&rotated, p.snr_db, seed.derive(SUB_NOISE))?;
    Ok(ChannelTrace {
        output,
        pre_noise: rotated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iq::gaussian_iq_noise;
    use crate::testutil::power_spectrum;
    use rand::Rng;

    fn unit_noise(n: usize, stream: u64) -> Vec<Cpx> {
        crate::iq::normalize_power(&gaussian_iq_noise(n, 1.0, SeedSpec::new(500, stream))).unwrap()
    }

    #[test]
    fn zeroed_cfo_is_bit_transparent() {
        let x = unit_noise(256, 0);
        let p = ChannelParams {
            cfo_walk_std: 0.0,
            cfo_init_max: 0.0,
            ..ChannelParams::default()
        };
        let y = apply_cfo(&x, &p, SeedSpec::new(1, 0));
        assert_eq!(x, y);
    }

    #[test]
    fn cfo_preserves_magnitudes_exactly() {
        let x = unit_noise(512, 1);
        let p = ChannelParams::default();
        let y = apply_cfo(&x, &p, SeedSpec::new(2, 0));
        for (a, b) in x.iter().zip(&y) {
            assert!(((a.norm() - b.norm()).abs()) < 1e-12);
        }
    }

    #[test]
    fn fixed_cfo_has_constant_phase_slope() {
        // walk std 0: the drawn initial frequency holds for the whole burst,
        // so consecutive phase differences are all equal.
        let x = unit_noise(1024, 2);
        let p = ChannelParams {
            cfo_walk_std: 0.0,
            cfo_init_max: 0.005,
            ..ChannelParams::default()
        };
        let y = apply_cfo(&x, &p, SeedSpec::new(3, 0));
        let rot: Vec<Cpx> = x.iter().zip(&y).map(|(a, b)| b * a.conj()).collect();
        let slopes: Vec<f64> = (1..rot.len())
            .map(|t| (rot[t] * rot[t - 1].conj()).arg())
            .collect();
        let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
        for (t, s) in slopes.iter().enumerate() {
            assert!(
                (s - mean).abs() < 1e-9,
                "slope at {t} is {s}, mean {mean}"
            );
        }
        let f0 = mean / (2.0 * PI);
        assert!(
            f0.abs() <= p.cfo_init_max,
            "initial offset {f0} outside +-{}",
            p.cfo_init_max
        );
        // And it must actually rotate: a zero draw has probability 0.
        assert!(f0.abs() > 1e-6);
    }

    #[test]
    fn zeroed_clock_drift_is_bit_transparent() {
        let x = unit_noise(300, 3);
        let p = ChannelParams {
            clk_walk_std: 0.0,
            clk_init_max: 0.0,
            ..ChannelParams::default()
        };
        let y = apply_clock_drift(&x, &p, SeedSpec::new(4, 0), x.len()).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn clock_drift_interpolates_cubics_exactly() {
        // A cubic sequence in both components; interior reads must be exact
        // to rounding even at fractional positions.
        let n = 200;
        let x: Vec<Cpx> = (0..n)
            .map(|t| {
                let t = t as f64;
                Cpx::new(
                    0.001 * t * t * t - 0.2 * t * t + 3.0 * t - 1.0,
                    -0.002 * t * t * t + 0.1 * t * t - t + 5.0,
                )
            })
            .collect();
        let p = ChannelParams {
            clk_walk_std: 0.0,
            clk_init_max: 0.004, // fixed ratio near 1, fractional positions
            ..ChannelParams::default()
        };
        let seed = SeedSpec::new(5, 0);
        let y = apply_clock_drift(&x, &p, seed, 150).unwrap();

        // Recompute the drawn ratio exactly as the implementation does.
        let mut rng = seed.rng();
        let ratio = 1.0 + p.clk_init_max * (2.0 * rng.gen::<f64>() - 1.0);
        for t in 10..140 {
            let pos = ratio * t as f64;
            let want = Cpx::new(
                0.001 * pos * pos * pos - 0.2 * pos * pos + 3.0 * pos - 1.0,
                -0.002 * pos * pos * pos + 0.1 * pos * pos - pos + 5.0,
            );
            let got = y[t];
            assert!(
                (got - want).norm() < 1e-9 * want.norm().max(1.0),
                "at {t}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn fixed_resampling_ratio_shifts_a_tone() {
        let n = 4096;
        let f = 0.21;
        let x: Vec<Cpx> = (0..2 * n)
            .map(|t| Cpx::new(0.0, 2.0 * PI * f * t as f64).exp())
            .collect();
        let p = ChannelParams {
            clk_walk_std: 0.0,
            clk_init_max: 0.03,
            ..ChannelParams::default()
        };
        // Pick the first stream whose drawn ratio sits well away from 1, so
        // the expected peak lands several bins from the unshifted tone.
        let (seed, ratio) = (0..)
            .map(|s| {
                let seed = SeedSpec::new(6, s);
                let mut rng = seed.rng();
                (seed, 1.0 + p.clk_init_max * (2.0 * rng.gen::<f64>() - 1.0))
            })
            .find(|(_, r)| (r - 1.0).abs() > 0.015)
            .unwrap();
        let y = apply_clock_drift(&x, &p, seed, n).unwrap();

        let spec = power_spectrum(&y);
        let peak = spec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let want = f * ratio * n as f64;
        assert!(
            (peak as f64 - want).abs() <= 1.5,
            "peak bin {peak}, wanted {want:.1} (ratio {ratio})"
        );
        // The shift is real: the unresampled tone sits >= 2 bins away.
        assert!((peak as f64 - f * n as f64).abs() >= 2.0);
    }

    #[test]
    fn escaped_drift_reports_insufficient_margin() {
        let x = unit_noise(100, 4);
        let p = ChannelParams {
            clk_walk_std: 0.0,
            clk_init_max: 0.5, // up to 1.5 samples/step: escapes a 100-sample input
            ..ChannelParams::default()
        };
        // Request more output than the input can cover at ratio > 1.
        let err = apply_clock_drift(&x, &p, SeedSpec::new(12, 0), 100).unwrap_err();
        assert_eq!(err.to_string(), "insufficient input margin");
    }

    #[test]
    fn flat_static_fading_is_identity() {
        let x = unit_noise(256, 5);
        let p = ChannelParams {
            n_taps: 1,
            max_doppler: 0.0,
            ..ChannelParams::default()
        };
        let y = apply_fading(&x, &p, SeedSpec::new(7, 0));
        assert_eq!(x, y);
    }

    #[test]
    fn fading_conserves_power_on_average() {
        let x = unit_noise(512, 6);
        let p = ChannelParams::default();
        let mut acc = 0.0;
        let runs = 500;
        for r in 0..runs {
            let y = apply_fading(&x, &p, SeedSpec::new(8, r));
            acc += mean_power(&y).unwrap();
        }
        let ratio = acc / runs as f64 / mean_power(&x).unwrap();
        assert!(
            (0.95..=1.05).contains(&ratio),
            "average power ratio {ratio} over {runs} fading realizations"
        );
    }

    #[test]
    fn tap_correlation_dies_off_beyond_the_doppler_time() {
        // Estimate the flat tap's autocorrelation by driving an all-ones
        // signal (y[t] == h_0[t]); Jakes-style taps decorrelate on the order
        // of 1/max_doppler samples.
        let n = 4000usize;
        let doppler = 0.01;
        let p = ChannelParams {
            n_taps: 1,
            max_doppler: doppler,
            ..ChannelParams::default()
        };
        let x = vec![Cpx::new(1.0, 0.0); n];
        let lag_far = (1.0 / doppler) as usize; // 100 samples
        let lag_near = 5;
        let mut rho_far = Cpx::new(0.0, 0.0);
        let mut rho_near = Cpx::new(0.0, 0.0);
        let mut denom = 0.0;
        for r in 0..100 {
            let h = apply_fading(&x, &p, SeedSpec::new(9, r));
            for t in 0..n - lag_far {
                rho_far += h[t] * h[t + lag_far].conj();
                rho_near += h[t] * h[t + lag_near].conj();
                denom += h[t].norm_sqr();
            }
        }
        let near = rho_near.norm() / denom;
        let far = rho_far.norm() / denom;
        assert!(near > 0.9, "correlation at lag {lag_near}: {near}");
        assert!(far < 0.5, "correlation at lag {lag_far}: {far}");
    }

    #[test]
    fn awgn_power_is_additive() {
        let x = unit_noise(1_000_000, 7);
        let y = add_awgn(&x, 0.0, SeedSpec::new(10, 0)).unwrap();
        let p = mean_power(&y).unwrap();
        assert!(
            (1.98..=2.02).contains(&p),
            "0 dB SNR output power {p}, wanted ~2"
        );
    }

    #[test]
    fn awgn_bookkeeping_matches_the_label() {
        let x = unit_noise(1_000_000, 8);
        let snr_db = 6.0;
        let seed = SeedSpec::new(11, 0);
        let y = add_awgn(&x, snr_db, seed).unwrap();
        // The exact noise realization is regenerable from the same seed.
        let variance = mean_power(&x).unwrap() * 10f64.powf(-snr_db / 10.0);
        let noise = gaussian_iq_noise(x.len(), variance, seed);
        let p_n = mean_power(&noise).unwrap();
        let p_y = mean_power(&y).unwrap();
        let measured = 10.0 * ((p_y - p_n) / p_n).log10();
        assert!(
            (measured - snr_db).abs() < 0.1,
            "measured SNR {measured} dB, label {snr_db} dB"
        );
    }

    #[test]
    fn awgn_rejects_zero_power_and_extreme_snr() {
        let zero = vec![Cpx::new(0.0, 0.0); 64];
        assert_eq!(
            add_awgn(&zero, 10.0, SeedSpec::new(0, 0)).unwrap_err(),
            ChannelError::ZeroPower
        );
        let x = unit_noise(64, 9);
        let err = add_awgn(&x, 61.0, SeedSpec::new(0, 0)).unwrap_err();
        assert!(err.to_string().contains("+60 dB is not supported"));
    }

    #[test]
    fn sixty_db_noise_is_negligible() {
        let x = unit_noise(4096, 10);
        let y = add_awgn(&x, 60.0, SeedSpec::new(13, 0)).unwrap();
        let diff: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).norm_sqr()).sum();
        let base: f64 = x.iter().map(|a| a.norm_sqr()).sum();
        assert!(
            (diff / base).sqrt() < 1.1e-3,
            "relative perturbation {}",
            (diff / base).sqrt()
        );
    }

    #[test]
    fn zeroed_chain_is_identity_within_the_noise_floor() {
        let p = ChannelParams::clean();
        let n_out = 4096;
        let x = unit_noise(p.required_input_len(n_out), 11);
        let y = apply_channel(&x, &p, SeedSpec::new(14, 0), n_out).unwrap();
        let mut diff = 0.0;
        let mut base = 0.0;
        for t in 0..n_out {
            diff += (y[t] - x[t]).norm_sqr();
            base += x[t].norm_sqr();
        }
        let rel = (diff / base).sqrt();
        assert!(rel < 1.1e-3, "relative error {rel} through the zeroed chain");
    }

    #[test]
    fn chain_is_deterministic_per_seed() {
        let p = ChannelParams::default().with_snr(4.0);
        let x = unit_noise(p.required_input_len(512), 12);
        let seed = SeedSpec::new(15, 3);
        let a = apply_channel(&x, &p, seed, 512).unwrap();
        let b = apply_channel(&x, &p, seed, 512).unwrap();
        assert_eq!(a, b);
        let c = apply_channel(&x, &p, SeedSpec::new(15, 4), 512).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_dominates_at_minus_twenty_db() {
        let p = ChannelParams::default().with_snr(-20.0);
        let n_out = 512;
        let mut ratio_acc = 0.0;
        let runs = 200;
        for r in 0..runs {
            let x = unit_noise(p.required_input_len(n_out), 100 + r);
            let trace = apply_channel_traced(&x, &p, SeedSpec::new(16, r), n_out).unwrap();
            let p_signal = mean_power(&trace.pre_noise).unwrap();
            let p_total = mean_power(&trace.output).unwrap();
            ratio_acc += p_total / p_signal;
        }
        let avg = ratio_acc / runs as f64;
        // Power budget: signal + 100x noise = 101x the signal power.
        assert!(
            (avg - 101.0).abs() < 5.0,
            "total/signal power ratio {avg}, wanted 101 +- 5%"
        );
    }

    #[test]
    fn snr_label_validation() {
        assert!(SnrLabel::new(-20).is_ok());
        assert!(SnrLabel::new(20).is_ok());
        assert_eq!(SnrLabel::new(7).unwrap_err(), ChannelError::BadSnrLabel { got: 7 });
        assert_eq!(SnrLabel::new(22).unwrap_err(), ChannelError::BadSnrLabel { got: 22 });
        assert_eq!(SnrLabel::all().count(), 21);
        assert_eq!(format!("{}", SnrLabel::new(-8).unwrap()), "-8");
    }
}
