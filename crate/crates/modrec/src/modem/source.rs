//! Synthetic payload sources: whitened bits and a speech-like audio stand-in.
//!
//! No recorded corpus ships with the crate, so both payload kinds are drawn
//! from seeded streams. The audio source is band-limited filtered noise plus
//! two incommensurate tones, with zero-amplitude "silence" segments gated in
//! at a 10% duty cycle — those silent stretches are what make WBFM and AM-DSB
//! windows genuinely confusable, the way carrier-only pauses do on air.

use super::scramble::whiten_bits;
use crate::iq::SeedSpec;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

/// Payload kind selector for [`synth_source`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Bits,
    AudioLike,
}

/// A generated payload: bits for the digital classes, audio for the analog
/// ones.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Bits(Vec<bool>),
    Audio(Vec<f64>),
}

/// Low-pass prototype for the audio spectrum, cycles per sample.
const AUDIO_CUTOFF: f64 = 0.03;
const AUDIO_LP_TAPS: usize = 65;
/// Two tones at incommensurate frequencies ride on the filtered noise.
const TONE_FREQS: [f64; 2] = [0.0113, 0.0183];
const TONE_AMPS: [f64; 2] = [0.5, 0.35];
/// Silence gating: each block may be zeroed with this probability. The first
/// block is exempt so no payload is silent end to end (an all-silent payload
/// would modulate SSB into an un-normalizable zero signal).
const SILENCE_BLOCK: usize = 640;
const SILENCE_PROB: f64 = 0.10;
/// Post-gating peak level, leaving headroom inside [-1, 1].
const PEAK_LEVEL: f64 = 0.95;

/// Draw `n` payload samples from the seed's stream. Deterministic: the same
/// `(kind, n, seed)` triple always returns the same payload.
pub fn synth_source(kind: SourceKind, n: usize, seed: SeedSpec) -> Payload {
    let mut rng = seed.rng();
    match kind {
        SourceKind::Bits => {
            let raw: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
            Payload::Bits(whiten_bits(&raw))
        }
        SourceKind::AudioLike => {
            // Filtered Gaussian noise, generated with lead-in so the n kept
            // samples are all filter steady state.
            let lead = AUDIO_LP_TAPS - 1;
            let white: Vec<f64> = (0..n + lead).map(|_| StandardNormal.sample(&mut rng)).collect();
            let lp = lowpass_taps();
            let mut audio = vec![0.0f64; n];
            for (t, a) in audio.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, h) in lp.iter().enumerate() {
                    acc += h * white[t + lead - j];
                }
                *a = acc;
            }

            // Tones with seeded phases.
            let phases: [f64; 2] = [rng.gen::<f64>() * 2.0 * PI, rng.gen::<f64>() * 2.0 * PI];
            for (t, a) in audio.iter_mut().enumerate() {
                for k in 0..2 {
                    *a += TONE_AMPS[k] * (2.0 * PI * TONE_FREQS[k] * t as f64 + phases[k]).cos();
                }
            }

            // Exact zero mean, then silence gating (which keeps the mean
            // small: each gated block removes a near-zero-mean slice).
            let mean = audio.iter().sum::<f64>() / n as f64;
            for a in &mut audio {
                *a -= mean;
            }
            let n_blocks = n.div_ceil(SILENCE_BLOCK);
            for b in 1..n_blocks {
                if rng.gen::<f64>() < SILENCE_PROB {
                    let end = ((b + 1) * SILENCE_BLOCK).min(n);
                    audio[b * SILENCE_BLOCK..end].fill(0.0);
                }
            }

            // Peak-normalize into [-1, 1] with headroom.
            let peak = audio.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            if peak > 0.0 {
                let g = PEAK_LEVEL / peak;
                for a in &mut audio {
                    *a *= g;
                }
            }
            Payload::Audio(audio)
        }
    }
}

/// Windowed-sinc low-pass with unit DC gain.
fn lowpass_taps() -> Vec<f64> {
    let m = (AUDIO_LP_TAPS - 1) as f64;
    let mut taps: Vec<f64> = (0..AUDIO_LP_TAPS)
        .map(|i| {
            let t = i as f64 - m / 2.0;
            let sinc = if t == 0.0 {
                2.0 * AUDIO_CUTOFF
            } else {
                (2.0 * PI * AUDIO_CUTOFF * t).sin() / (PI * t)
            };
            let hamming = 0.54 - 0.46 * (2.0 * PI * i as f64 / m).cos();
            sinc * hamming
        })
        .collect();
    let dc: f64 = taps.iter().sum();
    for h in &mut taps {
        *h /= dc;
    }
    taps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iq::Cpx;
    use crate::testutil::power_spectrum;

    fn audio(n: usize, seed: SeedSpec) -> Vec<f64> {
        match synth_source(SourceKind::AudioLike, n, seed) {
            Payload::Audio(a) => a,
            Payload::Bits(_) => unreachable!(),
        }
    }

    #[test]
    fn audio_is_bounded_and_nearly_zero_mean() {
        for master in 0..5 {
            let a = audio(100_000, SeedSpec::new(master, 0));
            let peak = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mean = a.iter().sum::<f64>() / a.len() as f64;
            assert!(peak <= 1.0, "peak {peak} out of range");
            assert!(mean.abs() < 0.01, "mean {mean} too large (seed {master})");
        }
    }

    #[test]
    fn audio_is_band_limited() {
        let a = audio(16384, SeedSpec::new(3, 1));
        let x: Vec<Cpx> = a.iter().map(|&v| Cpx::new(v, 0.0)).collect();
        let spec = power_spectrum(&x);
        let n = spec.len();
        // Out-of-band: beyond 3x the design cutoff on either side.
        let edge = (3.0 * AUDIO_CUTOFF * n as f64) as usize;
        let total: f64 = spec.iter().sum();
        let out_of_band: f64 = spec[edge..n - edge].iter().sum();
        assert!(
            out_of_band / total < 1e-3,
            "out-of-band fraction {}",
            out_of_band / total
        );
    }

    #[test]
    fn audio_contains_silent_segments_at_roughly_ten_percent_duty() {
        // Average the exactly-zero fraction over many seeds; each block past
        // the first is silent with probability 0.1.
        let mut zero_frac_sum = 0.0;
        let trials = 30;
        for master in 0..trials {
            let a = audio(SILENCE_BLOCK * 10, SeedSpec::new(1000 + master, 0));
            let zeros = a.iter().filter(|&&v| v == 0.0).count();
            zero_frac_sum += zeros as f64 / a.len() as f64;
        }
        let avg = zero_frac_sum / trials as f64;
        assert!(
            (0.04..=0.16).contains(&avg),
            "average silent fraction {avg}, wanted ~0.09"
        );
    }

    #[test]
    fn first_block_is_never_silent() {
        for master in 0..50 {
            let a = audio(SILENCE_BLOCK * 3, SeedSpec::new(master, 7));
            let head_energy: f64 = a[..SILENCE_BLOCK].iter().map(|v| v * v).sum();
            assert!(head_energy > 0.0, "silent head block at seed {master}");
        }
    }

    #[test]
    fn sources_are_deterministic_per_seed() {
        let seed = SeedSpec::new(12, 34);
        assert_eq!(
            synth_source(SourceKind::AudioLike, 4096, seed),
            synth_source(SourceKind::AudioLike, 4096, seed)
        );
        assert_eq!(
            synth_source(SourceKind::Bits, 4096, seed),
            synth_source(SourceKind::Bits, 4096, seed)
        );
        assert_ne!(
            synth_source(SourceKind::Bits, 4096, seed),
            synth_source(SourceKind::Bits, 4096, SeedSpec::new(12, 35))
        );
    }

    #[test]
    fn bit_source_is_balanced() {
        let bits = match synth_source(SourceKind::Bits, 100_000, SeedSpec::new(0, 0)) {
            Payload::Bits(b) => b,
            Payload::Audio(_) => unreachable!(),
        };
        let ones = bits.iter().filter(|&&b| b).count() as f64 / bits.len() as f64;
        assert!((0.49..=0.51).contains(&ones), "ones fraction {ones}");
    }
}
