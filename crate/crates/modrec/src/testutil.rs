//! Shared helpers for unit tests: spectral estimates and closed-form
//! statistics used as independent oracles. Test-only code; never part of the
//! shipped API.

use crate::iq::Cpx;
use rustfft::{num_complex::Complex64 as FftCpx, FftPlanner};
use std::f64::consts::PI;

/// Hann-windowed power spectrum, |X[k]|^2 per bin, bin k at frequency
/// k / n cycles per sample (negative frequencies in the upper half).
/// The window keeps leakage sidelobes ~31 dB down so tone/image power
/// measurements aren't polluted by rectangular-window skirts.
pub fn power_spectrum(x: &[Cpx]) -> Vec<f64> {
    let n = x.len();
    let mut buf: Vec<FftCpx> = x
        .iter()
        .enumerate()
        .map(|(t, s)| {
            let w = 0.5 - 0.5 * (2.0 * PI * t as f64 / n as f64).cos();
            FftCpx::new(s.re * w, s.im * w)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter().map(|c| c.norm_sqr()).collect()
}

/// Gaussian tail probability Q(x) = P(N(0,1) > x), via the Abramowitz-Stegun
/// 7.1.26 erfc approximation (|error| < 1.5e-7, ample for BER oracles).
pub fn q_func(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_func_matches_tabulated_values() {
        // Standard normal tail values to 3+ significant figures.
        for (x, want) in [(0.0, 0.5), (1.0, 0.15866), (2.24, 0.012545), (4.47, 3.91e-6)] {
            let got = q_func(x);
            assert!(
                (got - want).abs() / want < 2e-3,
                "Q({x}) = {got}, wanted {want}"
            );
        }
    }

    #[test]
    fn spectrum_of_a_pure_tone_peaks_at_its_bin() {
        let n = 1024;
        let f = 100.0 / n as f64;
        let x: Vec<Cpx> = (0..n)
            .map(|t| Cpx::new(0.0, 2.0 * PI * f * t as f64).exp())
            .collect();
        let spec = power_spectrum(&x);
        let peak = spec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, 100);
    }
}
