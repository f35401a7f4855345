//! Root-raised-cosine pulse shaping.
//!
//! The filter is expressed in closed form with the two removable
//! singularities (t = 0 and |t| = 1/(4 beta)) evaluated by their limits, then
//! scaled to unit energy so a matched cascade is exactly Nyquist: the
//! raised-cosine product sampled at symbol spacing is 1 at the center tap and
//! ~0 everywhere else.

use super::{ModemConfig, ModemError};
use crate::iq::Cpx;
use std::f64::consts::PI;

/// Unit-energy root-raised-cosine taps: `span * sps + 1` of them, symmetric
/// about the center, with `t` measured in symbol periods.
pub fn rrc_taps(beta: f64, sps: usize, span: usize) -> Result<Vec<f64>, ModemError> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(ModemError::BadBeta { got: beta });
    }
    let len = span * sps + 1;
    let center = (len - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..len)
        .map(|i| {
            let t = (i as f64 - center) / sps as f64;
            rrc_impulse(t, beta)
        })
        .collect();
    let energy: f64 = taps.iter().map(|h| h * h).sum();
    let g = 1.0 / energy.sqrt();
    for h in &mut taps {
        *h *= g;
    }
    Ok(taps)
}

/// The un-normalized RRC impulse response at time `t` symbols.
fn rrc_impulse(t: f64, beta: f64) -> f64 {
    const EPS: f64 = 1e-9;
    if t.abs() < EPS {
        return 1.0 + beta * (4.0 / PI - 1.0);
    }
    let fourbt = 4.0 * beta * t;
    if (fourbt.abs() - 1.0).abs() < EPS {
        // Limit at |t| = 1/(4 beta), where the closed form is 0/0.
        let a = (PI / (4.0 * beta)).sin();
        let b = (PI / (4.0 * beta)).cos();
        return beta / 2.0f64.sqrt() * ((1.0 + 2.0 / PI) * a + (1.0 - 2.0 / PI) * b);
    }
    let num = (PI * t * (1.0 - beta)).sin() + fourbt * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - fourbt * fourbt);
    num / den
}

/// Zero-stuff symbols to `sps` samples each and convolve with the RRC filter.
///
/// Output is the full convolution: `symbols.len() * sps + taps - 1` samples,
/// with the filter's group delay of `span * sps / 2` baked in. Callers that
/// want steady state only (no ramp-in/out) drop `taps - 1` samples at the
/// front and back.
pub fn pulse_shape(symbols: &[Cpx], cfg: &ModemConfig) -> Result<Vec<Cpx>, ModemError> {
    let taps = rrc_taps(cfg.rrc_beta, cfg.sps, cfg.rrc_span)?;
    let n_up = symbols.len() * cfg.sps;
    let mut out = vec![Cpx::new(0.0, 0.0); n_up + taps.len() - 1];
    // The upsampled train is sparse (one nonzero per sps), so scatter each
    // symbol through the filter instead of convolving densely.
    for (k, s) in symbols.iter().enumerate() {
        let base = k * cfg.sps;
        for (j, h) in taps.iter().enumerate() {
            out[base + j] += s * h;
        }
    }
    Ok(out)
}

/// Full (dense) convolution of a complex signal with a real FIR filter.
/// Output length is `x.len() + h.len() - 1`.
pub fn convolve_full(x: &[Cpx], h: &[f64]) -> Vec<Cpx> {
    let mut out = vec![Cpx::new(0.0, 0.0); x.len() + h.len() - 1];
    for (i, xi) in x.iter().enumerate() {
        for (j, hj) in h.iter().enumerate() {
            out[i + j] += xi * hj;
        }
    }
    out
}
