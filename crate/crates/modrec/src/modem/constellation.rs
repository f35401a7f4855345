//! Gray-coded symbol mappers for the linear digital classes.
//!
//! Every constellation is scaled to unit average energy over a uniform symbol
//! distribution, so pulse shaping sees the same drive level for all classes.

use super::{ModClass, ModemError};
use crate::iq::Cpx;
use std::f64::consts::PI;

/// Map a whitened bit stream onto constellation points.
///
/// Bits are consumed most-significant first in groups of
/// `cls.bits_per_symbol()`; the group indexes the class constellation through
/// a Gray code, so nearest-neighbor symbol errors cost one bit.
pub fn map_symbols(cls: ModClass, bits: &[bool]) -> Result<Vec<Cpx>, ModemError> {
    let bps = cls
        .bits_per_symbol()
        .filter(|_| cls.is_linear_digital())
        .ok_or(ModemError::NotDigital(cls.name()))?;
    if bits.len() % bps != 0 {
        return Err(ModemError::BitCount {
            n_bits: bits.len(),
            bits_per_symbol: bps,
        });
    }
    let points = constellation_points(cls).expect("linear class has a constellation");
    Ok(bits
        .chunks_exact(bps)
        .map(|group| {
            let v = group.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
            points[v]
        })
        .collect())
}

/// The unit-average-energy constellation for a linear digital class, indexed
/// by the natural value of the symbol's bit group (MSB first).
pub fn constellation_points(cls: ModClass) -> Option<Vec<Cpx>> {
    match cls {
        ModClass::Bpsk => Some(vec![Cpx::new(1.0, 0.0), Cpx::new(-1.0, 0.0)]),
        ModClass::Qpsk => Some(psk_points(2)),
        ModClass::Psk8 => Some(psk_points(3)),
        ModClass::Qam16 => Some(qam_points(2)),
        ModClass::Qam64 => Some(qam_points(3)),
        ModClass::Pam4 => {
            // Gray-coded 4-level PAM at unit average energy: E[l^2] = 5.
            let scale = 1.0 / 5.0f64.sqrt();
            Some(
                (0..4)
                    .map(|v| Cpx::new(axis_level(v, 2) * scale, 0.0))
                    .collect(),
            )
        }
        _ => None,
    }
}

/// M-PSK points at phases pi * (2c + 1) / M for Gray position c, indexed by
/// bit pattern. All points sit on the unit circle.
fn psk_points(bits: usize) -> Vec<Cpx> {
    let m = 1 << bits;
    (0..m)
        .map(|v| {
            let c = gray_position(v);
            let phase = PI * (2 * c + 1) as f64 / m as f64;
            Cpx::new(phase.cos(), phase.sin())
        })
        .collect()
}

/// Square QAM with an independent Gray code per axis. The bit group splits
/// MSB-half onto I and LSB-half onto Q.
fn qam_points(bits_per_axis: usize) -> Vec<Cpx> {
    let levels = 1usize << bits_per_axis;
    // E[l^2] over levels {+-1, +-3, ...} is (levels^2 - 1) / 3 per axis.
    let axis_energy = ((levels * levels - 1) as f64) / 3.0;
    let scale = 1.0 / (2.0 * axis_energy).sqrt();
    let m = levels * levels;
    (0..m)
        .map(|v| {
            let vi = v >> bits_per_axis;
            let vq = v & (levels - 1);
            Cpx::new(
                axis_level(vi, bits_per_axis) * scale,
                axis_level(vq, bits_per_axis) * scale,
            )
        })
        .collect()
}

/// Amplitude level for a per-axis bit pattern: Gray position c maps to
/// 2c - (levels - 1), so patterns of adjacent levels differ in one bit.
fn axis_level(v: usize, bits: usize) -> f64 {
    let levels = 1usize << bits;
    let c = gray_position(v);
    (2 * c) as f64 - (levels - 1) as f64
}

/// Position of bit pattern `v` in the reflected Gray sequence (inverse Gray
/// code): the c with c ^ (c >> 1) == v.
fn gray_position(v: usize) -> usize {
    let mut c = v;
    let mut shift = 1;
    while (c >> shift) != 0 {
        c ^= c >> shift;
        shift <<= 1;
    }
    c
}
