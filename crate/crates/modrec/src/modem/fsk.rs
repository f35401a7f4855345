//! Binary FSK, in phase-continuous and phase-discontinuous flavors.
//!
//! Both variants place their tones at +-h / (2 * sps) cycles per sample
//! (modulation index h, default 0.5). CPFSK runs a single phase accumulator
//! whose rate switches with the data, so the phase trajectory is continuous.
//! BFSK models two free-running tone oscillators and switches between them at
//! symbol boundaries, which leaves phase jumps at the switch instants — the
//! classic non-coherent transmitter behavior, and the thing that makes the
//! two classes distinguishable at all.

use super::{ModClass, ModemConfig, ModemError};
use crate::iq::Cpx;
use std::f64::consts::PI;

/// Modulate one bit per symbol onto two tones. Bit 0 takes the negative
/// tone, bit 1 the positive. Output is `bits.len() * sps` unit-magnitude
/// samples.
pub fn modulate_fsk(
    cls: ModClass,
    bits: &[bool],
    cfg: &ModemConfig,
) -> Result<Vec<Cpx>, ModemError> {
    if !cls.is_fsk() {
        return Err(ModemError::NotFsk(cls.name()));
    }
    // Per-sample phase step of the positive tone: 2 * pi * h / (2 * sps).
    let dphi = PI * cfg.fsk_mod_index / cfg.sps as f64;
    let mut out = Vec::with_capacity(bits.len() * cfg.sps);
    match cls {
        ModClass::Cpfsk => {
            let mut phase: f64 = 0.0;
            for &bit in bits {
                let step = if bit { dphi } else { -dphi };
                for _ in 0..cfg.sps {
                    phase = wrap(phase + step);
                    out.push(Cpx::new(phase.cos(), phase.sin()));
                }
            }
        }
        ModClass::Bfsk => {
            // Two independent oscillators run through the whole burst; the
            // data only selects which one reaches the output.
            let mut phase_pos: f64 = 0.0;
            let mut phase_neg: f64 = 0.0;
            for &bit in bits {
                for _ in 0..cfg.sps {
                    phase_pos = wrap(phase_pos + dphi);
                    phase_neg = wrap(phase_neg - dphi);
                    let phase = if bit { phase_pos } else { phase_neg };
                    out.push(Cpx::new(phase.cos(), phase.sin()));
                }
            }
        }
        _ => unreachable!("guarded by is_fsk"),
    }
    Ok(out)
}

/// Keep an accumulating phase in (-pi, pi] so long bursts lose no precision.
fn wrap(phase: f64) -> f64 {
    if phase > PI {
        phase - 2.0 * PI
    } else if phase <= -PI {
        phase + 2.0 * PI
    } else {
        phase
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iq::SeedSpec;
    use crate::testutil::power_spectrum;
    use rand::Rng;

    fn random_bits(n: usize, seed: u64) -> Vec<bool> {
        let mut rng = SeedSpec::new(seed, 0).rng();
        (0..n).map(|_| rng.gen()).collect()
    }

    #[test]
    fn envelope_is_exactly_constant() {
        let cfg = ModemConfig::default();
        for cls in [ModClass::Bfsk, ModClass::Cpfsk] {
            let x = modulate_fsk(cls, &random_bits(256, 5), &cfg).unwrap();
            for (t, s) in x.iter().enumerate() {
                assert!(
                    (s.norm() - 1.0).abs() < 1e-12,
                    "{} sample {t} magnitude {}",
                    cls.name(),
                    s.norm()
                );
            }
        }
    }

    #[test]
    fn cpfsk_phase_steps_never_exceed_the_tone_rate() {
        let cfg = ModemConfig::default();
        let x = modulate_fsk(ModClass::Cpfsk, &random_bits(128, 9), &cfg).unwrap();
        let bound = PI * cfg.fsk_mod_index / cfg.sps as f64 + 1e-9;
        for t in 1..x.len() {
            let step = (x[t] * x[t - 1].conj()).arg().abs();
            assert!(
                step <= bound,
                "phase step {step} at sample {t} exceeds {bound}"
            );
        }
    }

    #[test]
    fn bfsk_jumps_phase_at_symbol_boundaries() {
        let cfg = ModemConfig::default();
        let x = modulate_fsk(ModClass::Bfsk, &random_bits(128, 9), &cfg).unwrap();
        let bound = PI * cfg.fsk_mod_index / cfg.sps as f64 + 1e-9;
        let jumps = (1..x.len())
            .filter(|&t| (x[t] * x[t - 1].conj()).arg().abs() > bound)
            .count();
        assert!(
            jumps > 10,
            "only {jumps} phase discontinuities in 128 random symbols"
        );
    }

    #[test]
    fn constant_bits_produce_a_pure_tone_at_the_deviation() {
        // All-ones data ramps the phase linearly, so both variants collapse
        // to a single tone at +h / (2 * sps) cycles per sample.
        let cfg = ModemConfig::default();
        let tone = cfg.fsk_mod_index / (2.0 * cfg.sps as f64);
        for cls in [ModClass::Bfsk, ModClass::Cpfsk] {
            let x = modulate_fsk(cls, &vec![true; 512], &cfg).unwrap();
            let spec = power_spectrum(&x);
            let n = spec.len();
            let peak = spec
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            let want = tone * n as f64;
            assert!(
                (peak as f64 - want).abs() <= 1.0,
                "{}: peak bin {peak}, wanted {want:.1}",
                cls.name()
            );
        }
    }

    #[test]
    fn bfsk_alternating_bits_put_spectral_peaks_at_both_tones() {
        // The free-running oscillators gate on and off with 50% duty, so the
        // strongest line on each side of DC sits at the tone frequency.
        // (CPFSK under alternating data is a narrowband phase triangle whose
        // spectrum concentrates at DC instead, so only BFSK is asserted.)
        let cfg = ModemConfig::default();
        let bits: Vec<bool> = (0..512).map(|i| i % 2 == 0).collect();
        let x = modulate_fsk(ModClass::Bfsk, &bits, &cfg).unwrap();
        let spec = power_spectrum(&x);
        let n = spec.len();
        let pos = spec[..n / 2]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let neg = spec[n / 2..]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0
            + n / 2;
        let tone = cfg.fsk_mod_index / (2.0 * cfg.sps as f64);
        let want_pos = tone * n as f64;
        let want_neg = n as f64 - want_pos;
        assert!(
            (pos as f64 - want_pos).abs() <= 2.0,
            "positive peak bin {pos}, wanted {want_pos:.1}"
        );
        assert!(
            (neg as f64 - want_neg).abs() <= 2.0,
            "negative peak bin {neg}, wanted {want_neg:.1}"
        );
    }

    #[test]
    fn non_fsk_classes_are_rejected() {
        let cfg = ModemConfig::default();
        let err = modulate_fsk(ModClass::Qpsk, &[true], &cfg).unwrap_err();
        assert_eq!(err.to_string(), "QPSK is not an FSK class");
    }
}
