//! Cyclic-moment expert features: 32 statistics per 128-sample frame.
//!
//! For each cyclic lag in {0, 8} the frame is reduced to a lag product
//! (`lag 0` is the frame itself; `lag 8` is `x[t] * conj(x[t+8])`), and for
//! each of four views of that product — the complex values, their amplitude,
//! their phase, and the absolute phase — the first two moments of the first
//! two powers are taken. Complex-valued statistics are reduced to reals by
//! magnitude. That is 2 lags x 4 transforms x 2 powers x 2 moments = 32
//! features, in exactly that nesting order (lag-major, moment innermost).
//!
//! The square collapse that makes these features informative: squaring a
//! BPSK signal removes its +-1 phase flips, so the second-power complex mean
//! jumps while the first-power mean stays near zero; QPSK needs the fourth
//! power, amplitude moments separate constant-envelope from amplitude-bearing
//! classes, and the lag-8 product exposes symbol-rate cyclostationarity.

use crate::dataset::Dataset;
use crate::iq::{Cpx, IqFrame};
use crate::modem::ModClass;
use crate::channel::SnrLabel;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

/// Number of expert features per frame.
pub const FEATURE_COUNT: usize = 32;
/// Cyclic lags, in feature order.
pub const LAGS: [usize; 2] = [0, 8];

const TRANSFORM_NAMES: [&str; 4] = ["complex", "amp", "phase", "absphase"];

/// The 32 features of one frame, in the documented order.
pub type FeatureVector = [f64; FEATURE_COUNT];

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("lag {lag} must be smaller than the frame length {len}")]
    LagTooLarge { lag: usize, len: usize },
    #[error("cannot fit statistics on an empty matrix")]
    EmptyMatrix,
}

/// Column names, index-aligned with [`FeatureVector`].
pub fn feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(FEATURE_COUNT);
    for lag in LAGS {
        for t in TRANSFORM_NAMES {
            for power in [1, 2] {
                for moment in [1, 2] {
                    names.push(format!("lag{lag}_{t}_p{power}_m{moment}"));
                }
            }
        }
    }
    names
}

/// The conjugate lag product: lag 0 returns the frame unchanged; lag l > 0
/// returns `x[t] * conj(x[t+l])`, one sample shorter per unit of lag.
pub fn lag_product(x: &IqFrame, lag: usize) -> Result<Vec<Cpx>, FeatureError> {
    let s = x.samples();
    if lag >= s.len() {
        return Err(FeatureError::LagTooLarge { lag, len: s.len() });
    }
    if lag == 0 {
        return Ok(s.to_vec());
    }
    Ok((0..s.len() - lag).map(|t| s[t] * s[t + lag].conj()).collect())
}

/// Principal-value phase with `arg(0)` defined as 0 so features stay finite.
fn phase_of(z: Cpx) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        0.0
    } else {
        z.arg()
    }
}

/// First (`moment = 1`) or central second (`moment = 2`) moment of the four
/// transforms of `y` raised to `power`: complex y^n (reduced by magnitude),
/// |y|^n, arg(y)^n, |arg(y)|^n — returned in that order.
pub fn moment_stats(y: &[Cpx], power: u32, moment: u32) -> [f64; 4] {
    assert!(!y.is_empty(), "moment_stats needs at least one sample");
    assert!((1..=2).contains(&power) && (1..=2).contains(&moment));
    let n = y.len() as f64;
    let p = power as i32;

    let mut sum_z = Cpx::new(0.0, 0.0);
    let (mut sum_a, mut sum_ph, mut sum_aph) = (0.0, 0.0, 0.0);
    for &v in y {
        sum_z += v.powi(p);
        sum_a += v.norm().powi(p);
        let ph = phase_of(v);
        sum_ph += ph.powi(p);
        sum_aph += ph.abs().powi(p);
    }
    let mean_z = sum_z / n;
    let (mean_a, mean_ph, mean_aph) = (sum_a / n, sum_ph / n, sum_aph / n);
    if moment == 1 {
        return [mean_z.norm(), mean_a, mean_ph, mean_aph];
    }

    let mut var_z = Cpx::new(0.0, 0.0);
    let (mut var_a, mut var_ph, mut var_aph) = (0.0, 0.0, 0.0);
    for &v in y {
        let d = v.powi(p) - mean_z;
        var_z += d * d; // complex square, not |d|^2: the spread keeps its orientation
        var_a += (v.norm().powi(p) - mean_a).powi(2);
        let ph = phase_of(v);
        var_ph += (ph.powi(p) - mean_ph).powi(2);
        var_aph += (ph.abs().powi(p) - mean_aph).powi(2);
    }
    [
        (var_z / n).norm(),
        var_a / n,
        var_ph / n,
        var_aph / n,
    ]
}

/// The full 32-feature vector of one frame.
pub fn extract_features(x: &IqFrame) -> FeatureVector {
    let mut out = [0.0; FEATURE_COUNT];
    for (li, &lag) in LAGS.iter().enumerate() {
        let y = lag_product(x, lag).expect("fixed lags are below the frame length");
        for power in 1..=2u32 {
            for moment in 1..=2u32 {
                let stats = moment_stats(&y, power, moment);
                for (ti, &v) in stats.iter().enumerate() {
                    out[li * 16 + ti * 4 + (power as usize - 1) * 2 + (moment as usize - 1)] = v;
                }
            }
        }
    }
    out
}

/// Feature rows plus the labels they came from, row-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureVector>,
    pub classes: Vec<ModClass>,
    pub snrs: Vec<SnrLabel>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Featurize every frame of a dataset (row i = features of frame i).
pub fn featurize_dataset(ds: &Dataset) -> FeatureMatrix {
    let rows: Vec<FeatureVector> = ds
        .frames
        .par_iter()
        .map(|f| extract_features(&f.frame))
        .collect();
    FeatureMatrix {
        rows,
        classes: ds.frames.iter().map(|f| f.cls).collect(),
        snrs: ds.frames.iter().map(|f| f.snr).collect(),
    }
}

/// Per-column mean/std fitted on the training split only; applying it to
/// val/test reuses the train statistics so no test information leaks into
/// the preprocessing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: [f64; FEATURE_COUNT],
    pub std: [f64; FEATURE_COUNT],
}

impl Standardizer {
    pub fn fit(rows: &[FeatureVector]) -> Result<Self, FeatureError> {
        if rows.is_empty() {
            return Err(FeatureError::EmptyMatrix);
        }
        let n = rows.len() as f64;
        let mut mean = [0.0; FEATURE_COUNT];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut std = [0.0; FEATURE_COUNT];
        for r in rows {
            for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        for s in &mut std {
            *s = (*s / n).sqrt();
            // A constant column carries no information; unit scale leaves it
            // harmlessly at zero after centering.
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        Ok(Self { mean, std })
    }

    pub fn transform_row(&self, row: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; FEATURE_COUNT];
        for i in 0..FEATURE_COUNT {
            out[i] = (row[i] - self.mean[i]) / self.std[i];
        }
        out
    }

    pub fn transform(&self, rows: &[FeatureVector]) -> Vec<FeatureVector> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}

/// Write a feature matrix as CSV: `class,snr,<32 feature columns>`.
pub fn export_features_csv(fm: &FeatureMatrix, path: &Path) -> std::io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "class,snr,{}", feature_names().join(","))?;
    for i in 0..fm.len() {
        write!(w, "{},{}", fm.classes[i].name(), fm.snrs[i])?;
        for v in &fm.rows[i] {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iq::{gaussian_iq_noise, SeedSpec, FRAME_LEN};
    use crate::modem::{generate_signal, ModemConfig};
    use std::f64::consts::PI;

    fn frame_of(samples: Vec<Cpx>) -> IqFrame {
        IqFrame::new(samples).unwrap()
    }

    #[test]
    fn lag_product_contracts() {
        let c = Cpx::new(0.6, -0.8);
        let constant = frame_of(vec![c; FRAME_LEN]);
        for lag in [0, 1, 8, 127] {
            let y = lag_product(&constant, lag).unwrap();
            assert_eq!(y.len(), FRAME_LEN - lag.min(1) * lag);
            if lag == 0 {
                assert_eq!(y, constant.samples());
            } else {
                for v in y {
                    assert!((v - Cpx::new(1.0, 0.0)).norm() < 1e-12, "|c|^2 = 1 for {v}");
                }
            }
        }

        let omega = 0.3;
        let tone = frame_of(
            (0..FRAME_LEN)
                .map(|t| Cpx::new(0.0, omega * t as f64).exp())
                .collect(),
        );
        let y = lag_product(&tone, 8).unwrap();
        assert_eq!(y.len(), 120);
        let want = Cpx::new(0.0, -8.0 * omega).exp();
        for v in y {
            assert!((v - want).norm() < 1e-12);
        }

        let err = lag_product(&tone, 128).unwrap_err();
        assert_eq!(
            err.to_string(),
            "lag 128 must be smaller than the frame length 128"
        );
    }

    #[test]
    fn moment_stats_degenerate_cases() {
        let ones = vec![Cpx::new(1.0, 0.0); 64];
        for power in 1..=2 {
            let m1 = moment_stats(&ones, power, 1);
            assert_eq!(m1, [1.0, 1.0, 0.0, 0.0]);
            let m2 = moment_stats(&ones, power, 2);
            assert_eq!(m2, [0.0, 0.0, 0.0, 0.0]);
        }

        // Alternating +-1 squares to constant +1.
        let alt: Vec<Cpx> = (0..64)
            .map(|t| Cpx::new(if t % 2 == 0 { 1.0 } else { -1.0 }, 0.0))
            .collect();
        let m1 = moment_stats(&alt, 2, 1);
        assert!((m1[0] - 1.0).abs() < 1e-15, "squared complex mean magnitude {}", m1[0]);
        let m2 = moment_stats(&alt, 2, 2);
        assert!(m2[0].abs() < 1e-15);
        // While at first power the complex mean cancels.
        assert!(moment_stats(&alt, 1, 1)[0] < 1e-15);
    }

    #[test]
    fn circular_gaussian_first_moment_vanishes() {
        let y = gaussian_iq_noise(10_000, 1.0, SeedSpec::new(8, 0));
        let m1 = moment_stats(&y, 1, 1);
        assert!(m1[0] < 0.05, "complex mean magnitude {} at N=1e4", m1[0]);
        // Amplitude mean of unit-power circular Gaussian: E|z| = sqrt(pi)/2.
        let want = PI.sqrt() / 2.0;
        assert!((m1[1] - want).abs() < 0.02, "amplitude mean {} vs {want}", m1[1]);
    }

    #[test]
    fn constant_frame_features_are_hand_computable() {
        let x = frame_of(vec![Cpx::new(1.0, 0.0); FRAME_LEN]);
        let f = extract_features(&x);
        // Per lag block: complex and amplitude means 1 / variances 0, every
        // phase statistic 0 since arg(1) = 0.
        let block = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(&f[..16], &block);
        assert_eq!(&f[16..], &block);
    }

    #[test]
    fn bpsk_reveals_itself_under_squaring() {
        let x = generate_signal(
            ModClass::Bpsk,
            FRAME_LEN,
            &ModemConfig::default(),
            SeedSpec::new(9, 0),
        )
        .unwrap();
        let f = extract_features(&frame_of(x));
        let names = feature_names();
        let p1m1 = f[names.iter().position(|n| n == "lag0_complex_p1_m1").unwrap()];
        let p2m1 = f[names.iter().position(|n| n == "lag0_complex_p2_m1").unwrap()];
        // Squaring a real BPSK signal gives |x|^2, whose mean is the frame
        // power: exactly 1. The first-power mean is a 16-symbol random walk
        // (measured 0.38 for this seed), well below it.
        assert!(p2m1 > 0.99, "squared complex mean magnitude {p2m1}");
        assert!(p1m1 < 0.55, "first-power complex mean magnitude {p1m1}");
        assert!(
            p2m1 > 1.8 * p1m1,
            "squared mean {p2m1} should dwarf first-power mean {p1m1}"
        );
    }

    #[test]
    fn rotation_invariant_feature_subset() {
        let x = gaussian_iq_noise(FRAME_LEN, 1.0, SeedSpec::new(10, 0));
        let rot = Cpx::new(0.0, 1.234).exp();
        let xr: Vec<Cpx> = x.iter().map(|&v| v * rot).collect();
        let f = extract_features(&frame_of(x));
        let fr = extract_features(&frame_of(xr));
        let names = feature_names();
        for (i, name) in names.iter().enumerate() {
            // Global rotation cancels inside the lag-8 conjugate product, is
            // dropped by |.| in amplitude features, and complex moments are
            // reduced by magnitude. Only lag-0 phase features may move.
            let invariant = name.starts_with("lag8")
                || name.contains("_amp_")
                || name.contains("_complex_");
            if invariant {
                assert!(
                    (f[i] - fr[i]).abs() < 1e-9,
                    "{name}: {} vs {} under rotation",
                    f[i],
                    fr[i]
                );
            }
        }
        // And the lag-0 phase mean really does move (negative control).
        let idx = names.iter().position(|n| n == "lag0_phase_p1_m1").unwrap();
        assert!((f[idx] - fr[idx]).abs() > 1e-3);
    }

    #[test]
    fn zero_frame_features_are_finite() {
        let f = extract_features(&frame_of(vec![Cpx::new(0.0, 0.0); FRAME_LEN]));
        for (i, v) in f.iter().enumerate() {
            assert!(v.is_finite(), "feature {i} = {v}");
            assert_eq!(*v, 0.0, "feature {i}");
        }
    }

    #[test]
    fn feature_order_is_stable() {
        // Golden vector on a fixed seeded frame: any change to the feature
        // ordering or arithmetic shows up here. Values measured at pinning.
        let x = frame_of(gaussian_iq_noise(FRAME_LEN, 1.0, SeedSpec::new(4242, 7)));
        let f = extract_features(&x);
        let golden: [f64; 32] = [
            2.89170854988105297e-2,
            1.20360069361081096e-1,
            1.20266008051445938e-1,
            3.52782878894491170e-1,
            8.53990751314625651e-1,
            2.62119625019505587e-1,
            9.91419828350424415e-1,
            1.27739213497402471e0,
            8.34987461952145932e-2,
            3.33825355781584721e0,
            3.34522559843202316e0,
            8.41804672732695103e0,
            1.59710392049513250e0,
            7.94484665571097093e-1,
            3.34522559843202316e0,
            8.41804672732695103e0,
            1.27930229847247889e-1,
            6.71228600536318415e-2,
            8.20001264130877511e-2,
            4.42871894521488008e-1,
            7.60187030468052694e-1,
            4.62235741652404608e-1,
            1.04012006294424042e0,
            3.57664721734809143e0,
            7.47533923567371972e-2,
            2.76289051177070455e0,
            2.76847858143954406e0,
            6.76181695573648156e0,
            1.44923403219771285e0,
            6.68199301359500675e-1,
            2.76847858143954406e0,
            6.76181695573648156e0,
        ];
        for (i, (got, want)) in f.iter().zip(&golden).enumerate() {
            assert!(
                (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                "feature {i} drifted: {got} vs {want}"
            );
        }
    }

    #[test]
    fn featurize_and_standardize_contract() {
        let cfg = crate::dataset::GenConfig {
            classes: vec![ModClass::Bpsk, ModClass::Qam16],
            snrs: vec![10],
            signals_per_cell: 4,
            frames_per_signal: 3,
            seed: SeedSpec::new(21, 0),
            ..crate::dataset::GenConfig::default()
        };
        let ds = crate::dataset::build_dataset(&cfg).unwrap();
        let fm = featurize_dataset(&ds);
        assert_eq!(fm.len(), 24);
        assert_eq!(fm.rows[0].len(), FEATURE_COUNT);

        let train = &fm.rows[..16];
        let test = &fm.rows[16..];
        let sz = Standardizer::fit(train).unwrap();
        let tr = sz.transform(train);
        for c in 0..FEATURE_COUNT {
            let mean: f64 = tr.iter().map(|r| r[c]).sum::<f64>() / tr.len() as f64;
            let var: f64 = tr.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / tr.len() as f64;
            // A near-constant column (mean amplitude-squared is 1.0 for every
            // unit-power frame, so its std is f32-quantization residue ~1e-8)
            // standardizes with cancellation error ~eps*mean/std ~ 1e-8; only
            // well-scaled columns can meet the tight bound.
            let healthy = sz.std[c] > 1e-4 * sz.mean[c].abs();
            let tol = if healthy { 1e-9 } else { 1e-5 };
            assert!(mean.abs() < tol, "column {c} mean {mean}");
            assert!(
                (var.sqrt() - 1.0).abs() < tol || var.sqrt() < tol,
                "column {c} std {}",
                var.sqrt()
            );
        }
        // Test rows use the train statistics, not their own.
        let te = sz.transform(test);
        assert!((te[0][0] - (test[0][0] - sz.mean[0]) / sz.std[0]).abs() < 1e-15);
        let own = Standardizer::fit(test).unwrap();
        assert_ne!(own.mean, sz.mean);

        assert!(Standardizer::fit(&[]).is_err());
    }

    #[test]
    fn csv_export_round_trips_a_value() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let fm = FeatureMatrix {
            rows: vec![[1.5; FEATURE_COUNT], [-0.25; FEATURE_COUNT]],
            classes: vec![ModClass::Qpsk, ModClass::Wbfm],
            snrs: vec![SnrLabel::new(-4).unwrap(), SnrLabel::new(18).unwrap()],
        };
        export_features_csv(&fm, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("class,snr,lag0_complex_p1_m1,lag0_complex_p1_m2,"));
        assert_eq!(header.split(',').count(), 2 + FEATURE_COUNT);
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "QPSK");
        assert_eq!(row[1], "-4");
        assert_eq!(row[2].parse::<f64>().unwrap(), 1.5);
        assert_eq!(lines.next().unwrap().split(',').nth(1).unwrap(), "18");
        assert!(lines.next().is_none());
    }
}
