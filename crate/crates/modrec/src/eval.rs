//! Evaluation: confusion matrices, accuracy-vs-SNR curves, wall-clock
//! benchmarks, and the report files a run leaves behind.
//!
//! Everything downstream consumes the CSV/JSON outputs, so emission is
//! deterministic: fixed float formatting, fixed key order, and a config
//! hash in the summary so every figure can be traced to the run that made
//! it.

use crate::channel::SnrLabel;
use crate::dataset::LabeledFrame;
use crate::features::{extract_features, FeatureVector};
use crate::model_io::TrainedModel;
use crate::modem::ALL_CLASSES;
use crate::nn::{argmax_rows, Tensor, N_CLASSES};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction/label/snr lists differ in length: {preds}/{labels}/{snrs}")]
    LengthMismatch {
        preds: usize,
        labels: usize,
        snrs: usize,
    },
    #[error("class id {got} out of range ({max} classes)")]
    BadClass { got: usize, max: usize },
    #[error("prediction failed: {0}")]
    Predict(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Confusion matrices
// ---------------------------------------------------------------------------

/// Counts of (true class, predicted class) pairs, optionally restricted to
/// one SNR level. Rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub snr_filter: Option<SnrLabel>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Correct predictions: the diagonal sum.
    pub fn trace(&self) -> u64 {
        (0..N_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    /// trace / total; 0 when the matrix is empty.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.trace() as f64 / total as f64
        }
    }

    pub fn row_sum(&self, cls: usize) -> u64 {
        self.counts[cls].iter().sum()
    }

    /// CSV with named rows and columns; rows are true classes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\pred");
        for c in ALL_CLASSES {
            let _ = write!(out, ",{}", c.name());
        }
        out.push('\n');
        for (t, row) in self.counts.iter().enumerate() {
            let _ = write!(out, "{}", ALL_CLASSES[t].name());
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Tally predictions against truth, optionally keeping only examples at one
/// SNR level.
pub fn confusion(
    preds: &[usize],
    labels: &[usize],
    snrs: &[SnrLabel],
    snr_filter: Option<SnrLabel>,
) -> Result<ConfusionMatrix, EvalError> {
    if preds.len() != labels.len() || labels.len() != snrs.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            labels: labels.len(),
            snrs: snrs.len(),
        });
    }
    let mut counts = vec![vec![0u64; N_CLASSES]; N_CLASSES];
    for ((&p, &t), &s) in preds.iter().zip(labels).zip(snrs) {
        if let Some(f) = snr_filter {
            if s != f {
                continue;
            }
        }
        for id in [p, t] {
            if id >= N_CLASSES {
                return Err(EvalError::BadClass { got: id, max: N_CLASSES });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts, snr_filter })
}

// ---------------------------------------------------------------------------
// Accuracy vs SNR
// ---------------------------------------------------------------------------

/// Accuracy in one populated SNR bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrPoint {
    pub snr: SnrLabel,
    pub accuracy: f64,
    pub n: u64,
    pub correct: u64,
}

/// Per-SNR accuracies, ascending by SNR. Bins with no examples are absent
/// from the list, never reported as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrCurve {
    pub points: Vec<SnrPoint>,
}

impl SnrCurve {
    /// Example-weighted mean of the per-bin accuracies — exactly the overall
    /// accuracy, since both are (total correct)/(total examples).
    pub fn overall_accuracy(&self) -> f64 {
        let n: u64 = self.points.iter().map(|p| p.n).sum();
        if n == 0 {
            0.0
        } else {
            self.points.iter().map(|p| p.correct).sum::<u64>() as f64 / n as f64
        }
    }

    pub fn total_examples(&self) -> u64 {
        self.points.iter().map(|p| p.n).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("snr_db,accuracy,n\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{:.6},{}", p.snr, p.accuracy, p.n);
        }
        out
    }
}

/// Bin predictions by SNR label and compute per-bin accuracy.
pub fn accuracy_by_snr(
    preds: &[usize],
    labels: &[usize],
    snrs: &[SnrLabel],
) -> Result<SnrCurve, EvalError> {
    if preds.len() != labels.len() || labels.len() != snrs.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            labels: labels.len(),
            snrs: snrs.len(),
        });
    }
    let mut n = [0u64; 21];
    let mut correct = [0u64; 21];
    for ((&p, &t), &s) in preds.iter().zip(labels).zip(snrs) {
        let bin = ((s.db() + 20) / 2) as usize;
        n[bin] += 1;
        correct[bin] += u64::from(p == t);
    }
    let points = crate::channel::ALL_SNRS
        .iter()
        .enumerate()
        .filter(|&(bin, _)| n[bin] > 0)
        .map(|(bin, &db)| SnrPoint {
            snr: SnrLabel::new(db).expect("table value is valid"),
            accuracy: correct[bin] as f64 / n[bin] as f64,
            n: n[bin],
            correct: correct[bin],
        })
        .collect();
    Ok(SnrCurve { points })
}

// ---------------------------------------------------------------------------
// Dataset adapters and batched prediction
// ---------------------------------------------------------------------------

/// Frames as network input: [n, 1, 2, len], row 0 the in-phase arm, row 1
/// the quadrature arm.
pub fn frames_tensor(frames: &[LabeledFrame]) -> Tensor {
    let w = frames.first().map_or(0, |f| f.frame.samples().len());
    let mut data = Vec::with_capacity(frames.len() * 2 * w);
    for f in frames {
        let s = f.frame.samples();
        data.extend(s.iter().map(|z| z.re));
        data.extend(s.iter().map(|z| z.im));
    }
    Tensor {
        shape: vec![frames.len(), 1, 2, w],
        data,
    }
}

/// True class ids, one per frame.
pub fn class_ids(frames: &[LabeledFrame]) -> Vec<usize> {
    frames.iter().map(|f| f.cls.id() as usize).collect()
}

/// SNR labels, one per frame.
pub fn snr_labels(frames: &[LabeledFrame]) -> Vec<SnrLabel> {
    frames.iter().map(|f| f.snr).collect()
}

/// Feature rows for the frames, in order.
pub fn feature_rows(frames: &[LabeledFrame]) -> Vec<FeatureVector> {
    frames.par_iter().map(|f| extract_features(&f.frame)).collect()
}

/// Predicted class ids from any trained model, batched to bound memory.
pub fn predict_frames(
    tm: &TrainedModel,
    frames: &[LabeledFrame],
    batch: usize,
) -> Result<Vec<usize>, EvalError> {
    let wrap = |e: &dyn std::fmt::Display| EvalError::Predict(e.to_string());
    let batch = batch.max(1);
    match tm {
        TrainedModel::Net { norm: None, .. } => {
            let model = tm.net_model().map_err(|e| wrap(&e))?;
            let mut out = Vec::with_capacity(frames.len());
            for chunk in frames.chunks(batch) {
                let probs = model.predict(&frames_tensor(chunk)).map_err(|e| wrap(&e))?;
                out.extend(argmax_rows(&probs));
            }
            Ok(out)
        }
        TrainedModel::Net { norm: Some(norm), .. } => {
            let model = tm.net_model().map_err(|e| wrap(&e))?;
            let rows = feature_rows(frames);
            let mut out = Vec::with_capacity(frames.len());
            for chunk in rows.chunks(batch) {
                let mut data = Vec::with_capacity(chunk.len() * chunk[0].len());
                for r in chunk {
                    data.extend_from_slice(&norm.transform_row(r));
                }
                let x = Tensor {
                    shape: vec![chunk.len(), chunk[0].len()],
                    data,
                };
                let probs = model.predict(&x).map_err(|e| wrap(&e))?;
                out.extend(argmax_rows(&probs));
            }
            Ok(out)
        }
        TrainedModel::Classical { clf, norm } => {
            let rows: Vec<Vec<f64>> = feature_rows(frames)
                .iter()
                .map(|r| norm.transform_row(r).to_vec())
                .collect();
            let ids = clf.predict_batch(&rows).map_err(|e| wrap(&e))?;
            Ok(ids.into_iter().map(usize::from).collect())
        }
    }
}

// ---------------------------------------------------------------------------
// Benchmarks
// ---------------------------------------------------------------------------

/// Raw repetition timings and their median for one labeled workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchStat {
    pub label: String,
    pub n_examples: usize,
    pub raw_s: Vec<f64>,
    pub median_s: f64,
}

/// Run `work` once untimed to warm caches, then `reps` timed repetitions;
/// record every raw duration and the median.
pub fn time_median<F: FnMut()>(
    label: &str,
    n_examples: usize,
    reps: usize,
    mut work: F,
) -> BenchStat {
    work();
    let mut raw_s = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t0 = Instant::now();
        work();
        raw_s.push(t0.elapsed().as_secs_f64());
    }
    let mut sorted = raw_s.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("durations are finite"));
    let mid = sorted.len() / 2;
    let median_s = if sorted.is_empty() {
        0.0
    } else if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    BenchStat {
        label: label.to_string(),
        n_examples,
        raw_s,
        median_s,
    }
}

/// Train/classify timings for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingEntry {
    pub model: String,
    pub train: Option<BenchStat>,
    pub classify: Option<BenchStat>,
}

/// All timing entries plus a note describing the machine they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub environment: String,
    pub entries: Vec<TimingEntry>,
}

impl TimingReport {
    /// One CSV row per model: median train and classify seconds.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,train_s,classify_s,classify_examples,reps\n");
        for e in &self.entries {
            let train = e
                .train
                .as_ref()
                .map_or(String::from(""), |s| format!("{:.6}", s.median_s));
            let (cls, nex, reps) = e.classify.as_ref().map_or(
                (String::new(), 0, 0),
                |s| (format!("{:.6}", s.median_s), s.n_examples, s.raw_s.len()),
            );
            let _ = writeln!(out, "{},{},{},{},{}", e.model, train, cls, nex, reps);
        }
        out
    }
}

/// Worker-count and target description for timing reports.
pub fn environment_string() -> String {
    format!(
        "{}-{}, {} rayon threads, f64 scalar build",
        std::env::consts::OS,
        std::env::consts::ARCH,
        rayon::current_num_threads()
    )
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

/// SHA-256 of a config text, lowercase hex.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Everything one evaluation run produced, ready to serialize.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    pub model_name: String,
    pub config_text: String,
    pub curve: SnrCurve,
    pub confusions: Vec<ConfusionMatrix>,
    pub timing: Option<TimingReport>,
}

#[derive(Serialize, Deserialize)]
struct Summary {
    model: String,
    config_sha256: String,
    overall_accuracy: f64,
    n_examples: u64,
    by_snr: Vec<SnrPoint>,
    timing: Option<TimingReport>,
    config: String,
}

/// Write summary.json, accuracy_by_snr.csv, one confusion CSV per matrix,
/// and optionally an SVG of the SNR curve. Returns the paths written;
/// re-running on the same run reproduces every file byte for byte.
pub fn emit_report(run: &EvalRun, dir: &Path, with_svg: bool) -> Result<Vec<PathBuf>, EvalError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let summary = Summary {
        model: run.model_name.clone(),
        config_sha256: config_hash(&run.config_text),
        overall_accuracy: run.curve.overall_accuracy(),
        n_examples: run.curve.total_examples(),
        by_snr: run.curve.points.clone(),
        timing: run.timing.clone(),
        config: run.config_text.clone(),
    };
    let path = dir.join("summary.json");
    let mut json = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    json.push(b'\n');
    std::fs::write(&path, json)?;
    written.push(path);

    let path = dir.join("accuracy_by_snr.csv");
    std::fs::write(&path, run.curve.to_csv())?;
    written.push(path);

    for cm in &run.confusions {
        let name = match cm.snr_filter {
            Some(s) => format!("confusion_{}.csv", s.db()),
            None => "confusion_all.csv".to_string(),
        };
        let path = dir.join(name);
        std::fs::write(&path, cm.to_csv())?;
        written.push(path);
    }

    if with_svg {
        let path = dir.join("snr_curve.svg");
        std::fs::write(&path, svg_curve(&run.curve, &run.model_name))?;
        written.push(path);
    }
    Ok(written)
}

/// Minimal deterministic SVG line plot of accuracy against SNR.
fn svg_curve(curve: &SnrCurve, title: &str) -> String {
    let (w, h, ml, mr, mt, mb) = (640.0, 400.0, 60.0, 20.0, 40.0, 50.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);
    let x = |db: f64| ml + (db + 20.0) / 40.0 * pw;
    let y = |acc: f64| mt + (1.0 - acc) * ph;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{} accuracy vs SNR</text>"#,
        ml + pw / 2.0,
        title
    );
    // Axes and gridlines.
    for i in 0..=10 {
        let acc = i as f64 / 10.0;
        let yy = y(acc);
        let _ = writeln!(
            s,
            r##"<line x1="{ml}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#dddddd" stroke-width="1"/>"##,
            ml + pw
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{acc:.1}</text>"#,
            ml - 6.0,
            yy + 4.0
        );
    }
    for db in (-20..=20).step_by(10) {
        let xx = x(db as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{xx:.1}" y1="{mt}" x2="{xx:.1}" y2="{:.1}" stroke="#dddddd" stroke-width="1"/>"##,
            mt + ph
        );
        let _ = writeln!(
            s,
            r#"<text x="{xx:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{db}</text>"#,
            mt + ph + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">SNR (dB)</text>"#,
        ml + pw / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<rect x="{ml}" y="{mt}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    if !curve.points.is_empty() {
        let mut pts = String::new();
        for p in &curve.points {
            let _ = write!(pts, "{:.2},{:.2} ", x(p.snr.db_f64()), y(p.accuracy));
        }
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#1f6fb2" stroke-width="2"/>"##,
            pts.trim_end()
        );
        for p in &curve.points {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#1f6fb2"/>"##,
                x(p.snr.db_f64()),
                y(p.accuracy)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{Classifier, Knn1};
    use crate::iq::SeedSpec;
    use crate::modem::ModClass;
    use crate::nn::{train, LayerSpec, Model, ModelSpec, TrainConfig};
    use rand::Rng;

    fn snr(db: i16) -> SnrLabel {
        SnrLabel::new(db).unwrap()
    }

    #[test]
    fn confusion_definition_and_conservation() {
        let labels = vec![0usize, 1, 2, 3, 4];
        let snrs = vec![snr(0); 5];
        // All correct: diagonal.
        let cm = confusion(&labels, &labels, &snrs, None).unwrap();
        for (t, row) in cm.counts.iter().enumerate() {
            for (p, &v) in row.iter().enumerate() {
                assert_eq!(v, u64::from(t == p && t < 5));
            }
        }
        assert_eq!(cm.accuracy(), 1.0);

        // Single miss lands in exactly one off-diagonal cell.
        let cm = confusion(&[7], &[3], &[snr(-2)], None).unwrap();
        assert_eq!(cm.counts[3][7], 1);
        assert_eq!(cm.total(), 1);
        assert_eq!(cm.trace(), 0);

        // Filter keeps only matching SNR examples.
        let preds = vec![0usize, 0, 1];
        let labels = vec![0usize, 1, 1];
        let snrs = vec![snr(-10), snr(4), snr(4)];
        let cm = confusion(&preds, &labels, &snrs, Some(snr(4))).unwrap();
        assert_eq!(cm.total(), 2);
        assert_eq!(cm.counts[1][0], 1);
        assert_eq!(cm.counts[1][1], 1);
        // trace/total equals overall accuracy exactly.
        assert_eq!(cm.accuracy(), 0.5);

        let err = confusion(&[11], &[0], &[snr(0)], None).unwrap_err();
        assert_eq!(err.to_string(), "class id 11 out of range (11 classes)");
        assert!(confusion(&[0], &[0, 1], &[snr(0)], None).is_err());

        let csv = cm.to_csv();
        assert_eq!(csv.lines().count(), 12); // header + 11 class rows
        assert!(csv.starts_with("true\\pred,"));
    }

    #[test]
    fn snr_curve_bins_and_aggregation() {
        // Three SNR levels populated, others absent; one level all correct.
        let preds = vec![0usize, 1, 2, 2, 5, 5];
        let labels = vec![0usize, 1, 2, 3, 5, 6];
        let snrs = vec![snr(-20), snr(-20), snr(0), snr(0), snr(18), snr(18)];
        let curve = accuracy_by_snr(&preds, &labels, &snrs).unwrap();
        assert_eq!(curve.points.len(), 3);
        assert_eq!(curve.points[0].snr.db(), -20);
        assert_eq!(curve.points[0].accuracy, 1.0);
        assert_eq!(curve.points[1].accuracy, 0.5);
        assert_eq!(curve.points[2].accuracy, 0.5);
        // Example-weighted aggregation reproduces the overall accuracy.
        let overall = preds
            .iter()
            .zip(&labels)
            .filter(|(p, t)| p == t)
            .count() as f64
            / preds.len() as f64;
        assert_eq!(curve.overall_accuracy(), overall);
        assert_eq!(curve.to_csv().lines().count(), 4);
    }

    #[test]
    fn random_predictions_score_near_chance() {
        // 11 balanced classes, uniform random predictions: each populated
        // bin sits within a 4-sigma binomial interval of 1/11.
        let mut rng = SeedSpec::new(60, 0).rng();
        let n = 11_000;
        let labels: Vec<usize> = (0..n).map(|i| i % 11).collect();
        let preds: Vec<usize> = (0..n).map(|_| rng.gen_range(0..11)).collect();
        let snrs: Vec<SnrLabel> = (0..n)
            .map(|i| snr(crate::channel::ALL_SNRS[i % 21]))
            .collect();
        let curve = accuracy_by_snr(&preds, &labels, &snrs).unwrap();
        assert_eq!(curve.points.len(), 21);
        let p = 1.0 / 11.0;
        for pt in &curve.points {
            let sigma = (p * (1.0 - p) / pt.n as f64).sqrt();
            assert!(
                (pt.accuracy - p).abs() < 4.0 * sigma,
                "bin {} accuracy {} vs chance {p}",
                pt.snr,
                pt.accuracy
            );
        }
        let sigma_all = (p * (1.0 - p) / n as f64).sqrt();
        assert!((curve.overall_accuracy() - p).abs() < 4.0 * sigma_all);
    }

    #[test]
    fn bench_median_bookkeeping() {
        let mut calls = 0u32;
        let stat = time_median("noop", 100, 5, || calls += 1);
        assert_eq!(calls, 6); // warm-up + 5 timed
        assert_eq!(stat.raw_s.len(), 5);
        let mut sorted = stat.raw_s.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(stat.median_s, sorted[2]);
        assert_eq!(stat.n_examples, 100);
    }

    #[test]
    fn classify_time_scales_linearly_in_batch_size() {
        // 1-NN cost is proportional to the number of queries; a least-squares
        // line over four batch sizes must explain nearly all the variance.
        let mut rng = SeedSpec::new(61, 0).rng();
        let dim = 32;
        let train_rows: Vec<Vec<f64>> =
            (0..2000).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let train_y: Vec<u16> = (0..2000).map(|i| (i % 11) as u16).collect();
        let clf = Classifier::Knn1(Knn1::fit(&train_rows, &train_y).unwrap());
        let queries: Vec<Vec<f64>> =
            (0..2000).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();

        let sizes = [250usize, 500, 1000, 2000];
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &b in &sizes {
            let stat = time_median("knn1", b, 5, || {
                clf.predict_batch(&queries[..b]).unwrap();
            });
            xs.push(b as f64);
            ys.push(stat.median_s);
        }
        // r^2 of the least-squares line through (size, time).
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        let icept = my - slope * mx;
        let ss_res: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - (icept + slope * x)).powi(2))
            .sum();
        let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
        let r2 = 1.0 - ss_res / ss_tot;
        assert!(r2 > 0.9, "r^2 {r2} from times {ys:?}");
    }

    #[test]
    fn train_time_tracks_epoch_count() {
        // Doubling the epoch budget roughly doubles training time.
        let spec = ModelSpec {
            name: "bench".into(),
            input_shape: vec![32],
            layers: vec![
                LayerSpec::Dense { units: 64 },
                LayerSpec::Relu,
                LayerSpec::Dense { units: 11 },
                LayerSpec::Softmax,
            ],
            l2_conv: 0.0,
            l1_act: 0.0,
        };
        let mut rng = SeedSpec::new(62, 0).rng();
        let x = Tensor {
            shape: vec![2048, 32],
            data: (0..2048 * 32).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let y: Vec<usize> = (0..2048).map(|i| i % 11).collect();
        let time_for = |epochs: usize| {
            let cfg = TrainConfig {
                batch_size: 128,
                epochs,
                patience: None,
                seed: SeedSpec::new(63, 0),
                ..TrainConfig::default()
            };
            time_median("train", 2048, 5, || {
                let mut m = Model::build(spec.clone(), SeedSpec::new(64, 0)).unwrap();
                train(&mut m, &x, &y, &x.gather(&[0, 1, 2, 3]), &y[..4], &cfg).unwrap();
            })
            .median_s
        };
        let t4 = time_for(4);
        let t8 = time_for(8);
        let ratio = t8 / t4;
        assert!((1.6..=2.4).contains(&ratio), "epoch scaling ratio {ratio}");
    }

    #[test]
    fn report_files_are_deterministic() {
        let preds = vec![0usize, 1, 1, 3];
        let labels = vec![0usize, 1, 2, 3];
        let snrs = vec![snr(-12), snr(-12), snr(6), snr(6)];
        let curve = accuracy_by_snr(&preds, &labels, &snrs).unwrap();
        let run = EvalRun {
            model_name: "knn1".into(),
            config_text: "model = knn1\nseed = 7\n".into(),
            curve,
            confusions: vec![
                confusion(&preds, &labels, &snrs, None).unwrap(),
                confusion(&preds, &labels, &snrs, Some(snr(6))).unwrap(),
            ],
            timing: Some(TimingReport {
                environment: "test-env".into(),
                entries: vec![TimingEntry {
                    model: "knn1".into(),
                    train: None,
                    classify: Some(BenchStat {
                        label: "classify".into(),
                        n_examples: 4,
                        raw_s: vec![0.25, 0.5, 0.125],
                        median_s: 0.25,
                    }),
                }],
            }),
        };
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&run, dir.path(), true).unwrap();
        let names: Vec<_> = files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            names,
            vec![
                "summary.json",
                "accuracy_by_snr.csv",
                "confusion_all.csv",
                "confusion_6.csv",
                "snr_curve.svg"
            ]
        );

        // JSON parses back and echoes the config hash.
        let text = std::fs::read_to_string(&files[0]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["model"], "knn1");
        assert_eq!(
            v["config_sha256"].as_str().unwrap(),
            config_hash("model = knn1\nseed = 7\n")
        );
        assert_eq!(v["by_snr"].as_array().unwrap().len(), 2);

        // CSV has one row per populated bin plus header.
        let csv = std::fs::read_to_string(&files[1]).unwrap();
        assert_eq!(csv.lines().count(), 3);

        // Re-emitting reproduces every file byte for byte.
        let before: Vec<Vec<u8>> = files.iter().map(|p| std::fs::read(p).unwrap()).collect();
        emit_report(&run, dir.path(), true).unwrap();
        for (p, b) in files.iter().zip(&before) {
            assert_eq!(&std::fs::read(p).unwrap(), b, "{p:?} changed between runs");
        }
    }

    #[test]
    fn predict_frames_covers_every_model_family() {
        use crate::dataset::{build_dataset, GenConfig};
        use crate::features::Standardizer;
        use crate::model_io::TrainedModel;

        let cfg = GenConfig {
            classes: vec![ModClass::from_id(0).unwrap(), ModClass::from_id(5).unwrap()],
            snrs: vec![18],
            signals_per_cell: 2,
            frames_per_signal: 3,
            seed: SeedSpec::new(65, 0),
            ..GenConfig::default()
        };
        let ds = build_dataset(&cfg).unwrap();
        assert_eq!(ds.len(), 12);

        // Classical path.
        let rows = feature_rows(&ds.frames);
        let norm = Standardizer::fit(&rows).unwrap();
        let std_rows: Vec<Vec<f64>> =
            rows.iter().map(|r| norm.transform_row(r).to_vec()).collect();
        let y: Vec<u16> = ds.frames.iter().map(|f| f.cls.id()).collect();
        let clf = Classifier::Knn1(Knn1::fit(&std_rows, &y).unwrap());
        let tm = TrainedModel::Classical { clf, norm: norm.clone() };
        let preds = predict_frames(&tm, &ds.frames, 5).unwrap();
        // 1-NN on its own training set is exact.
        assert_eq!(preds, class_ids(&ds.frames));

        // Raw-IQ network path (untrained weights; only shape plumbing checked).
        let net = Model::build(ModelSpec::cnn(), SeedSpec::new(66, 0)).unwrap();
        let tm = TrainedModel::from_net(&net, None);
        let preds = predict_frames(&tm, &ds.frames, 4).unwrap();
        assert_eq!(preds.len(), 12);
        assert!(preds.iter().all(|&p| p < N_CLASSES));

        // Feature network path.
        let net = Model::build(ModelSpec::dnn_feat(), SeedSpec::new(67, 0)).unwrap();
        let tm = TrainedModel::from_net(&net, Some(norm));
        let preds = predict_frames(&tm, &ds.frames, 7).unwrap();
        assert_eq!(preds.len(), 12);
    }
}
