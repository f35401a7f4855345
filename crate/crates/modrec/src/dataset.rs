//! Labeled frame datasets: build, serialize, split, load.
//!
//! The builder runs the full synthesis pipeline per source signal — modulate,
//! impair through the channel, slice into overlapping 128-sample windows,
//! re-normalize each window to unit mean power — and tags every frame with
//! its modulation class and SNR label. Samples are quantized to `f32` at
//! build time, so a save/load round trip is bit-exact.
//!
//! On disk a dataset is two files: a little-endian `RMD1` binary holding the
//! frames, and a JSON manifest sidecar (same basename, `.json`) echoing the
//! generation config and per-cell counts. Binary layout:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "RMD1"
//!      4     2  version (u16, currently 1)
//!      6     8  n_frames (u64)
//!     14     4  frame_len (u32, 128)
//!     18     2  n_classes (u16, 11)
//!     20     —  frames: class u16, snr i16, then frame_len × (I f32, Q f32)
//! ```
//!
//! Windows from one source signal overlap by half, so frames from the same
//! signal are near-duplicates; [`split`] therefore assigns whole source
//! signals to splits, never individual windows, to keep train/test leakage
//! out of the evaluation.

use crate::channel::{apply_channel, ChannelError, ChannelParams, SnrLabel, ALL_SNRS};
use crate::iq::{mean_power, Cpx, IqError, IqFrame, SeedSpec, FRAME_LEN};
use crate::modem::{generate_signal, ModClass, ModemConfig, ModemError, ALL_CLASSES};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Frame window length in samples.
pub const WINDOW: usize = FRAME_LEN;
/// Hop between successive windows of one signal.
pub const STEP: usize = 64;
/// On-disk format version this build reads and writes.
pub const FORMAT_VERSION: u16 = 1;

const MAGIC: [u8; 4] = *b"RMD1";
const HEADER_LEN: usize = 20;

// Per-signal sub-stream labels (the modem consumes the base seed itself).
const SUB_CHANNEL: u64 = 0x02;
const SUB_ORIGIN: u64 = 0x03;
// Label bases for per-cell and per-signal seed derivation.
const CELL_LABEL_BASE: u64 = 0xC000_0000;
const SIGNAL_LABEL_BASE: u64 = 0x5000_0000;

/// One 128-sample window with its class and SNR labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrame {
    pub frame: IqFrame,
    pub cls: ModClass,
    pub snr: SnrLabel,
}

/// Frames plus the manifest describing how they were made.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub frames: Vec<LabeledFrame>,
    pub manifest: Manifest,
}

/// Per-(class, snr) frame tally as stored in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCount {
    pub cls: String,
    pub snr: i16,
    pub count: u64,
}

/// Generation config echo written alongside every dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u16,
    /// Class id -> name for every id the format can hold.
    pub class_map: Vec<(u16, String)>,
    pub modem: ModemConfig,
    /// Channel template; `snr_db` is overridden per cell during builds.
    pub channel: ChannelParams,
    pub seed: SeedSpec,
    pub signals_per_cell: usize,
    /// Windows taken per source signal; [`split`] groups frames in runs of
    /// this length, so it is part of the leakage contract, not just metadata.
    pub frames_per_signal: usize,
    pub counts: Vec<CellCount>,
    pub total_frames: u64,
}

/// What to synthesize: the (class, snr) grid and per-cell volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub classes: Vec<ModClass>,
    pub snrs: Vec<i16>,
    pub signals_per_cell: usize,
    pub frames_per_signal: usize,
    pub modem: ModemConfig,
    pub channel: ChannelParams,
    pub seed: SeedSpec,
}

impl Default for GenConfig {
    /// Desk-scale default: every class at every SNR, 200 source signals per
    /// cell, 20 windows each.
    fn default() -> Self {
        Self {
            classes: ALL_CLASSES.to_vec(),
            snrs: ALL_SNRS.to_vec(),
            signals_per_cell: 200,
            frames_per_signal: 20,
            modem: ModemConfig::default(),
            channel: ChannelParams::default(),
            seed: SeedSpec::new(2016, 0),
        }
    }
}

/// How to cut a dataset into train/val/test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: SeedSpec,
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64, seed: SeedSpec) -> Self {
        Self {
            train_frac,
            val_frac,
            test_frac,
            seed,
        }
    }

    pub fn fracs(&self) -> [f64; 3] {
        [self.train_frac, self.val_frac, self.test_frac]
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let s = self.train_frac + self.val_frac + self.test_frac;
        if self.fracs().iter().any(|&f| f < 0.0) || !s.is_finite() {
            return Err(DatasetError::BadConfig(
                "split fractions must be non-negative".into(),
            ));
        }
        if (s - 1.0).abs() > 1e-9 {
            return Err(DatasetError::BadConfig(format!(
                "split fractions must sum to 1.0, got {s}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("stream of {len} samples is shorter than the {window}-sample window")]
    StreamTooShort { len: usize, window: usize },
    #[error("invalid dataset config: {0}")]
    BadConfig(String),
    #[error("bad magic {got:?}, expected \"RMD1\"")]
    BadMagic { got: [u8; 4] },
    #[error("unsupported format version {got}")]
    UnsupportedVersion { got: u16 },
    #[error("unsupported frame length {got}")]
    UnsupportedFrameLen { got: u32 },
    #[error("unsupported class count {got}")]
    UnsupportedClassCount { got: u16 },
    #[error("unexpected end at offset {offset}")]
    UnexpectedEnd { offset: usize },
    #[error("file has {extra} trailing bytes after the declared {declared} frames")]
    TrailingBytes { extra: usize, declared: u64 },
    #[error("frame {index} has invalid {what}")]
    BadFrameField { index: u64, what: String },
    #[error("missing manifest sidecar {path}")]
    MissingManifest { path: PathBuf },
    #[error("manifest parse failed: {0}")]
    ManifestParse(String),
    #[error("manifest disagrees with binary: {0}")]
    ManifestMismatch(String),
    #[error("cell {cls}@{snr} has only {groups} source signals, not enough to give every nonzero split at least one")]
    SplitTooSmall { cls: String, snr: i16, groups: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Modem(#[from] ModemError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Iq(#[from] IqError),
}

/// Slice a stream into overlapping windows at offsets 0, step, 2*step, ...;
/// the trailing remainder (less than one window) is dropped.
pub fn segment(stream: &[Cpx], window: usize, step: usize) -> Result<Vec<IqFrame>, DatasetError> {
    if window == 0 || step == 0 {
        return Err(DatasetError::BadConfig(
            "window and step must be positive".into(),
        ));
    }
    if stream.len() < window {
        return Err(DatasetError::StreamTooShort {
            len: stream.len(),
            window,
        });
    }
    let n = (stream.len() - window) / step + 1;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(IqFrame::new(stream[i * step..i * step + window].to_vec())?);
    }
    Ok(out)
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.classes.is_empty() || self.snrs.is_empty() {
            return Err(DatasetError::BadConfig(
                "classes and snrs must be non-empty".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        if !self.classes.iter().all(|c| seen.insert(c.id())) {
            return Err(DatasetError::BadConfig("duplicate class".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if !self.snrs.iter().all(|s| seen.insert(*s)) {
            return Err(DatasetError::BadConfig("duplicate snr".into()));
        }
        for &db in &self.snrs {
            SnrLabel::new(db)?;
        }
        if self.signals_per_cell > 0 && self.frames_per_signal == 0 {
            return Err(DatasetError::BadConfig(
                "frames_per_signal must be positive".into(),
            ));
        }
        self.modem.validate()?;
        self.channel.validate()?;
        Ok(())
    }

    fn snr_labels(&self) -> Vec<SnrLabel> {
        self.snrs.iter().map(|&db| SnrLabel::new(db).unwrap()).collect()
    }
}

/// Synthesize a labeled dataset over the config's (class, snr) grid.
///
/// Per source signal: modulate enough samples to cover the channel's input
/// margin, run the impairment chain at the cell's SNR, pick a random window
/// origin in [0, step), slice `frames_per_signal` windows, and re-normalize
/// each window to unit mean power (absolute receive power would otherwise
/// leak the SNR label). Deterministic under the master seed, including when
/// built in parallel — every signal owns a derived seed.
pub fn build_dataset(cfg: &GenConfig) -> Result<Dataset, DatasetError> {
    cfg.validate()?;
    let snrs = cfg.snr_labels();
    let mut jobs = Vec::new();
    for &cls in &cfg.classes {
        for &snr in &snrs {
            for sig in 0..cfg.signals_per_cell {
                jobs.push((cls, snr, sig));
            }
        }
    }
    let per_signal: Vec<Vec<LabeledFrame>> = jobs
        .par_iter()
        .map(|&(cls, snr, sig)| build_one_signal(cfg, cls, snr, sig))
        .collect::<Result<_, _>>()?;

    let frames: Vec<LabeledFrame> = per_signal.into_iter().flatten().collect();
    let manifest = Manifest::for_build(cfg, &frames);
    Ok(Dataset { frames, manifest })
}

fn cell_label(cls: ModClass, snr: SnrLabel) -> u64 {
    CELL_LABEL_BASE | (u64::from(cls.id()) << 16) | u64::from(snr.db() as u16)
}

fn build_one_signal(
    cfg: &GenConfig,
    cls: ModClass,
    snr: SnrLabel,
    sig: usize,
) -> Result<Vec<LabeledFrame>, DatasetError> {
    let sig_seed = cfg
        .seed
        .derive(cell_label(cls, snr))
        .derive(SIGNAL_LABEL_BASE + sig as u64);
    let channel = cfg.channel.with_snr(snr.db_f64());
    // Window origin headroom of one full step on top of the windows.
    let n_chan = WINDOW + cfg.frames_per_signal * STEP;
    let n_in = channel.required_input_len(n_chan);

    let clean = generate_signal(cls, n_in, &cfg.modem, sig_seed)?;
    let impaired = apply_channel(&clean, &channel, sig_seed.derive(SUB_CHANNEL), n_chan)?;
    let origin = sig_seed.derive(SUB_ORIGIN).rng().gen_range(0..STEP);

    let mut out = Vec::with_capacity(cfg.frames_per_signal);
    for w in 0..cfg.frames_per_signal {
        let start = origin + w * STEP;
        let window = &impaired[start..start + WINDOW];
        let p = mean_power(window)?;
        if p == 0.0 {
            return Err(DatasetError::Iq(IqError::ZeroSignal));
        }
        let g = 1.0 / p.sqrt();
        let samples: Vec<Cpx> = window
            .iter()
            .map(|s| Cpx::new((s.re * g) as f32 as f64, (s.im * g) as f32 as f64))
            .collect();
        out.push(LabeledFrame {
            frame: IqFrame::new(samples)?,
            cls,
            snr,
        });
    }
    Ok(out)
}

impl Manifest {
    fn for_build(cfg: &GenConfig, frames: &[LabeledFrame]) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            class_map: ALL_CLASSES
                .iter()
                .map(|c| (c.id(), c.name().to_string()))
                .collect(),
            modem: cfg.modem.clone(),
            channel: cfg.channel,
            seed: cfg.seed,
            signals_per_cell: cfg.signals_per_cell,
            frames_per_signal: cfg.frames_per_signal,
            counts: tally(frames),
            total_frames: frames.len() as u64,
        }
    }

    /// Rewrite the tallies to match `frames` (used for split outputs).
    fn retallied(&self, frames: &[LabeledFrame], signals_per_cell: usize) -> Self {
        let mut m = self.clone();
        m.counts = tally(frames);
        m.total_frames = frames.len() as u64;
        m.signals_per_cell = signals_per_cell;
        m
    }
}

fn tally(frames: &[LabeledFrame]) -> Vec<CellCount> {
    let mut map: BTreeMap<(u16, i16), u64> = BTreeMap::new();
    for f in frames {
        *map.entry((f.cls.id(), f.snr.db())).or_insert(0) += 1;
    }
    map.into_iter()
        .map(|((id, snr), count)| CellCount {
            cls: ModClass::from_id(id).unwrap().name().to_string(),
            snr,
            count,
        })
        .collect()
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frame indices per (class, snr) cell, in file order.
    pub fn cells(&self) -> BTreeMap<(u16, i16), Vec<usize>> {
        let mut map: BTreeMap<(u16, i16), Vec<usize>> = BTreeMap::new();
        for (i, f) in self.frames.iter().enumerate() {
            map.entry((f.cls.id(), f.snr.db())).or_default().push(i);
        }
        map
    }
}

/// Write the binary file and its JSON manifest sidecar.
pub fn save(ds: &Dataset, path: &Path) -> Result<(), DatasetError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(ds.frames.len() as u64).to_le_bytes())?;
    w.write_all(&(WINDOW as u32).to_le_bytes())?;
    w.write_all(&(ALL_CLASSES.len() as u16).to_le_bytes())?;
    let mut rec = Vec::with_capacity(4 + WINDOW * 8);
    for f in &ds.frames {
        rec.clear();
        rec.extend_from_slice(&f.cls.id().to_le_bytes());
        rec.extend_from_slice(&f.snr.db().to_le_bytes());
        for s in f.frame.samples() {
            rec.extend_from_slice(&(s.re as f32).to_le_bytes());
            rec.extend_from_slice(&(s.im as f32).to_le_bytes());
        }
        w.write_all(&rec)?;
    }
    w.flush()?;
    let json = serde_json::to_string_pretty(&ds.manifest)
        .map_err(|e| DatasetError::ManifestParse(e.to_string()))?;
    std::fs::write(manifest_path(path), json)?;
    Ok(())
}

/// The sidecar path for a dataset path: same basename, `.json` extension.
pub fn manifest_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Parse frames out of raw `RMD1` bytes. Never panics on malformed input —
/// every defect maps to a structured error naming the byte offset or frame.
pub fn load_frames(bytes: &[u8]) -> Result<Vec<LabeledFrame>, DatasetError> {
    let take = |off: usize, n: usize| -> Result<&[u8], DatasetError> {
        bytes
            .get(off..off + n)
            .ok_or(DatasetError::UnexpectedEnd { offset: bytes.len() })
    };
    let magic: [u8; 4] = take(0, 4)?.try_into().unwrap();
    if magic != MAGIC {
        return Err(DatasetError::BadMagic { got: magic });
    }
    let version = u16::from_le_bytes(take(4, 2)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(DatasetError::UnsupportedVersion { got: version });
    }
    let n_frames = u64::from_le_bytes(take(6, 8)?.try_into().unwrap());
    let frame_len = u32::from_le_bytes(take(14, 4)?.try_into().unwrap());
    if frame_len as usize != WINDOW {
        return Err(DatasetError::UnsupportedFrameLen { got: frame_len });
    }
    let n_classes = u16::from_le_bytes(take(18, 2)?.try_into().unwrap());
    if n_classes as usize != ALL_CLASSES.len() {
        return Err(DatasetError::UnsupportedClassCount { got: n_classes });
    }

    let rec_len = 4 + WINDOW * 8;
    let mut frames = Vec::new();
    // Guard the reservation: n_frames is attacker-controlled in fuzz inputs.
    if (n_frames as usize).checked_mul(rec_len).map_or(true, |need| {
        need > bytes.len().saturating_sub(HEADER_LEN)
    }) && n_frames > 0
    {
        // Fall through to the per-frame loop, which reports the exact offset.
    } else {
        frames.reserve(n_frames as usize);
    }
    let mut off = HEADER_LEN;
    for index in 0..n_frames {
        let rec = take(off, rec_len)?;
        let cls_id = u16::from_le_bytes(rec[0..2].try_into().unwrap());
        let cls = ModClass::from_id(cls_id).ok_or_else(|| DatasetError::BadFrameField {
            index,
            what: format!("class id {cls_id}"),
        })?;
        let snr_db = i16::from_le_bytes(rec[2..4].try_into().unwrap());
        let snr = SnrLabel::new(snr_db).map_err(|_| DatasetError::BadFrameField {
            index,
            what: format!("snr label {snr_db}"),
        })?;
        let mut samples = Vec::with_capacity(WINDOW);
        for k in 0..WINDOW {
            let base = 4 + k * 8;
            let re = f32::from_le_bytes(rec[base..base + 4].try_into().unwrap());
            let im = f32::from_le_bytes(rec[base + 4..base + 8].try_into().unwrap());
            if !re.is_finite() || !im.is_finite() {
                return Err(DatasetError::BadFrameField {
                    index,
                    what: format!("sample {k} (non-finite)"),
                });
            }
            samples.push(Cpx::new(f64::from(re), f64::from(im)));
        }
        frames.push(LabeledFrame {
            frame: IqFrame::new(samples)?,
            cls,
            snr,
        });
        off += rec_len;
    }
    if off != bytes.len() {
        return Err(DatasetError::TrailingBytes {
            extra: bytes.len() - off,
            declared: n_frames,
        });
    }
    Ok(frames)
}

/// Load a dataset and verify the manifest sidecar agrees with the binary.
pub fn load(path: &Path) -> Result<Dataset, DatasetError> {
    let bytes = std::fs::read(path)?;
    let frames = load_frames(&bytes)?;
    let mpath = manifest_path(path);
    if !mpath.exists() {
        return Err(DatasetError::MissingManifest { path: mpath });
    }
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(&mpath)?)
        .map_err(|e| DatasetError::ManifestParse(e.to_string()))?;
    if manifest.total_frames != frames.len() as u64 {
        return Err(DatasetError::ManifestMismatch(format!(
            "manifest says {} frames, binary holds {}",
            manifest.total_frames,
            frames.len()
        )));
    }
    let actual = tally(&frames);
    if manifest.counts != actual {
        return Err(DatasetError::ManifestMismatch(
            "per-cell counts differ from the binary".into(),
        ));
    }
    for f in &frames {
        let id = f.cls.id();
        match manifest.class_map.iter().find(|(i, _)| *i == id) {
            Some((_, name)) if name == f.cls.name() => {}
            _ => {
                return Err(DatasetError::ManifestMismatch(format!(
                    "class id {id} missing or misnamed in class map"
                )))
            }
        }
    }
    Ok(Dataset { frames, manifest })
}

/// Frame indices for (train, val, test): per (class, snr) cell, whole source
/// signals (runs of `frames_per_signal` frames) are shuffled and dealt to the
/// splits by largest-remainder apportionment, so proportions are exact at the
/// group level and no window of one signal lands in two splits.
pub fn split_indices(ds: &Dataset, spec: &SplitSpec) -> Result<[Vec<usize>; 3], DatasetError> {
    spec.validate()?;
    let fracs = spec.fracs();
    let fps = ds.manifest.frames_per_signal.max(1);
    let mut out: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for ((cls_id, snr_db), idx) in ds.cells() {
        let mut groups: Vec<&[usize]> = idx.chunks(fps).collect();
        let cls = ModClass::from_id(cls_id).unwrap();
        let snr = SnrLabel::new(snr_db).unwrap();
        let mut rng = spec.seed.derive(cell_label(cls, snr)).rng();
        groups.shuffle(&mut rng);
        let shares = largest_remainder(groups.len(), fracs);
        for (share, frac) in shares.iter().zip(&fracs) {
            if *frac > 0.0 && *share == 0 {
                return Err(DatasetError::SplitTooSmall {
                    cls: cls.name().to_string(),
                    snr: snr_db,
                    groups: groups.len(),
                });
            }
        }
        let mut cursor = 0;
        for (k, share) in shares.iter().enumerate() {
            for g in &groups[cursor..cursor + share] {
                out[k].extend_from_slice(g);
            }
            cursor += share;
        }
    }
    // Keep file order inside each split so signal runs stay contiguous.
    for v in &mut out {
        v.sort_unstable();
    }
    Ok(out)
}

/// Cut into (train, val, test) datasets; see [`split_indices`].
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset), DatasetError> {
    let idx = split_indices(ds, spec)?;
    let fps = ds.manifest.frames_per_signal.max(1);
    let n_cells = ds.cells().len().max(1);
    let mut parts = idx.iter().map(|ix| {
        let frames: Vec<LabeledFrame> = ix.iter().map(|&i| ds.frames[i].clone()).collect();
        let signals_per_cell = ix.len() / fps / n_cells;
        Dataset {
            manifest: ds.manifest.retallied(&frames, signals_per_cell),
            frames,
        }
    });
    Ok((
        parts.next().unwrap(),
        parts.next().unwrap(),
        parts.next().unwrap(),
    ))
}

/// Apportion `n` items to three shares: floor the exact targets, then hand
/// the leftovers to the largest fractional parts (ties to the earlier share).
fn largest_remainder(n: usize, fracs: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fracs.iter().map(|f| f * n as f64).collect();
    let mut shares: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = shares.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for k in 0..n - assigned {
        shares[order[k % 3]] += 1;
    }
    [shares[0], shares[1], shares[2]]
}
