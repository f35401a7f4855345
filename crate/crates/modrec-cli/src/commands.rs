//! The five pipeline commands behind the `modrec` binary.
//!
//! Each command is a plain function taking resolved arguments and returning
//! `Result<(), CliError>`, where the error variant fixes the process exit
//! code: `User` (bad flags or config, exit 1) or `Runtime` (I/O, synthesis,
//! or training failure, exit 2). All output paths funnel through one
//! resolution rule — an explicit `--out` wins, then the `MODREC_OUT`
//! environment variable, then the config's `out_dir` — so runs land in a
//! predictable place without flags.

use std::fmt;
use std::path::{Path, PathBuf};

use modrec::baselines::{Classifier, DecisionTree, GaussianNb, Knn1, RbfSvm};
use modrec::channel::SnrLabel;
use modrec::dataset::{self, build_dataset, split_indices, Dataset, GenConfig, LabeledFrame, SplitSpec};
use modrec::eval::{
    accuracy_by_snr, class_ids, confusion, environment_string, feature_rows, frames_tensor,
    predict_frames, snr_labels, time_median, EvalRun, TimingEntry, TimingReport,
};
use modrec::features::{Standardizer, FEATURE_COUNT};
use modrec::iq::SeedSpec;
use modrec::model_io::TrainedModel;
use modrec::nn::{evaluate, train, write_history_csv, Model, ModelSpec, Tensor, TrainConfig};
use sha2::{Digest, Sha256};

use crate::config::{ModelChoice, RunConfig, SplitSel};

/// A command failure, binned by who has to fix it.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config — exit code 1.
    User(String),
    /// Synthesis, I/O, or numeric failure at run time — exit code 2.
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::User(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn user(e: impl fmt::Display) -> CliError {
    CliError::User(e.to_string())
}

fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Read and parse `--config`, or fall back to defaults when absent.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| user(format!("cannot read config {}: {e}", p.display())))?;
            RunConfig::parse(&text).map_err(user)
        }
    }
}

/// Output root: `MODREC_OUT` overrides the config's `out_dir`.
fn out_root(cfg: &RunConfig) -> PathBuf {
    match std::env::var_os("MODREC_OUT") {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(&cfg.out_dir),
    }
}

/// Final path rule: explicit `--out` wins, else `<root>/<default_name>`.
fn resolve_out(flag: Option<PathBuf>, cfg: &RunConfig, default_name: &str) -> PathBuf {
    flag.unwrap_or_else(|| out_root(cfg).join(default_name))
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    Ok(())
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    dataset::load(path).map_err(|e| runtime(format!("cannot load dataset {}: {e}", path.display())))
}

fn gather(ds: &Dataset, idx: &[usize]) -> Vec<LabeledFrame> {
    idx.iter().map(|&i| ds.frames[i].clone()).collect()
}

fn split_frames(ds: &Dataset, cfg: &RunConfig) -> Result<[Vec<LabeledFrame>; 3], CliError> {
    let spec = SplitSpec::new(
        cfg.split_train,
        cfg.split_val,
        cfg.split_test,
        SeedSpec::new(cfg.split_seed, 0),
    );
    let [itr, iva, ite] = split_indices(ds, &spec).map_err(runtime)?;
    Ok([gather(ds, &itr), gather(ds, &iva), gather(ds, &ite)])
}

fn identity_standardizer() -> Standardizer {
    Standardizer {
        mean: [0.0; FEATURE_COUNT],
        std: [1.0; FEATURE_COUNT],
    }
}

/// Feature rows for `frames`, standardized per `std`, as a `[n, 32]` tensor.
fn feature_tensor(frames: &[LabeledFrame], std: &Standardizer) -> Tensor {
    let rows = feature_rows(frames);
    let mut flat = Vec::with_capacity(rows.len() * FEATURE_COUNT);
    for r in &rows {
        flat.extend_from_slice(&std.transform_row(r));
    }
    Tensor::from_vec(&[rows.len(), FEATURE_COUNT], flat).expect("row count times 32 elements")
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes =
        std::fs::read(path).map_err(|e| runtime(format!("cannot read {}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// defaults
// ---------------------------------------------------------------------------

/// Print every config key with its default value.
pub fn cmd_defaults() -> Result<(), CliError> {
    print!("{}", RunConfig::default().to_text());
    Ok(())
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

/// Synthesize the configured dataset, save it, and print per-cell counts
/// plus the file's SHA-256 so reruns can be compared at a glance.
pub fn cmd_generate(
    config: Option<&Path>,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let gen = GenConfig {
        classes: cfg.classes.clone(),
        snrs: cfg.snrs.clone(),
        signals_per_cell: cfg.signals_per_cell,
        frames_per_signal: cfg.frames_per_signal,
        modem: cfg.modem,
        channel: cfg.channel,
        seed: SeedSpec::new(cfg.seed, 0),
    };
    let ds = build_dataset(&gen).map_err(runtime)?;

    let path = resolve_out(out, &cfg, "dataset.rmd");
    ensure_parent(&path)?;
    dataset::save(&ds, &path).map_err(runtime)?;

    println!("class      snr_db   frames");
    for c in &ds.manifest.counts {
        println!("{:<10} {:>6}   {:>6}", c.cls, c.snr, c.count);
    }
    println!("total frames: {}", ds.manifest.total_frames);
    println!("dataset: {}", path.display());
    println!("manifest: {}", dataset::manifest_path(&path).display());
    println!("sha256: {}", sha256_file(&path)?);
    Ok(())
}

// ---------------------------------------------------------------------------
// features
// ---------------------------------------------------------------------------

/// Extract the 32-feature rows for every frame in a dataset and write CSV.
pub fn cmd_features(input: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let ds = load_dataset(input)?;
    let fm = modrec::features::featurize_dataset(&ds);
    let path = resolve_out(out, &RunConfig::default(), "features.csv");
    ensure_parent(&path)?;
    modrec::features::export_features_csv(&fm, &path)
        .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {} rows x {} features to {}", fm.len(), FEATURE_COUNT, path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

fn net_spec(choice: ModelChoice) -> ModelSpec {
    ModelSpec::by_name(choice.name()).expect("net choices map to stock specs")
}

fn fit_classical(
    choice: ModelChoice,
    cfg: &RunConfig,
    x: &[Vec<f64>],
    y: &[u16],
) -> Result<Classifier, CliError> {
    let clf = match choice {
        ModelChoice::Knn1 => Classifier::Knn1(Knn1::fit(x, y).map_err(runtime)?),
        ModelChoice::Gnb => Classifier::GaussianNb(GaussianNb::fit(x, y).map_err(runtime)?),
        ModelChoice::Tree => {
            Classifier::DecisionTree(DecisionTree::fit(x, y, cfg.tree).map_err(runtime)?)
        }
        ModelChoice::Svm => Classifier::RbfSvm(RbfSvm::fit(x, y, cfg.svm).map_err(runtime)?),
        _ => unreachable!("nets are trained elsewhere"),
    };
    Ok(clf)
}

fn classical_accuracy(clf: &Classifier, x: &[Vec<f64>], y: &[u16]) -> Result<f64, CliError> {
    if x.is_empty() {
        return Ok(0.0);
    }
    let preds = clf.predict_batch(x).map_err(runtime)?;
    let hits = preds.iter().zip(y).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / x.len() as f64)
}

/// Train the configured model on a dataset and write the model container,
/// a training-history CSV (networks), and a config snapshot beside it.
pub fn cmd_train(
    input: &Path,
    model_flag: Option<&str>,
    config: Option<&Path>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let mut cfg = load_config(config)?;
    if let Some(m) = model_flag {
        cfg.model = ModelChoice::parse(m).map_err(user)?;
    }
    let ds = load_dataset(input)?;
    let [ftr, fva, fte] = split_frames(&ds, &cfg)?;
    if ftr.is_empty() || fva.is_empty() {
        return Err(runtime(
            "train or val split came up empty; grow the dataset or adjust split fractions",
        ));
    }

    let name = cfg.model.name();
    let out_path = resolve_out(out, &cfg, &format!("model_{name}.rmm"));
    ensure_parent(&out_path)?;
    let stem = out_path.with_extension("");
    let history_path = PathBuf::from(format!("{}_history.csv", stem.display()));
    let config_path = PathBuf::from(format!("{}_config.txt", stem.display()));

    if cfg.model.is_net() {
        let uses_features = cfg.model == ModelChoice::DnnFeat;
        let (x_tr, x_va, x_te, norm) = if uses_features {
            let rows_tr = feature_rows(&ftr);
            let std = if cfg.standardize {
                Standardizer::fit(&rows_tr).map_err(runtime)?
            } else {
                identity_standardizer()
            };
            (
                feature_tensor(&ftr, &std),
                feature_tensor(&fva, &std),
                feature_tensor(&fte, &std),
                Some(std),
            )
        } else {
            (frames_tensor(&ftr), frames_tensor(&fva), frames_tensor(&fte), None)
        };
        let y_tr = class_ids(&ftr);
        let y_va = class_ids(&fva);
        let y_te = class_ids(&fte);

        let tc = TrainConfig {
            batch_size: cfg.train.batch_size,
            lr: cfg.train.lr,
            beta1: cfg.train.beta1,
            beta2: cfg.train.beta2,
            eps: cfg.train.eps,
            epochs: cfg.train.epochs,
            patience: if cfg.train.patience == 0 { None } else { Some(cfg.train.patience) },
            seed: SeedSpec::new(cfg.train.seed, 0),
        };
        let mut model = Model::build(net_spec(cfg.model), SeedSpec::new(cfg.train.seed, 0))
            .map_err(runtime)?;
        println!(
            "training {name}: {} params, {} train / {} val frames, batch {}",
            model.n_params(),
            y_tr.len(),
            y_va.len(),
            tc.batch_size
        );
        let report = train(&mut model, &x_tr, &y_tr, &x_va, &y_va, &tc).map_err(runtime)?;

        let tm = TrainedModel::from_net(&model, norm);
        tm.save(&out_path).map_err(runtime)?;
        write_history_csv(&history_path, &report.history)
            .map_err(|e| runtime(format!("cannot write {}: {e}", history_path.display())))?;
        std::fs::write(&config_path, cfg.to_text())
            .map_err(|e| runtime(format!("cannot write {}: {e}", config_path.display())))?;

        let best = &report.history[report.best_epoch];
        println!(
            "best epoch {}: val_loss {:.4}, val_acc {:.4}",
            report.best_epoch, best.val_loss, best.val_acc
        );
        if !y_te.is_empty() {
            let (te_loss, te_acc) = evaluate(&model, &x_te, &y_te, cfg.eval_batch).map_err(runtime)?;
            println!("test: loss {te_loss:.4}, accuracy {te_acc:.4} over {} frames", y_te.len());
        }
        println!("model: {}", out_path.display());
        println!("history: {}", history_path.display());
    } else {
        let rows_tr = feature_rows(&ftr);
        let std = if cfg.standardize {
            Standardizer::fit(&rows_tr).map_err(runtime)?
        } else {
            identity_standardizer()
        };
        let to_vecs = |frames: &[LabeledFrame]| -> Vec<Vec<f64>> {
            feature_rows(frames)
                .iter()
                .map(|r| std.transform_row(r).to_vec())
                .collect()
        };
        let x_tr = to_vecs(&ftr);
        let y_tr: Vec<u16> = ftr.iter().map(|f| f.cls.id()).collect();
        println!("fitting {name} on {} train rows", x_tr.len());
        let clf = fit_classical(cfg.model, &cfg, &x_tr, &y_tr)?;

        let train_acc = classical_accuracy(&clf, &x_tr, &y_tr)?;
        let x_te = to_vecs(&fte);
        let y_te: Vec<u16> = fte.iter().map(|f| f.cls.id()).collect();
        let tm = TrainedModel::Classical { clf, norm: std };
        tm.save(&out_path).map_err(runtime)?;
        std::fs::write(&config_path, cfg.to_text())
            .map_err(|e| runtime(format!("cannot write {}: {e}", config_path.display())))?;

        println!("train accuracy: {train_acc:.4}");
        if !y_te.is_empty() {
            let tm_acc = match &tm {
                TrainedModel::Classical { clf, .. } => classical_accuracy(clf, &x_te, &y_te)?,
                _ => unreachable!(),
            };
            println!("test accuracy: {tm_acc:.4} over {} frames", y_te.len());
        }
        println!("model: {}", out_path.display());
    }
    println!("config snapshot: {}", config_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

fn parse_snr_list(s: &str) -> Result<Vec<SnrLabel>, CliError> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let db: i16 = part
            .trim()
            .parse()
            .map_err(|_| user(format!("--snr expects comma-separated dB integers, got '{part}'")))?;
        out.push(SnrLabel::new(db).map_err(user)?);
    }
    Ok(out)
}

/// Evaluate a saved model on a dataset split and emit the report files.
#[allow(clippy::too_many_arguments)]
pub fn cmd_eval(
    input: &Path,
    model_path: &Path,
    config: Option<&Path>,
    out: Option<PathBuf>,
    split: Option<&str>,
    snr: Option<&str>,
    no_svg: bool,
) -> Result<(), CliError> {
    let mut cfg = load_config(config)?;
    if let Some(s) = split {
        cfg.eval_split = SplitSel::parse(s).map_err(user)?;
    }
    let tm = TrainedModel::load(model_path)
        .map_err(|e| runtime(format!("cannot load model {}: {e}", model_path.display())))?;
    let ds = load_dataset(input)?;
    let frames = match cfg.eval_split {
        SplitSel::All => ds.frames.clone(),
        sel => {
            let [ftr, fva, fte] = split_frames(&ds, &cfg)?;
            match sel {
                SplitSel::Train => ftr,
                SplitSel::Val => fva,
                SplitSel::Test => fte,
                SplitSel::All => unreachable!(),
            }
        }
    };
    if frames.is_empty() {
        return Err(runtime(format!(
            "split '{}' holds no frames in this dataset",
            cfg.eval_split.name()
        )));
    }

    let preds = predict_frames(&tm, &frames, cfg.eval_batch).map_err(runtime)?;
    let labels = class_ids(&frames);
    let snrs = snr_labels(&frames);
    let curve = accuracy_by_snr(&preds, &labels, &snrs).map_err(runtime)?;

    let filters: Vec<SnrLabel> = match snr {
        Some(list) => parse_snr_list(list)?,
        None => curve.points.iter().map(|p| p.snr).collect(),
    };
    let mut confusions = vec![confusion(&preds, &labels, &snrs, None).map_err(runtime)?];
    for f in &filters {
        confusions.push(confusion(&preds, &labels, &snrs, Some(*f)).map_err(runtime)?);
    }

    let run = EvalRun {
        model_name: tm.kind().to_string(),
        config_text: cfg.to_text(),
        curve,
        confusions,
        timing: None,
    };
    let dir = resolve_out(out, &cfg, "eval");
    let files = modrec::eval::emit_report(&run, &dir, !no_svg).map_err(runtime)?;

    println!(
        "{} on split '{}': accuracy {:.4} over {} frames",
        run.model_name,
        cfg.eval_split.name(),
        run.curve.overall_accuracy(),
        run.curve.total_examples()
    );
    for p in &run.curve.points {
        println!("  {:>4} dB: {:.4}  (n={})", p.snr, p.accuracy, p.n);
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

fn bench_one(
    choice: ModelChoice,
    cfg: &RunConfig,
    ftr: &[LabeledFrame],
    fcl: &[LabeledFrame],
) -> Result<TimingEntry, CliError> {
    let name = choice.name();
    let reps = cfg.bench_reps;

    if choice.is_net() {
        let uses_features = choice == ModelChoice::DnnFeat;
        let (x_tr, norm) = if uses_features {
            let rows = feature_rows(ftr);
            let std = if cfg.standardize {
                Standardizer::fit(&rows).map_err(runtime)?
            } else {
                identity_standardizer()
            };
            (feature_tensor(ftr, &std), Some(std))
        } else {
            (frames_tensor(ftr), None)
        };
        let y_tr = class_ids(ftr);
        // A small held-out slice keeps the per-epoch validation pass cheap
        // while exercising the same code path a real run does.
        let n_val = y_tr.len().min(256);
        let x_va = x_tr.gather(&(0..n_val).collect::<Vec<_>>());
        let y_va = y_tr[..n_val].to_vec();
        let tc = TrainConfig {
            batch_size: cfg.train.batch_size,
            lr: cfg.train.lr,
            beta1: cfg.train.beta1,
            beta2: cfg.train.beta2,
            eps: cfg.train.eps,
            epochs: 1,
            patience: None,
            seed: SeedSpec::new(cfg.train.seed, 0),
        };
        let one_epoch = || {
            let mut m = Model::build(net_spec(choice), SeedSpec::new(cfg.train.seed, 0))
                .expect("stock spec builds");
            train(&mut m, &x_tr, &y_tr, &x_va, &y_va, &tc).expect("one timing epoch");
            m
        };
        let train_stat = time_median(name, y_tr.len(), reps, || {
            one_epoch();
        });

        let model = one_epoch();
        let tm = TrainedModel::from_net(&model, norm);
        predict_frames(&tm, fcl, cfg.eval_batch).map_err(runtime)?;
        let classify_stat = time_median(name, fcl.len(), reps, || {
            predict_frames(&tm, fcl, cfg.eval_batch).expect("validated above");
        });
        Ok(TimingEntry {
            model: name.to_string(),
            train: Some(train_stat),
            classify: Some(classify_stat),
        })
    } else {
        let rows = feature_rows(ftr);
        let std = if cfg.standardize {
            Standardizer::fit(&rows).map_err(runtime)?
        } else {
            identity_standardizer()
        };
        let x_tr: Vec<Vec<f64>> = rows.iter().map(|r| std.transform_row(r).to_vec()).collect();
        let y_tr: Vec<u16> = ftr.iter().map(|f| f.cls.id()).collect();
        fit_classical(choice, cfg, &x_tr, &y_tr)?;
        let train_stat = time_median(name, y_tr.len(), reps, || {
            fit_classical(choice, cfg, &x_tr, &y_tr).expect("validated above");
        });

        let clf = fit_classical(choice, cfg, &x_tr, &y_tr)?;
        let tm = TrainedModel::Classical { clf, norm: std };
        predict_frames(&tm, fcl, cfg.eval_batch).map_err(runtime)?;
        let classify_stat = time_median(name, fcl.len(), reps, || {
            predict_frames(&tm, fcl, cfg.eval_batch).expect("validated above");
        });
        Ok(TimingEntry {
            model: name.to_string(),
            train: Some(train_stat),
            classify: Some(classify_stat),
        })
    }
}

/// Time training and classification for the requested models and write
/// timing.csv / timing.json.
pub fn cmd_bench(
    input: &Path,
    models: Option<&str>,
    config: Option<&Path>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let list: Vec<ModelChoice> = match models {
        None => ModelChoice::ALL.to_vec(),
        Some(s) => {
            let mut v = Vec::new();
            for part in s.split(',') {
                v.push(ModelChoice::parse(part.trim()).map_err(user)?);
            }
            v
        }
    };
    let ds = load_dataset(input)?;
    let [ftr, _, fte] = split_frames(&ds, &cfg)?;
    if ftr.is_empty() {
        return Err(runtime("train split holds no frames to time against"));
    }
    let ftr: Vec<LabeledFrame> = ftr.into_iter().take(cfg.bench_train_frames).collect();
    // Classification is timed on test frames when the split has any, so the
    // numbers reflect unseen data; tiny datasets fall back to train frames.
    let pool = if fte.is_empty() { &ftr } else { &fte };
    let fcl: Vec<LabeledFrame> = pool.iter().take(cfg.bench_classify_frames).cloned().collect();

    let mut entries = Vec::with_capacity(list.len());
    for &choice in &list {
        println!("benchmarking {} ...", choice.name());
        entries.push(bench_one(choice, &cfg, &ftr, &fcl)?);
    }
    let report = TimingReport {
        environment: environment_string(),
        entries,
    };

    let dir = resolve_out(out, &cfg, "bench");
    std::fs::create_dir_all(&dir)
        .map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
    let csv_path = dir.join("timing.csv");
    std::fs::write(&csv_path, report.to_csv())
        .map_err(|e| runtime(format!("cannot write {}: {e}", csv_path.display())))?;
    let json_path = dir.join("timing.json");
    let mut json = serde_json::to_vec_pretty(&report).map_err(runtime)?;
    json.push(b'\n');
    std::fs::write(&json_path, json)
        .map_err(|e| runtime(format!("cannot write {}: {e}", json_path.display())))?;

    println!("environment: {}", report.environment);
    print!("{}", report.to_csv());
    println!("wrote {}", csv_path.display());
    println!("wrote {}", json_path.display());
    Ok(())
}
