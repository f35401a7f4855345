//! Flat key=value run configuration for the `modrec` binary.
//!
//! One text file drives every subcommand: dataset synthesis, feature
//! options, model choice, training hyperparameters, and output locations.
//! The format is deliberately section-free — `key = value`, one per line,
//! `#` starts a comment line, arrays are comma lists — so configs diff
//! cleanly. Every key has a default; `modrec defaults` prints them all, and
//! that printout parses back to the identical config. Unknown keys,
//! duplicates, and malformed values are rejected with the offending line
//! number.

use std::fmt;

use modrec::baselines::{SvmParams, TreeParams};
use modrec::channel::{ChannelParams, ALL_SNRS};
use modrec::modem::{ModClass, ModemConfig, ALL_CLASSES};

/// Every config key the parser accepts, in the order `to_text` prints them.
pub const KEYS: [&str; 44] = [
    "classes",
    "snrs",
    "signals_per_cell",
    "frames_per_signal",
    "seed",
    "modem.sps",
    "modem.rrc_beta",
    "modem.rrc_span",
    "modem.fsk_mod_index",
    "modem.fm_deviation",
    "modem.am_depth",
    "channel.cfo_walk_std",
    "channel.cfo_init_max",
    "channel.clk_walk_std",
    "channel.clk_init_max",
    "channel.n_taps",
    "channel.pdp_decay",
    "channel.max_doppler",
    "split.train",
    "split.val",
    "split.test",
    "split.seed",
    "features.standardize",
    "model",
    "train.batch_size",
    "train.lr",
    "train.beta1",
    "train.beta2",
    "train.eps",
    "train.epochs",
    "train.patience",
    "train.seed",
    "tree.max_depth",
    "tree.min_leaf",
    "svm.c",
    "svm.gamma",
    "svm.tol",
    "svm.max_sweeps",
    "eval.batch",
    "eval.split",
    "bench.reps",
    "bench.train_frames",
    "bench.classify_frames",
    "out_dir",
];

/// Which model a run trains or evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelChoice {
    Cnn,
    Cnn2,
    DnnFeat,
    Knn1,
    Gnb,
    Tree,
    Svm,
}

impl ModelChoice {
    /// Canonical config-file spelling.
    pub fn name(self) -> &'static str {
        match self {
            ModelChoice::Cnn => "cnn",
            ModelChoice::Cnn2 => "cnn2",
            ModelChoice::DnnFeat => "dnn_feat",
            ModelChoice::Knn1 => "knn1",
            ModelChoice::Gnb => "gnb",
            ModelChoice::Tree => "tree",
            ModelChoice::Svm => "svm",
        }
    }

    /// True for the gradient-trained networks, false for the classical four.
    pub fn is_net(self) -> bool {
        matches!(self, ModelChoice::Cnn | ModelChoice::Cnn2 | ModelChoice::DnnFeat)
    }

    /// Parse a model name; accepts a few common aliases.
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "cnn" => Ok(ModelChoice::Cnn),
            "cnn2" => Ok(ModelChoice::Cnn2),
            "dnn_feat" | "dnn-feat" => Ok(ModelChoice::DnnFeat),
            "knn1" => Ok(ModelChoice::Knn1),
            "gnb" | "gaussian_nb" => Ok(ModelChoice::Gnb),
            "tree" | "decision_tree" => Ok(ModelChoice::Tree),
            "svm" | "rbf_svm" => Ok(ModelChoice::Svm),
            other => Err(format!(
                "unknown model '{other}' (expected one of cnn, cnn2, dnn_feat, knn1, gnb, tree, svm)"
            )),
        }
    }

    /// Every model, in the order bench reports them.
    pub const ALL: [ModelChoice; 7] = [
        ModelChoice::Cnn,
        ModelChoice::Cnn2,
        ModelChoice::DnnFeat,
        ModelChoice::Knn1,
        ModelChoice::Gnb,
        ModelChoice::Tree,
        ModelChoice::Svm,
    ];
}

/// Which dataset split a command operates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitSel {
    Train,
    Val,
    Test,
    All,
}

impl SplitSel {
    pub fn name(self) -> &'static str {
        match self {
            SplitSel::Train => "train",
            SplitSel::Val => "val",
            SplitSel::Test => "test",
            SplitSel::All => "all",
        }
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(SplitSel::Train),
            "val" => Ok(SplitSel::Val),
            "test" => Ok(SplitSel::Test),
            "all" => Ok(SplitSel::All),
            other => Err(format!(
                "unknown split '{other}' (expected train, val, test, or all)"
            )),
        }
    }
}

/// Training hyperparameters as they appear in the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainKeys {
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    /// Early-stopping patience in epochs; 0 disables early stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainKeys {
    fn default() -> Self {
        Self {
            batch_size: 1024,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 60,
            patience: 10,
            seed: 77,
        }
    }
}

/// The full run configuration; every field has a printable default.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub classes: Vec<ModClass>,
    pub snrs: Vec<i16>,
    pub signals_per_cell: usize,
    pub frames_per_signal: usize,
    /// Master seed for dataset synthesis (stream 0).
    pub seed: u64,
    pub modem: ModemConfig,
    pub channel: ChannelParams,
    pub split_train: f64,
    pub split_val: f64,
    pub split_test: f64,
    pub split_seed: u64,
    pub standardize: bool,
    pub model: ModelChoice,
    pub train: TrainKeys,
    pub tree: TreeParams,
    pub svm: SvmParams,
    pub eval_batch: usize,
    pub eval_split: SplitSel,
    pub bench_reps: usize,
    pub bench_train_frames: usize,
    pub bench_classify_frames: usize,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            classes: ALL_CLASSES.to_vec(),
            snrs: ALL_SNRS.to_vec(),
            signals_per_cell: 200,
            frames_per_signal: 20,
            seed: 2016,
            modem: ModemConfig::default(),
            channel: ChannelParams::default(),
            split_train: 0.6,
            split_val: 0.2,
            split_test: 0.2,
            split_seed: 777,
            standardize: true,
            model: ModelChoice::Cnn,
            train: TrainKeys::default(),
            tree: TreeParams::default(),
            svm: SvmParams::default(),
            eval_batch: 256,
            eval_split: SplitSel::Test,
            bench_reps: 5,
            bench_train_frames: 2048,
            bench_classify_frames: 2048,
            out_dir: "runs".to_string(),
        }
    }
}

/// A config rejection: what went wrong and on which line (1-based; 0 for
/// whole-file problems like inconsistent split fractions).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config: {}", self.msg)
        } else {
            write!(f, "config line {}: {}", self.line, self.msg)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError { line, msg: msg.into() }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str, ty: &str) -> Result<T, ConfigError> {
    v.parse::<T>()
        .map_err(|_| err(line, format!("key '{key}' expects {ty}, got '{v}'")))
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(err(line, format!("key '{key}' expects true or false, got '{v}'"))),
    }
}

fn parse_classes(line: usize, v: &str) -> Result<Vec<ModClass>, ConfigError> {
    if v == "all" {
        return Ok(ALL_CLASSES.to_vec());
    }
    let mut out = Vec::new();
    for part in v.split(',') {
        let name = part.trim();
        let cls = ModClass::from_name(&name.to_ascii_uppercase())
            .ok_or_else(|| err(line, format!("unknown class '{name}' in 'classes'")))?;
        if out.contains(&cls) {
            return Err(err(line, format!("class '{name}' listed twice in 'classes'")));
        }
        out.push(cls);
    }
    Ok(out)
}

fn parse_snrs(line: usize, v: &str) -> Result<Vec<i16>, ConfigError> {
    if v == "all" {
        return Ok(ALL_SNRS.to_vec());
    }
    let mut out = Vec::new();
    for part in v.split(',') {
        let s = part.trim();
        let db: i16 = parse_num(line, "snrs", s, "an integer dB value")?;
        if out.contains(&db) {
            return Err(err(line, format!("SNR {db} listed twice in 'snrs'")));
        }
        out.push(db);
    }
    Ok(out)
}

impl RunConfig {
    /// Parse a config file body on top of the defaults.
    ///
    /// Blank lines and `#` comment lines are skipped. Each remaining line
    /// must be `key = value` for a known key; duplicate keys are rejected so
    /// a config never silently depends on line order.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<(String, usize)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(lineno, format!("expected 'key = value', got '{line}'")))?;
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(err(lineno, format!("key '{key}' has an empty value")));
            }
            if let Some((_, first)) = seen.iter().find(|(k, _)| k == key) {
                return Err(err(
                    lineno,
                    format!("duplicate key '{key}' (first set on line {first})"),
                ));
            }
            seen.push((key.to_string(), lineno));
            cfg.set(lineno, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "classes" => self.classes = parse_classes(line, v)?,
            "snrs" => self.snrs = parse_snrs(line, v)?,
            "signals_per_cell" => self.signals_per_cell = parse_num(line, key, v, "a positive integer")?,
            "frames_per_signal" => self.frames_per_signal = parse_num(line, key, v, "a positive integer")?,
            "seed" => self.seed = parse_num(line, key, v, "an unsigned integer")?,
            "modem.sps" => self.modem.sps = parse_num(line, key, v, "a positive integer")?,
            "modem.rrc_beta" => self.modem.rrc_beta = parse_num(line, key, v, "a number")?,
            "modem.rrc_span" => self.modem.rrc_span = parse_num(line, key, v, "a positive integer")?,
            "modem.fsk_mod_index" => self.modem.fsk_mod_index = parse_num(line, key, v, "a number")?,
            "modem.fm_deviation" => self.modem.fm_deviation = parse_num(line, key, v, "a number")?,
            "modem.am_depth" => self.modem.am_depth = parse_num(line, key, v, "a number")?,
            "channel.cfo_walk_std" => self.channel.cfo_walk_std = parse_num(line, key, v, "a number")?,
            "channel.cfo_init_max" => self.channel.cfo_init_max = parse_num(line, key, v, "a number")?,
            "channel.clk_walk_std" => self.channel.clk_walk_std = parse_num(line, key, v, "a number")?,
            "channel.clk_init_max" => self.channel.clk_init_max = parse_num(line, key, v, "a number")?,
            "channel.n_taps" => self.channel.n_taps = parse_num(line, key, v, "a positive integer")?,
            "channel.pdp_decay" => self.channel.pdp_decay = parse_num(line, key, v, "a number")?,
            "channel.max_doppler" => self.channel.max_doppler = parse_num(line, key, v, "a number")?,
            "split.train" => self.split_train = parse_num(line, key, v, "a fraction")?,
            "split.val" => self.split_val = parse_num(line, key, v, "a fraction")?,
            "split.test" => self.split_test = parse_num(line, key, v, "a fraction")?,
            "split.seed" => self.split_seed = parse_num(line, key, v, "an unsigned integer")?,
            "features.standardize" => self.standardize = parse_bool(line, key, v)?,
            "model" => self.model = ModelChoice::parse(v).map_err(|m| err(line, m))?,
            "train.batch_size" => self.train.batch_size = parse_num(line, key, v, "a positive integer")?,
            "train.lr" => self.train.lr = parse_num(line, key, v, "a number")?,
            "train.beta1" => self.train.beta1 = parse_num(line, key, v, "a number")?,
            "train.beta2" => self.train.beta2 = parse_num(line, key, v, "a number")?,
            "train.eps" => self.train.eps = parse_num(line, key, v, "a number")?,
            "train.epochs" => self.train.epochs = parse_num(line, key, v, "a positive integer")?,
            "train.patience" => self.train.patience = parse_num(line, key, v, "an integer (0 disables)")?,
            "train.seed" => self.train.seed = parse_num(line, key, v, "an unsigned integer")?,
            "tree.max_depth" => self.tree.max_depth = parse_num(line, key, v, "a positive integer")?,
            "tree.min_leaf" => self.tree.min_leaf = parse_num(line, key, v, "a positive integer")?,
            "svm.c" => self.svm.c = parse_num(line, key, v, "a number")?,
            "svm.gamma" => self.svm.gamma = parse_num(line, key, v, "a number")?,
            "svm.tol" => self.svm.tol = parse_num(line, key, v, "a number")?,
            "svm.max_sweeps" => self.svm.max_sweeps = parse_num(line, key, v, "a positive integer")?,
            "eval.batch" => self.eval_batch = parse_num(line, key, v, "a positive integer")?,
            "eval.split" => self.eval_split = SplitSel::parse(v).map_err(|m| err(line, m))?,
            "bench.reps" => self.bench_reps = parse_num(line, key, v, "a positive integer")?,
            "bench.train_frames" => self.bench_train_frames = parse_num(line, key, v, "a positive integer")?,
            "bench.classify_frames" => self.bench_classify_frames = parse_num(line, key, v, "a positive integer")?,
            "out_dir" => self.out_dir = v.to_string(),
            other => {
                return Err(err(
                    line,
                    format!("unknown key '{other}' (run 'modrec defaults' for the full key list)"),
                ))
            }
        }
        Ok(())
    }

    /// Whole-config checks that no single line can establish.
    fn validate(&self) -> Result<(), ConfigError> {
        if self.classes.is_empty() {
            return Err(err(0, "'classes' must name at least one class"));
        }
        if self.snrs.is_empty() {
            return Err(err(0, "'snrs' must list at least one dB value"));
        }
        if self.signals_per_cell == 0 || self.frames_per_signal == 0 {
            return Err(err(0, "signals_per_cell and frames_per_signal must be at least 1"));
        }
        let fr = [self.split_train, self.split_val, self.split_test];
        if fr.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(err(0, "split fractions must each lie strictly between 0 and 1"));
        }
        let sum: f64 = fr.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(err(0, format!("split fractions must sum to 1, got {sum}")));
        }
        if self.train.batch_size == 0 || self.train.epochs == 0 {
            return Err(err(0, "train.batch_size and train.epochs must be at least 1"));
        }
        if self.eval_batch == 0 {
            return Err(err(0, "eval.batch must be at least 1"));
        }
        if self.bench_reps == 0 {
            return Err(err(0, "bench.reps must be at least 1"));
        }
        if self.bench_train_frames == 0 || self.bench_classify_frames == 0 {
            return Err(err(0, "bench frame caps must be at least 1"));
        }
        Ok(())
    }

    /// Render every key with its current value; `parse` of this text
    /// reproduces the config exactly.
    pub fn to_text(&self) -> String {
        let classes = if self.classes == ALL_CLASSES {
            "all".to_string()
        } else {
            self.classes.iter().map(|c| c.name()).collect::<Vec<_>>().join(",")
        };
        let snrs = if self.snrs == ALL_SNRS {
            "all".to_string()
        } else {
            self.snrs.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
        };
        format!(
            "# modrec run configuration: 'key = value' lines, '#' comments, comma lists.\n\
             # Unknown keys are rejected; every key below shows its default.\n\
             \n\
             # dataset grid\n\
             classes = {classes}\n\
             snrs = {snrs}\n\
             signals_per_cell = {spc}\n\
             frames_per_signal = {fps}\n\
             seed = {seed}\n\
             \n\
             # modulator\n\
             modem.sps = {sps}\n\
             modem.rrc_beta = {beta}\n\
             modem.rrc_span = {span}\n\
             modem.fsk_mod_index = {fsk}\n\
             modem.fm_deviation = {fmdev}\n\
             modem.am_depth = {am}\n\
             \n\
             # channel impairments\n\
             channel.cfo_walk_std = {cwalk}\n\
             channel.cfo_init_max = {cinit}\n\
             channel.clk_walk_std = {kwalk}\n\
             channel.clk_init_max = {kinit}\n\
             channel.n_taps = {taps}\n\
             channel.pdp_decay = {pdp}\n\
             channel.max_doppler = {dopp}\n\
             \n\
             # train/val/test split (grouped by source signal)\n\
             split.train = {st}\n\
             split.val = {sv}\n\
             split.test = {ste}\n\
             split.seed = {sseed}\n\
             \n\
             # features\n\
             features.standardize = {std}\n\
             \n\
             # model: cnn, cnn2, dnn_feat, knn1, gnb, tree, svm\n\
             model = {model}\n\
             \n\
             # network training\n\
             train.batch_size = {bs}\n\
             train.lr = {lr}\n\
             train.beta1 = {b1}\n\
             train.beta2 = {b2}\n\
             train.eps = {eps}\n\
             train.epochs = {ep}\n\
             train.patience = {pat}\n\
             train.seed = {tseed}\n\
             \n\
             # decision tree\n\
             tree.max_depth = {tmd}\n\
             tree.min_leaf = {tml}\n\
             \n\
             # rbf svm\n\
             svm.c = {sc}\n\
             svm.gamma = {sg}\n\
             svm.tol = {stol}\n\
             svm.max_sweeps = {ssw}\n\
             \n\
             # evaluation\n\
             eval.batch = {eb}\n\
             eval.split = {es}\n\
             \n\
             # benchmarking\n\
             bench.reps = {br}\n\
             bench.train_frames = {btf}\n\
             bench.classify_frames = {bcf}\n\
             \n\
             # output root (MODREC_OUT overrides; --out overrides both)\n\
             out_dir = {od}\n",
            classes = classes,
            snrs = snrs,
            spc = self.signals_per_cell,
            fps = self.frames_per_signal,
            seed = self.seed,
            sps = self.modem.sps,
            beta = self.modem.rrc_beta,
            span = self.modem.rrc_span,
            fsk = self.modem.fsk_mod_index,
            fmdev = self.modem.fm_deviation,
            am = self.modem.am_depth,
            cwalk = self.channel.cfo_walk_std,
            cinit = self.channel.cfo_init_max,
            kwalk = self.channel.clk_walk_std,
            kinit = self.channel.clk_init_max,
            taps = self.channel.n_taps,
            pdp = self.channel.pdp_decay,
            dopp = self.channel.max_doppler,
            st = self.split_train,
            sv = self.split_val,
            ste = self.split_test,
            sseed = self.split_seed,
            std = self.standardize,
            model = self.model.name(),
            bs = self.train.batch_size,
            lr = self.train.lr,
            b1 = self.train.beta1,
            b2 = self.train.beta2,
            eps = self.train.eps,
            ep = self.train.epochs,
            pat = self.train.patience,
            tseed = self.train.seed,
            tmd = self.tree.max_depth,
            tml = self.tree.min_leaf,
            sc = self.svm.c,
            sg = self.svm.gamma,
            stol = self.svm.tol,
            ssw = self.svm.max_sweeps,
            eb = self.eval_batch,
            es = self.eval_split.name(),
            br = self.bench_reps,
            btf = self.bench_train_frames,
            bcf = self.bench_classify_frames,
            od = self.out_dir,
        )
    }
}
