//! `modrec` — command-line front end for the modulation-recognition toolkit.
//!
//! Five subcommands cover the pipeline end to end: `generate` synthesizes a
//! labeled IQ dataset, `features` extracts the 32-value feature rows,
//! `train` fits a network or classical classifier, `eval` writes the
//! accuracy/confusion report, and `bench` times the models. `defaults`
//! prints the full run configuration. Every command is deterministic given
//! the same config and seed.
//!
//! Exit codes: 0 success, 1 bad flags or config, 2 runtime failure
//! (synthesis, I/O, non-finite training loss).

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use modrec_cli::commands::{self, CliError};
use modrec_cli::config::KEYS;

fn key_help() -> String {
    let mut s = String::from(
        "Config file keys (flat 'key = value' lines; 'modrec defaults' prints them all):\n",
    );
    for chunk in KEYS.chunks(4) {
        s.push_str("  ");
        s.push_str(&chunk.join(", "));
        s.push('\n');
    }
    s.push_str("\nOutput root: --out > MODREC_OUT > config out_dir.");
    s
}

#[derive(Parser)]
#[command(
    name = "modrec",
    version,
    about = "Synthesize, featurize, train, and evaluate radio modulation classifiers",
    after_help = key_help()
)]
struct Cli {
    /// Cap worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print every config key with its default value.
    Defaults,
    /// Synthesize a labeled IQ dataset and write it with its manifest.
    Generate {
        /// Run config file (defaults apply when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset output path (default <root>/dataset.rmd).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Extract feature rows from a dataset into a CSV file.
    Features {
        /// Dataset file to read.
        #[arg(long = "in")]
        input: PathBuf,
        /// CSV output path (default <root>/features.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the configured model and write the model container.
    Train {
        /// Dataset file to train on.
        #[arg(long = "in")]
        input: PathBuf,
        /// Model to train (overrides the config's `model` key).
        #[arg(long)]
        model: Option<String>,
        /// Run config file (defaults apply when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Model output path (default <root>/model_<name>.rmm).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a saved model and emit the report files.
    Eval {
        /// Dataset file to evaluate on.
        #[arg(long = "in")]
        input: PathBuf,
        /// Saved model file to load.
        #[arg(long)]
        model: PathBuf,
        /// Run config file (defaults apply when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report directory (default <root>/eval).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Split to evaluate: train, val, test, or all.
        #[arg(long)]
        split: Option<String>,
        /// Restrict per-SNR confusion matrices to these dB values (comma list).
        #[arg(long)]
        snr: Option<String>,
        /// Skip the SNR-curve SVG.
        #[arg(long)]
        no_svg: bool,
    },
    /// Time training and classification across models.
    Bench {
        /// Dataset file to time against.
        #[arg(long = "in")]
        input: PathBuf,
        /// Comma list of models to bench (default: all seven).
        #[arg(long)]
        models: Option<String>,
        /// Run config file (defaults apply when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (default <root>/bench).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Defaults => commands::cmd_defaults(),
        Cmd::Generate { config, out, seed } => {
            commands::cmd_generate(config.as_deref(), out, seed)
        }
        Cmd::Features { input, out } => commands::cmd_features(&input, out),
        Cmd::Train { input, model, config, out } => {
            commands::cmd_train(&input, model.as_deref(), config.as_deref(), out)
        }
        Cmd::Eval { input, model, config, out, split, snr, no_svg } => commands::cmd_eval(
            &input,
            &model,
            config.as_deref(),
            out,
            split.as_deref(),
            snr.as_deref(),
            no_svg,
        ),
        Cmd::Bench { input, models, config, out } => {
            commands::cmd_bench(&input, models.as_deref(), config.as_deref(), out)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if cli.threads > 0 {
        // A failure here means a pool already exists, which only happens in
        // in-process tests; the cap is still honored for real invocations.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    if let Err(e) = run(cli.cmd) {
        eprintln!("error: {e}");
        std::process::exit(e.code());
    }
}
