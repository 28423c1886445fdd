//! Batch driver for the pseudo-box pipeline.
//!
//! Every command writes its outputs under one directory together with a
//! `manifest.txt` describing the run, whether it succeeded or not. Files are
//! paired across directories by stem (`scene_0003.cpm` with
//! `scene_0003.txt`).

use std::fmt;
use std::path::{Path, PathBuf};

use pseudobox_core::formats::Config;
use pseudobox_core::SampleMode;

mod ablate;
mod bench;
mod io;
mod manifest;
mod pipeline;
mod synth;

pub use ablate::{cmd_ablate, AblateRow};
pub use bench::{cmd_bench, BenchReport};
pub use manifest::Manifest;
pub use pipeline::{cmd_assign, cmd_eval, cmd_extract, EvalSummary};
pub use synth::cmd_synth;

pub const MANIFEST_FILE: &str = "manifest.txt";

/// A failed command: bad input (exit 1) or an internal fault (exit 2).
#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    pub fn input(e: impl Into<anyhow::Error>) -> Self {
        Failure::Input(e.into())
    }

    pub fn internal(e: impl Into<anyhow::Error>) -> Self {
        Failure::Internal(e.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 1,
            Failure::Internal(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(e) => write!(f, "input error: {e:#}"),
            Failure::Internal(e) => write!(f, "internal error: {e:#}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<pseudobox_core::Error> for Failure {
    fn from(e: pseudobox_core::Error) -> Self {
        Failure::Input(e.into())
    }
}

pub type CmdResult<T> = std::result::Result<T, Failure>;

/// A subcommand with its inputs. Unset paths fall back to the config.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Synth,
    Assign {
        points: Option<PathBuf>,
        classes: Option<PathBuf>,
    },
    Extract {
        cpm: Option<PathBuf>,
        points: Option<PathBuf>,
        classes: Option<PathBuf>,
        sample_mode: Option<SampleMode>,
    },
    Eval {
        pseudo: Option<PathBuf>,
        gt: Option<PathBuf>,
        classes: Option<PathBuf>,
    },
    Bench,
    Ablate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Assign { .. } => "assign",
            Command::Extract { .. } => "extract",
            Command::Eval { .. } => "eval",
            Command::Bench => "bench",
            Command::Ablate => "ablate",
        }
    }
}

pub fn worker_count(config: &Config) -> usize {
    config
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `command` inside a worker pool and always writes the manifest.
pub fn run(command: &Command, config: &Config, out: &Path) -> CmdResult<Manifest> {
    let mut manifest = Manifest::default();
    manifest.set("command", command.name());
    manifest.set("seed", config.seed);
    manifest.set("workers", worker_count(config));
    manifest.set("out", out.display());

    let result = io::create_dir(out).and_then(|()| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(worker_count(config))
            .build()
            .map_err(Failure::internal)?;
        pool.install(|| manifest.time("total", |m| dispatch(command, config, out, m)))
    });

    match &result {
        Ok(()) => manifest.set("status", "ok"),
        Err(e) => {
            manifest.set("status", "failed");
            manifest.set("exit_code", e.exit_code());
            manifest.set("error", e);
        }
    }
    for line in config.to_text().lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            manifest.set(format!("config.{k}"), v);
        }
    }
    let written = io::write_file(&out.join(MANIFEST_FILE), manifest.to_text().as_bytes());
    result.and(written).map(|()| manifest)
}

fn dispatch(command: &Command, config: &Config, out: &Path, m: &mut Manifest) -> CmdResult<()> {
    let pick = |flag: &Option<PathBuf>, fallback: &Option<PathBuf>, what: &str| {
        flag.clone()
            .or_else(|| fallback.clone())
            .ok_or_else(|| Failure::input(anyhow::anyhow!("no {what} given")))
    };
    let paths = &config.paths;
    match command {
        Command::Synth => cmd_synth(config, out, m),
        Command::Assign { points, classes } => {
            let points = pick(points, &paths.points_dir, "points directory")?;
            let classes = pick(classes, &paths.class_table, "class table")?;
            cmd_assign(config, &points, &classes, out, m)
        }
        Command::Extract {
            cpm,
            points,
            classes,
            sample_mode,
        } => {
            let cpm = pick(cpm, &paths.cpm_dir, "CPM directory")?;
            let points = pick(points, &paths.points_dir, "points directory")?;
            let classes = pick(classes, &paths.class_table, "class table")?;
            let mut config = config.clone();
            if let Some(mode) = sample_mode {
                config.extract.sample_mode = *mode;
            }
            cmd_extract(&config, &cpm, &points, &classes, out, m)
        }
        Command::Eval { pseudo, gt, classes } => {
            let pseudo = pick(pseudo, &paths.pseudo_dir, "pseudo-label directory")?;
            let gt = pick(gt, &paths.gt_dir, "ground-truth directory")?;
            let classes = pick(classes, &paths.class_table, "class table")?;
            cmd_eval(&pseudo, &gt, &classes, out, m).map(|_| ())
        }
        Command::Bench => cmd_bench(config, out, m).map(|_| ()),
        Command::Ablate => cmd_ablate(config, out, m).map(|_| ()),
    }
}
