use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pseudobox_cli::{run, Command, Failure};
use pseudobox_core::formats::{load_config, Config};
use pseudobox_core::SampleMode;

#[derive(Parser)]
#[command(name = "pseudobox", version, about = "Oriented pseudo-boxes from point annotations")]
struct Cli {
    /// `key = value` configuration file; missing keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate synthetic scenes: ground truth, points and probability maps.
    Synth,
    /// Build training target maps from points files.
    Assign {
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long)]
        classes: Option<PathBuf>,
    },
    /// Extract one oriented box per annotation.
    Extract {
        #[arg(long)]
        cpm: Option<PathBuf>,
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long)]
        classes: Option<PathBuf>,
        #[arg(long)]
        sample_mode: Option<SampleMode>,
    },
    /// Score pseudo-labels against ground truth.
    Eval {
        #[arg(long)]
        pseudo: Option<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        classes: Option<PathBuf>,
    },
    /// Measure extraction throughput.
    Bench,
    /// Run the configured ablation grid.
    Ablate,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Synth => Command::Synth,
            Cmd::Assign { points, classes } => Command::Assign { points, classes },
            Cmd::Extract {
                cpm,
                points,
                classes,
                sample_mode,
            } => Command::Extract {
                cpm,
                points,
                classes,
                sample_mode,
            },
            Cmd::Eval { pseudo, gt, classes } => Command::Eval { pseudo, gt, classes },
            Cmd::Bench => Command::Bench,
            Cmd::Ablate => Command::Ablate,
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<Config, Failure> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::input(anyhow::anyhow!("cannot read {}: {e}", path.display())))?;
            load_config(&text)?
        }
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = Some(workers);
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = resolve_config(&cli).and_then(|config| {
        let command = Command::from(cli.command);
        run(&command, &config, &cli.out)
    });
    match result {
        Ok(manifest) => {
            if let Some(miou) = manifest.get("result.miou") {
                println!("miou = {miou}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("pseudobox: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
