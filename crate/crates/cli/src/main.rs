use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shiftfield_cli::{commands, exit_code, Config, Method};
use shiftfield_io::Split;

#[derive(Parser)]
#[command(
    name = "shiftfield",
    version,
    about = "Sparse keypoint displacements to dense brain deformation fields: synthetic data, classical interpolation, a trainable refiner and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(clap::Args)]
struct Common {
    /// JSON config; defaults are embedded and every value can be overridden
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Interpolation method
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    m_keypoints: Option<usize>,
    #[arg(long)]
    lambda_tps: Option<f64>,
    #[arg(long)]
    lambda_reg: Option<f64>,
    /// Worker threads (0 = all cores)
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<Config, shiftfield_cli::CliError> {
        let mut config = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(method) = self.method {
            config.method = method;
        }
        if let Some(m) = self.m_keypoints {
            config.m_keypoints = m;
        }
        if let Some(l) = self.lambda_tps {
            config.lambda_tps = l;
        }
        if let Some(l) = self.lambda_reg {
            config.refiner.lambda_reg = l;
        }
        if let Some(j) = self.jobs {
            config.jobs = j;
        }
        config.propagate_seed();
        Ok(config)
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

impl SplitArg {
    fn resolve(self) -> Option<Split> {
        match self {
            SplitArg::Train => Some(Split::Train),
            SplitArg::Val => Some(Split::Val),
            SplitArg::Test => Some(Split::Test),
            SplitArg::All => None,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic phantom cases and the dataset manifest
    Phantom {
        #[command(flatten)]
        common: Common,
        /// Output dataset directory
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n_cases: Option<usize>,
        /// Grid dims as D,W,H
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        /// Write mid-slice PGM images for visual inspection
        #[arg(long)]
        dump_slices: bool,
    },
    /// Simulate gravity variants and certified ground-truth fields
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Detect, sample and pair keypoints for every case
    Keypoints {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Interpolate sparse keypoints into dense initial fields
    Interpolate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        /// Case split to process
        #[arg(long, value_enum, default_value_t = SplitArg::All)]
        split: SplitArg,
    },
    /// Train the refiner on the train split
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Checkpoint output path (default: checkpoints/<method>.ckpt)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply a trained checkpoint to initial fields
    Refine {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
    },
    /// Evaluate method directories against the ground truth
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated method dirs relative to the dataset root,
        /// e.g. init/tps,refined/tps
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
    },
    /// Keypoint-count sweep over the test split
    SweepM {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint_linear: Option<PathBuf>,
        #[arg(long)]
        checkpoint_tps: Option<PathBuf>,
        /// Keypoint counts to sweep
        #[arg(long, value_delimiter = ',', default_values_t = [5usize, 10, 15, 20, 50])]
        m_list: Vec<usize>,
    },
}

fn run(cli: Cli) -> Result<(), shiftfield_cli::CliError> {
    match cli.command {
        Command::Phantom {
            common,
            out,
            n_cases,
            dims,
            dump_slices,
        } => {
            let mut config = common.resolve()?;
            if let Some(n) = n_cases {
                config.n_cases = n;
            }
            if let Some(d) = dims {
                if d.len() != 3 {
                    return Err(shiftfield_cli::CliError::Config(
                        "--dims needs exactly three values".into(),
                    ));
                }
                config.dims = [d[0], d[1], d[2]];
            }
            commands::phantom(&config, &out, dump_slices)?;
        }
        Command::Simulate { common, manifest } => {
            let config = common.resolve()?;
            commands::simulate(&config, &manifest)?;
        }
        Command::Keypoints { common, manifest } => {
            let config = common.resolve()?;
            commands::keypoints(&config, &manifest)?;
        }
        Command::Interpolate {
            common,
            manifest,
            split,
        } => {
            let config = common.resolve()?;
            commands::interpolate(&config, &manifest, split.resolve())?;
        }
        Command::Train {
            common,
            manifest,
            epochs,
            lr,
            out,
        } => {
            let mut config = common.resolve()?;
            if let Some(e) = epochs {
                config.refiner.epochs = e;
            }
            if let Some(lr) = lr {
                config.refiner.lr = lr;
            }
            commands::train(&config, &manifest, out)?;
        }
        Command::Refine {
            common,
            manifest,
            checkpoint,
            split,
        } => {
            let config = common.resolve()?;
            commands::refine(&config, &manifest, &checkpoint, split.resolve())?;
        }
        Command::Eval {
            common,
            manifest,
            methods,
            split,
        } => {
            let config = common.resolve()?;
            commands::eval(&config, &manifest, &methods, split.resolve())?;
        }
        Command::SweepM {
            common,
            manifest,
            checkpoint_linear,
            checkpoint_tps,
            m_list,
        } => {
            let config = common.resolve()?;
            let mut checkpoints: Vec<(Method, &std::path::Path)> = Vec::new();
            if let Some(p) = checkpoint_linear.as_deref() {
                checkpoints.push((Method::Linear, p));
            }
            if let Some(p) = checkpoint_tps.as_deref() {
                checkpoints.push((Method::Tps, p));
            }
            commands::sweep_m(&config, &manifest, &checkpoints, &m_list)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
