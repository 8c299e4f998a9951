//! `shallow`: architecture generation, MAdd counting, scaling-law fits, table
//! reproduction and CIFAR-10 training from the command line.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 invalid architecture,
//! 3 training failure, 4 missing or unreadable dataset.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use shallow_core::arch::Family;
use shallow_core::training::Variant;

#[derive(Parser)]
#[command(name = "shallow", version, about = "Generalized LeNet / VGG-16 toolkit: architectures, MAdds, scaling fits, training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Architecture selected by family and width parameters.
#[derive(Args, Clone, Debug)]
pub struct ArchArgs {
    /// lenet, vgg16 or vgg16-enhanced
    pub family: Family,
    /// Base filter count (d1 for LeNet)
    #[arg(long = "d", visible_alias = "d1")]
    pub d: usize,
    /// LeNet only: d2 = round(ratio * d1) [default: 8/3]
    #[arg(long)]
    pub ratio: Option<f64>,
    /// LeNet only: explicit d2, overriding --ratio
    #[arg(long)]
    pub d2: Option<usize>,
    /// VGG-16 only: filter multiplier between conv sets [default: 2]
    #[arg(long)]
    pub growth: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MaddMode {
    Forward,
    ForwardBackward,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TableName {
    Fig3a,
    Fig3b,
    Fig3c,
    Fits,
    All,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PrecisionArg {
    F32,
    F64,
}

#[derive(Subcommand)]
enum Command {
    /// Build an architecture, write its spec and audit the depth-size conservation
    Arch {
        #[command(flatten)]
        arch: ArchArgs,
        /// Write the architecture file here; the audit then goes to stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count per-layer multiply-adds (CSV)
    Madds {
        /// Spec file written by `arch`
        #[arg(long, conflicts_with_all = ["family", "d", "ratio", "d2", "growth"])]
        spec: Option<PathBuf>,
        /// lenet, vgg16 or vgg16-enhanced (instead of --spec)
        #[arg(required_unless_present = "spec")]
        family: Option<Family>,
        #[arg(long = "d", visible_alias = "d1", required_unless_present = "spec")]
        d: Option<usize>,
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        d2: Option<usize>,
        #[arg(long)]
        growth: Option<f64>,
        #[arg(long, value_enum, default_value = "forward")]
        mode: MaddMode,
    },
    /// Fit eps = A d^-rho to a CSV with a width column, `epsilon` and optional `std`
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Width column name [default: first column]
        #[arg(long)]
        column: Option<String>,
        /// Weight points by (epsilon / std)^2
        #[arg(long)]
        weighted: bool,
    },
    /// Evaluate a power law at widths or invert it at target errors
    Extrapolate {
        /// Fit the law to this CSV first
        #[arg(long, conflicts_with_all = ["prefactor", "exponent"])]
        data: Option<PathBuf>,
        #[arg(long, requires = "exponent")]
        prefactor: Option<f64>,
        #[arg(long, requires = "prefactor")]
        exponent: Option<f64>,
        /// Widths at which to predict the error
        #[arg(long = "d")]
        d: Vec<f64>,
        /// Errors for which to predict the width
        #[arg(long = "epsilon")]
        epsilon: Vec<f64>,
    },
    /// Recompute published tables and compare (CSV)
    ReproduceTables {
        #[arg(value_enum)]
        which: TableName,
        /// Write `<name>.csv` files here instead of stdout (required for `all`)
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Emit a tabulated training config as TOML
    Preset {
        family: Family,
        #[arg(long = "d", visible_alias = "d1")]
        d: usize,
        /// main, constant-4/3, constant-16/3, growth-1.5 or growth-2.5
        #[arg(long, default_value = "main")]
        variant: Variant,
        /// Write the config here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the matching architecture spec
        #[arg(long)]
        arch_out: Option<PathBuf>,
    },
    /// Train on CIFAR-10 (dataset root from --data-dir or $CIFAR10_DIR)
    Train {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Number of seeds, counting up from the config seed
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Accepted for scripts; runs are always bit-reproducible
        #[arg(long)]
        deterministic: bool,
        /// Stop after this many epochs, clipping the schedule
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Accept batch files with fewer than 10,000 records
        #[arg(long)]
        allow_partial: bool,
        /// Also checkpoint every N epochs (the final epoch is always saved)
        #[arg(long, default_value_t = 0)]
        checkpoint_every: usize,
        #[arg(long, value_enum, default_value = "f32")]
        precision: PrecisionArg,
    },
}

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<shallow_core::Error> for Failure {
    fn from(e: shallow_core::Error) -> Self {
        use shallow_core::Error as E;
        let code = match e {
            E::InvalidArchitecture(_) => 2,
            E::Diverged { .. } => 3,
            _ => 1,
        };
        Self { code, message: e.to_string() }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Arch { arch, out } => commands::arch(&arch, out.as_deref()),
        Command::Madds { spec, family, d, ratio, d2, growth, mode } => {
            let arch = match (family, d) {
                (Some(family), Some(d)) => Some(ArchArgs { family, d, ratio, d2, growth }),
                _ => None,
            };
            commands::madds(spec.as_deref(), arch.as_ref(), mode)
        }
        Command::Fit { data, column, weighted } => commands::fit(&data, column.as_deref(), weighted),
        Command::Extrapolate { data, prefactor, exponent, d, epsilon } => {
            commands::extrapolate(data.as_deref(), prefactor.zip(exponent), &d, &epsilon)
        }
        Command::ReproduceTables { which, out_dir } => commands::reproduce(which, out_dir.as_deref()),
        Command::Preset { family, d, variant, out, arch_out } => commands::preset(family, d, variant, out.as_deref(), arch_out.as_deref()),
        Command::Train { spec, config, seeds, deterministic: _, epochs, out_dir, data_dir, allow_partial, checkpoint_every, precision } => {
            commands::train(commands::TrainArgs {
                spec,
                config,
                seeds,
                epochs,
                out_dir,
                data_dir,
                allow_partial,
                checkpoint_every,
                precision,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
