use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Dataset, Overrides, Remap};

#[derive(Debug, Parser)]
#[command(
    name = "ssc",
    version,
    about = "Semantic scene completion label pipeline, distillation loss and evaluation"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Flat key=value configuration file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Class layout and moving-class preset
    #[arg(long, global = true, value_enum)]
    pub dataset: Option<Dataset>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: SSC_THREADS, then all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Max-abs threshold below which a voxel feature counts as empty
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
}

impl GlobalArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            dataset: self.dataset,
            seed: self.seed,
            threads: self.threads,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RemapArg {
    None,
    #[value(name = "semantickitti")]
    SemanticKitti,
}

impl From<RemapArg> for Remap {
    fn from(r: RemapArg) -> Self {
        match r {
            RemapArg::None => Remap::None,
            RemapArg::SemanticKitti => Remap::SemanticKitti,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fuse the labels of consecutive frames into one completion grid
    Aggregate {
        #[arg(long, value_name = "DIR")]
        sequence: PathBuf,
        /// Reference frame; every other frame is moved into its coordinates
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long, default_value_t = 1)]
        frames: usize,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Map raw SemanticKITTI label ids to training ids
        #[arg(long, value_enum)]
        remap: Option<RemapArg>,
    },
    /// Remove moving-object traces outside the frame's instance cubes
    Rectify {
        #[arg(long, value_name = "PATH")]
        grid: PathBuf,
        #[arg(long, value_name = "DIR")]
        sequence: PathBuf,
        /// Frame whose panoptic labels define the instance cubes
        #[arg(long, default_value_t = 0)]
        frame: usize,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[arg(long, value_enum)]
        remap: Option<RemapArg>,
    },
    /// Per-class IoU, mIoU and completion IoU over matching grid files
    Eval {
        #[arg(long, value_name = "DIR")]
        pred: PathBuf,
        #[arg(long, value_name = "DIR")]
        gt: PathBuf,
    },
    /// Distillation loss between a student and a teacher sparse tensor
    Dskd {
        #[arg(long, value_name = "PATH")]
        student: PathBuf,
        #[arg(long, value_name = "PATH")]
        teacher: PathBuf,
        /// Subsample aligned rows to bound the N x N similarity cost
        #[arg(long)]
        max_rows: Option<usize>,
    },
    /// Check analytic loss gradients against central differences
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Run the completion network on a synthetic scene and report occupancy
    Demo {
        /// Scene script; defaults to seeded random traffic
        #[arg(long, value_name = "PATH")]
        script: Option<PathBuf>,
        /// Use a scene without any points
        #[arg(long)]
        empty: bool,
        #[arg(long, default_value_t = 2)]
        channels: usize,
        /// Network weights file; defaults to seeded random weights
        #[arg(long, value_name = "PATH")]
        weights: Option<PathBuf>,
        /// Also write the summary to this file
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Write a synthetic sequence directory
    Synth {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, value_name = "PATH")]
        script: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        frames: usize,
        #[arg(long, default_value_t = 2)]
        moving: usize,
    },
}
