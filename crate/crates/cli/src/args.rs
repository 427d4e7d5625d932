use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "spe", version, about = "Fit, extract and evaluate spline-encoded neural fields")]
pub struct Cli {
    /// Log verbosity (error, warn, info, debug).
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample an oriented point cloud from an analytic shape.
    MakeFixture(MakeFixtureArgs),
    /// Fit a signed distance field to an oriented point cloud.
    FitSdf(FitSdfArgs),
    /// Extract a level set of a fitted field as an OBJ mesh.
    Extract(ExtractArgs),
    /// Compare a fitted field against a ground-truth shape.
    Eval(EvalArgs),
    /// Fit a 2D field to an image.
    FitImage(FitImageArgs),
    /// Render a fitted image field.
    RenderImage(RenderImageArgs),
    /// Fit a field to ground-truth SDF samples with an L1 loss.
    RegressSdf(RegressSdfArgs),
    /// Train a shared MLP with per-shape encodings, or fit a new shape to one.
    #[command(subcommand)]
    ShapeSpace(ShapeSpaceCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Spe,
    Fpe,
    Identity,
}

#[derive(Debug, Args, Serialize)]
pub struct MakeFixtureArgs {
    /// sphere:R, torus:R:r, or box:H / box:HX:HY:HZ (half extents).
    #[arg(long)]
    pub shape: String,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Encoder and network flags shared by the fitting commands.
#[derive(Debug, Args, Serialize)]
pub struct EncoderArgs {
    #[arg(long, value_enum, default_value = "spe")]
    pub encoder: EncoderKind,
    /// Spline channels C.
    #[arg(long, default_value_t = 64)]
    pub c: usize,
    /// Basis degree (0, 1 or 2).
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    /// Spline domain half-width; defaults to sqrt(d).
    #[arg(long)]
    pub domain_radius: Option<f64>,
    /// Keep projection directions fixed during training.
    #[arg(long)]
    pub freeze_directions: bool,
    /// Frequencies of the Fourier encoder.
    #[arg(long, default_value_t = 64)]
    pub fpe_frequencies: usize,
    /// Standard deviation of the Fourier frequencies.
    #[arg(long, default_value_t = 4.0)]
    pub fpe_sigma: f64,
    #[arg(long, default_value_t = 256)]
    pub hidden: usize,
    /// Number of fully-connected layers.
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct FitSdfArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Training log CSV; defaults to `<out>.log.csv`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Final segment count. Truncates the default schedule when given alone.
    #[arg(long)]
    pub k: Option<usize>,
    /// Projection count M.
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    #[command(flatten)]
    pub encoder: EncoderArgs,
    /// Eikonal weight.
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    /// Normal alignment weight.
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    /// Surface samples per step (the same number of box samples is drawn).
    #[arg(long, default_value_t = 10_000)]
    pub batch: usize,
    /// Comma-separated K per stage.
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<usize>>,
    /// Comma-separated Adam steps per stage; one value applies to every stage.
    #[arg(long, value_delimiter = ',')]
    pub steps_per_stage: Option<Vec<usize>>,
    /// `pretrain` (sphere initialization), `none`, or a checkpoint path.
    #[arg(long, default_value = "pretrain")]
    pub init: String,
    /// Also write the initialization checkpoint here, for reuse with --init.
    #[arg(long)]
    pub save_init: Option<PathBuf>,
    #[arg(long, default_value_t = 5000)]
    pub pretrain_steps: usize,
    #[arg(long, default_value_t = 4096)]
    pub pretrain_batch: usize,
    /// Move the cloud into the ball of radius 0.9 before fitting.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, default_value_t = 2048)]
    pub probe_points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Where a field comes from: a checkpoint, or a shape space plus a shape.
#[derive(Debug, Args, Serialize)]
pub struct FieldSource {
    /// Checkpoint written by fit-sdf or regress-sdf.
    #[arg(long, required_unless_present = "space")]
    pub model: Option<PathBuf>,
    /// Shape space written by `shape-space train`.
    #[arg(long, conflicts_with = "model")]
    pub space: Option<PathBuf>,
    /// Index of a training shape inside --space.
    #[arg(long, requires = "space", conflicts_with = "encoding")]
    pub shape: Option<usize>,
    /// Encoding written by `shape-space fit`, decoded with --space.
    #[arg(long, requires = "space")]
    pub encoding: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub source: FieldSource,
    /// Lattice points per axis (at least 2).
    #[arg(long, default_value_t = 128)]
    pub res: usize,
    /// Level to extract, in input units.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub iso: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub source: FieldSource,
    /// sphere:R, torus:R:r, box:..., or mesh:PATH.
    #[arg(long)]
    pub gt_shape: String,
    /// Samples on each surface for the Chamfer distance.
    #[arg(long, default_value_t = 25_000)]
    pub chamfer_n: usize,
    /// Lattice resolution for the SDF mean absolute error.
    #[arg(long, default_value_t = 64)]
    pub mae_res: usize,
    /// Marching cubes resolution for the surface samples.
    #[arg(long, default_value_t = 128)]
    pub res: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Metrics JSON; printed to stdout either way.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FitImageArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Loss log CSV; defaults to `<out>.log.csv`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    pub m: usize,
    #[arg(long, default_value_t = 128)]
    pub k: usize,
    #[command(flatten)]
    pub encoder: EncoderArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct RenderImageArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Output size as WxH.
    #[arg(long)]
    pub res: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Image to report PSNR against.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RegressSdfArgs {
    /// sphere:R, torus:R:r, box:..., or mesh:PATH.
    #[arg(long)]
    pub gt_shape: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Loss log CSV; defaults to `<out>.log.csv`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub m: usize,
    #[arg(long, default_value_t = 64)]
    pub k: usize,
    #[command(flatten)]
    pub encoder: EncoderArgs,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 10_000)]
    pub batch: usize,
    /// Lattice resolution of the SDF samples.
    #[arg(long, default_value_t = 64)]
    pub sample_res: usize,
    /// Marching cubes resolution for the reported Chamfer distance.
    #[arg(long, default_value_t = 128)]
    pub eval_res: usize,
    #[arg(long, default_value_t = 25_000)]
    pub chamfer_n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum ShapeSpaceCommand {
    Train(ShapeSpaceTrainArgs),
    Fit(ShapeSpaceFitArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ShapeSpaceTrainArgs {
    /// Comma-separated point clouds, already inside the unit ball.
    #[arg(long, value_delimiter = ',', required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-shape loss CSV; defaults to `<out>.log.csv`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    pub c: usize,
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    #[arg(long, default_value_t = 256)]
    pub hidden: usize,
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 10_000)]
    pub batch: usize,
    #[arg(long, value_delimiter = ',', default_value = "2,8,32,64")]
    pub schedule: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub steps_per_stage: Option<Vec<usize>>,
    /// Skip sphere pretraining of the shared MLP.
    #[arg(long)]
    pub no_pretrain: bool,
    #[arg(long, default_value_t = 5000)]
    pub pretrain_steps: usize,
    /// Marching cubes resolution for per-shape Chamfer; 0 skips it.
    #[arg(long, default_value_t = 64)]
    pub eval_res: usize,
    #[arg(long, default_value_t = 25_000)]
    pub chamfer_n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ShapeSpaceFitArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the space's steps per stage.
    #[arg(long, value_delimiter = ',')]
    pub steps_per_stage: Option<Vec<usize>>,
    /// Marching cubes resolution for the Chamfer metric; 0 skips it.
    #[arg(long, default_value_t = 64)]
    pub eval_res: usize,
    #[arg(long, default_value_t = 25_000)]
    pub chamfer_n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
