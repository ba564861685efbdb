//! Command-line front end for the IER meshing toolkit.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use iermesh::assembler::{AssemblyRules, FOLD_ANGLE_DEG};
use iermesh::pipeline::PipelineConfig;

#[derive(Parser, Debug)]
#[command(name = "iermesh", version, about = "Point cloud meshing guided by the intrinsic-extrinsic ratio")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "IER_MESH_THREADS")]
    threads: Option<usize>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    log: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a point cloud from a mesh.
    Sample(SampleArgs),
    /// Label the candidate triangles of a cloud against its reference mesh.
    Label(LabelArgs),
    /// Re-triangulate a cloud using exact labels from its reference mesh.
    Remesh(RemeshArgs),
    /// Reconstruct a mesh from a cloud with a trained classifier.
    Reconstruct(ReconstructArgs),
    /// Compare a reconstruction against a ground-truth mesh.
    Evaluate(EvaluateArgs),
    /// Exact geodesic distances from one vertex, as CSV.
    Geodesics(GeodesicsArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum SampleMethod {
    Poisson,
    Uniform,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum DumpFormat {
    Bin,
    Csv,
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Input mesh (.obj or .ply).
    mesh: String,
    /// Output cloud (.ply or .xyz).
    cloud: String,
    #[arg(long, default_value_t = 12_800)]
    n: usize,
    #[arg(long, value_enum, default_value_t = SampleMethod::Poisson)]
    method: SampleMethod,
    /// Gaussian noise with standard deviation 0.001 * t.
    #[arg(long, default_value_t = 0.0)]
    noise_t: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// Neighbors per point when proposing candidates.
    #[arg(long, default_value_t = 50)]
    k: usize,
    /// IER threshold: candidates at or above it are incorrect.
    #[arg(long, default_value_t = 1.3)]
    tau: f64,
    /// Reference distance separating the two priority bins.
    #[arg(long, default_value_t = 0.005)]
    dist_thresh: f64,
    /// Samples per candidate when measuring its distance to the reference.
    #[arg(long, default_value_t = 10)]
    face_samples: usize,
    /// Geodesic cutoff as a multiple of the largest straight-line distance.
    #[arg(long, default_value_t = 2.0)]
    cutoff_multiplier: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Only enforce edge manifoldness and non-intersection while merging.
    #[arg(long)]
    edges_only: bool,
    /// Plane angle in degrees under which touching faces count as folded.
    #[arg(long, default_value_t = FOLD_ANGLE_DEG)]
    fold_angle: f64,
}

impl ConfigArgs {
    fn config(&self) -> PipelineConfig {
        let rules = if self.edges_only {
            AssemblyRules::edges_only()
        } else {
            AssemblyRules {
                fold_angle: Some(self.fold_angle.to_radians()),
                ..AssemblyRules::default()
            }
        };
        PipelineConfig {
            k: self.k,
            tau: self.tau,
            dist_thresh: self.dist_thresh,
            n_face_samples: self.face_samples,
            cutoff_multiplier: self.cutoff_multiplier,
            seed: self.seed,
            rules,
            ..PipelineConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct LabelArgs {
    mesh: String,
    cloud: String,
    /// Labeled candidate dump.
    dump: String,
    #[arg(long, value_enum, default_value_t = DumpFormat::Bin)]
    format: DumpFormat,
    /// Also write per-candidate features (IERF), in dump order.
    #[arg(long)]
    features: Option<String>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Write every rejected candidate with its reason as CSV.
    #[arg(long)]
    rejections: Option<String>,
    /// Write the rejection log next to the output mesh.
    #[arg(long)]
    verbose: bool,
    /// Verify the output has no intersecting faces (quadratic time).
    #[arg(long)]
    check_intersections: bool,
}

#[derive(Args, Debug)]
struct RemeshArgs {
    mesh: String,
    cloud: String,
    /// Output mesh (.obj).
    out: String,
    /// Merge every candidate, skipping the IER filter.
    #[arg(long)]
    unfiltered: bool,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    cloud: String,
    /// Classifier weights (IERW).
    weights: String,
    out: String,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    recon: String,
    gt: String,
    /// Report file: JSON for .json, key=value lines otherwise.
    report: Option<String>,
    #[arg(long, default_value_t = 1_000_000)]
    n_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct GeodesicsArgs {
    mesh: String,
    #[arg(long)]
    source: u32,
    /// Comma-separated target vertices (default: all).
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<u32>>,
    /// Stop propagating beyond this distance.
    #[arg(long, default_value_t = f64::INFINITY)]
    cutoff: f64,
    /// Output CSV (default: stdout).
    #[arg(short, long)]
    out: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.log {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
