use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use iermesh::assembler::{brute_force_intersections, write_rejections_csv, RejectReason};
use iermesh::candidates::{write_candidates, write_candidates_csv};
use iermesh::classifier::{write_features, ClassifierWeights};
use iermesh::geodesics::{local_geodesics, GeodesicMesh};
use iermesh::pipeline::{self, PipelineConfig, Reconstruction};
use iermesh::rng::stage_seed;
use iermesh::{io as meshio, metrics, sampling, PointCloud, TriangleMesh};
use log::info;

use crate::{
    Command, DumpFormat, EvaluateArgs, GeodesicsArgs, LabelArgs, OutputArgs, ReconstructArgs, RemeshArgs, SampleArgs,
    SampleMethod,
};

/// Input or validation problem.
const EXIT_INPUT: u8 = 2;
/// The output broke a guarantee of the pipeline: a bug, not a bad input.
const EXIT_INVARIANT: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    code: u8,
    err: anyhow::Error,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        self.code
    }

    fn invariant(msg: String) -> Self {
        CliError {
            code: EXIT_INVARIANT,
            err: anyhow!(msg),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if f.alternate() {
            write!(f, "{:#}", self.err)
        } else {
            write!(f, "{}", self.err)
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError {
            code: EXIT_INPUT,
            err: e.into(),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

pub fn run(command: Command) -> CliResult {
    match command {
        Command::Sample(a) => sample(a),
        Command::Label(a) => label(a),
        Command::Remesh(a) => remesh(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Geodesics(a) => geodesics(a),
    }
}

fn load_mesh(path: &str) -> CliResult<TriangleMesh> {
    Ok(meshio::load_mesh(path).with_context(|| format!("reading mesh {path}"))?)
}

fn load_cloud(path: &str) -> CliResult<PointCloud> {
    Ok(meshio::load_cloud(path).with_context(|| format!("reading point cloud {path}"))?)
}

fn create(path: &str) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {path}"))?))
}

fn validated(cfg: PipelineConfig) -> CliResult<PipelineConfig> {
    cfg.validate().context("configuration")?;
    Ok(cfg)
}

fn sample(a: SampleArgs) -> CliResult {
    if !(a.noise_t >= 0.0 && a.noise_t.is_finite()) {
        return Err(anyhow!("--noise-t must be a finite non-negative value, got {}", a.noise_t).into());
    }
    let mesh = load_mesh(&a.mesh)?;
    let seed = stage_seed(a.seed, "sample");
    let samples = match a.method {
        SampleMethod::Poisson => sampling::poisson_disk_sample(&mesh, a.n, seed)?,
        SampleMethod::Uniform => sampling::area_uniform_sample(&mesh, a.n, seed)?,
    };
    let mut cloud = sampling::to_point_cloud(&samples);
    if a.noise_t > 0.0 {
        cloud = sampling::add_noise(&cloud, a.noise_t, stage_seed(a.seed, "noise"))?;
    }
    meshio::save_cloud(&cloud, &a.cloud).with_context(|| format!("writing {}", a.cloud))?;
    println!("points={}", cloud.len());
    Ok(())
}

fn label(a: LabelArgs) -> CliResult {
    let cfg = validated(a.config.config())?;
    let mesh = load_mesh(&a.mesh)?;
    let cloud = load_cloud(&a.cloud)?;
    let set = pipeline::label(&mesh, &cloud, &cfg)?;
    let cands = set.original_candidates();
    let mut w = create(&a.dump)?;
    match a.format {
        DumpFormat::Bin => write_candidates(&mut w, &cands)?,
        DumpFormat::Csv => write_candidates_csv(&mut w, &cands)?,
    }
    w.flush()?;
    if let Some(path) = &a.features {
        let mut w = create(path)?;
        write_features(&mut w, &set.features()?)?;
        w.flush()?;
    }
    let mut counts = [0usize; 3];
    for c in &cands {
        if let Some(l) = c.label {
            counts[l.index()] += 1;
        }
    }
    println!("candidates={}", cands.len());
    for (i, n) in counts.iter().enumerate() {
        println!("label{i}={n}");
    }
    Ok(())
}

/// Checks the output, writes it and the optional rejection log, and prints
/// the counts.
fn finish(rec: &Reconstruction, out: &str, opts: &OutputArgs) -> CliResult {
    let bad = rec.mesh.non_manifold_edges();
    if !bad.is_empty() {
        return Err(CliError::invariant(format!("output has {} non-manifold edges", bad.len())));
    }
    if opts.check_intersections {
        let hits = brute_force_intersections(&rec.mesh)?;
        if !hits.is_empty() {
            return Err(CliError::invariant(format!("output has {} intersecting face pairs", hits.len())));
        }
    }
    meshio::save_mesh(&rec.mesh, out).with_context(|| format!("writing {out}"))?;
    let log_path = opts
        .rejections
        .clone()
        .or_else(|| opts.verbose.then(|| rejection_path(out)));
    if let Some(path) = log_path {
        write_rejections_csv(create(&path)?, &rec.rejections)?;
        info!("rejection log written to {path}");
    }
    println!("candidates={}", rec.n_candidates);
    println!("filtered={}", rec.n_filtered);
    println!("accepted={}", rec.mesh.face_count());
    for reason in [
        RejectReason::NonManifold,
        RejectReason::NonManifoldVertex,
        RejectReason::Intersection,
        RejectReason::Fold,
    ] {
        println!("rejected_{}={}", reason.as_str().replace('-', "_"), rec.rejected(reason));
    }
    Ok(())
}

fn rejection_path(out: &str) -> String {
    let p = Path::new(out);
    let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    p.with_file_name(format!("{stem}.rejections.csv")).to_string_lossy().into_owned()
}

fn remesh(a: RemeshArgs) -> CliResult {
    let cfg = validated(a.config.config())?;
    let mesh = load_mesh(&a.mesh)?;
    let cloud = load_cloud(&a.cloud)?;
    let set = pipeline::label(&mesh, &cloud, &cfg)?;
    let rec = if a.unfiltered {
        pipeline::remesh_unfiltered(&set, &cloud, &cfg)?
    } else {
        pipeline::remesh_labeled(&set, &cloud, &cfg)?
    };
    finish(&rec, &a.out, &a.output)
}

fn reconstruct(a: ReconstructArgs) -> CliResult {
    let cfg = validated(a.config.config())?;
    let cloud = load_cloud(&a.cloud)?;
    let weights = ClassifierWeights::load(&a.weights).with_context(|| format!("reading weights {}", a.weights))?;
    let rec = pipeline::reconstruct(&cloud, &weights, &cfg)?;
    finish(&rec, &a.out, &a.output)
}

fn evaluate(a: EvaluateArgs) -> CliResult {
    let recon = load_mesh(&a.recon)?;
    let gt = load_mesh(&a.gt)?;
    if a.n_samples == 0 {
        return Err(anyhow!("--n-samples must be positive").into());
    }
    let report = metrics::evaluate(&recon, &gt, a.n_samples, a.seed)?;
    let text = report.to_key_value();
    print!("{text}");
    if let Some(path) = &a.report {
        let mut w = create(path)?;
        if path.to_ascii_lowercase().ends_with(".json") {
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
        } else {
            w.write_all(text.as_bytes())?;
        }
        w.flush()?;
    }
    Ok(())
}

fn geodesics(a: GeodesicsArgs) -> CliResult {
    let mesh = load_mesh(&a.mesh)?;
    let gm = GeodesicMesh::new(&mesh)?;
    let targets = a.targets.unwrap_or_else(|| (0..mesh.vertex_count() as u32).collect());
    let result = local_geodesics(&gm, a.source, &targets, a.cutoff)?;
    let mut w: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    writeln!(w, "target,distance")?;
    for t in &targets {
        let d = result.get(*t).unwrap_or(f64::INFINITY);
        writeln!(w, "{t},{d}")?;
    }
    w.flush()?;
    Ok(())
}
