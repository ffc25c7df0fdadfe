//! The `foramtrace` command line: synth, segment, order, evaluate and report
//! over single specimens or batch directories.
//!
//! Batch layout: a root directory holds one subdirectory per specimen. Every
//! command writes `run_manifest_<command>.json` next to its outputs. Failures
//! print a one-line JSON object on stderr and exit with a code from
//! [`ExitCode`].

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agglomeration::write_merge_trace;
use crate::error::Error;
use crate::metrics::{evaluate, EvalReport};
use crate::morphology::ErosionSpec;
use crate::ordering::{chamber_stats, growth_path, GrowthPath};
use crate::pipelines::{run_pipeline, PipelineConfig, PipelineInput, PipelineKind};
use crate::synth::{generate, SynthManifest, SynthSpec};
use crate::volgrid::{read_nrrd, write_nrrd, Connectivity, Dims, LabelGrid, ProbGrid};

pub const LOG_ENV: &str = "FORAMTRACE_LOG";

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Internal = 1,
    Usage = 2,
    MissingFile = 3,
    MalformedVolume = 4,
    DimMismatch = 5,
    InvalidParameter = 6,
    NoChambers = 7,
    MalformedTable = 8,
    Io = 9,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: ExitCode::Usage,
            kind: "usage",
            message: message.into(),
        }
    }

    fn missing(path: &Path) -> Self {
        Self {
            code: ExitCode::MissingFile,
            kind: "missing_file",
            message: format!("{}: not found", path.display()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind,
            "exit_code": self.code as i32,
            "message": self.message,
        })
        .to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                (ExitCode::MissingFile, "missing_file")
            }
            Error::Io { .. } => (ExitCode::Io, "io"),
            Error::NrrdHeader { .. }
            | Error::NrrdPayload { .. }
            | Error::KindMismatch { .. }
            | Error::InvalidGrid(_) => (ExitCode::MalformedVolume, "malformed_volume"),
            Error::DimMismatch { .. } => (ExitCode::DimMismatch, "dim_mismatch"),
            Error::InvalidParameter(_) | Error::InfeasibleSpec(_) => (ExitCode::InvalidParameter, "invalid_parameter"),
            Error::NoChambers | Error::EmptyLabeling | Error::EmptyMarkers => (ExitCode::NoChambers, "no_chambers"),
            Error::Csv { .. } | Error::Json { .. } | Error::Format { .. } => {
                (ExitCode::MalformedTable, "malformed_table")
            }
            Error::MissingCluster(_) => (ExitCode::Internal, "internal"),
        };
        Self {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "foramtrace",
    version,
    about = "Foraminifera chamber segmentation post-processing"
)]
pub struct Cli {
    /// Worker threads for batch runs (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic specimens with known chamber labels and order.
    Synth(SynthArgs),
    /// Turn probability maps into a chamber labeling.
    Segment(SegmentArgs),
    /// Reconstruct the growth path of a labeling.
    Order(OrderArgs),
    /// Score a labeling and growth path against ground truth.
    Evaluate(EvaluateArgs),
    /// Average evaluation reports per pipeline into a summary table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Number of chambers.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Specimens to generate with consecutive seeds; above 1, each goes to
    /// `<out-dir>/seed_NNNN`.
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    /// Grid size as `NXxNYxNZ`.
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<Dims>,
    #[arg(long)]
    pub initial_radius: Option<f64>,
    #[arg(long)]
    pub growth_factor: Option<f64>,
    /// Degrees per chamber.
    #[arg(long)]
    pub angular_step: Option<f64>,
    #[arg(long)]
    pub radial_expansion: Option<f64>,
    #[arg(long)]
    pub z_pitch: Option<f64>,
    #[arg(long)]
    pub overlap: Option<f64>,
    #[arg(long)]
    pub wall_thickness: Option<u32>,
    #[arg(long)]
    pub surface_interior: Option<f32>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub blur_radius: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub pipeline: Option<PipelineKind>,
    /// Pipeline config JSON, or a segment run manifest whose config is reused.
    /// Explicit flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub interior: Option<PathBuf>,
    #[arg(long)]
    pub boundary: Option<PathBuf>,
    #[arg(long)]
    pub background: Option<PathBuf>,
    /// Specimen directory holding `interior.nrrd`, `boundary.nrrd`, `background.nrrd`.
    #[arg(long, conflicts_with_all = ["interior", "boundary", "background", "batch"])]
    pub specimen: Option<PathBuf>,
    /// Root with one specimen directory per subdirectory.
    #[arg(long, conflicts_with_all = ["interior", "boundary", "background"])]
    pub batch: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub tau_interior: Option<f64>,
    #[arg(long)]
    pub tau_boundary: Option<f64>,
    #[arg(long)]
    pub tau1: Option<f64>,
    #[arg(long)]
    pub tau2: Option<f64>,
    #[arg(long)]
    pub tau3: Option<f64>,
    #[arg(long)]
    pub erosion_iters: Option<u32>,
    /// 6, 18 or 26.
    #[arg(long)]
    pub erosion_conn: Option<Connectivity>,
    #[arg(long)]
    pub boundary_gap_erosion: Option<u32>,
    #[arg(long)]
    pub min_voxels: Option<u64>,
    #[arg(long)]
    pub merge_affinity: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OrderArgs {
    #[arg(long, required_unless_present = "batch")]
    pub labels: Option<PathBuf>,
    #[arg(long, required_unless_present = "batch")]
    pub out: Option<PathBuf>,
    /// Orders `<dir>/*/labels.nrrd` into `growth_path.csv` beside each.
    #[arg(long, conflicts_with_all = ["labels", "out"])]
    pub batch: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, required_unless_present = "batch")]
    pub pred: Option<PathBuf>,
    /// Growth-path CSV of the prediction.
    #[arg(long, required_unless_present = "batch")]
    pub path: Option<PathBuf>,
    #[arg(long, required_unless_present = "batch")]
    pub gt: Option<PathBuf>,
    /// Synth manifest supplying the chronological ground-truth order.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, required_unless_present = "batch")]
    pub out: Option<PathBuf>,
    /// Pipeline name recorded in the report.
    #[arg(long)]
    pub pipeline: Option<PipelineKind>,
    /// Segment output root; each `<dir>/<name>` is scored against `<gt-root>/<name>`.
    #[arg(long, requires = "gt_root", conflicts_with_all = ["pred", "path", "gt", "out", "manifest"])]
    pub batch: Option<PathBuf>,
    #[arg(long)]
    pub gt_root: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory searched recursively for `eval.json` reports.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_dims(s: &str) -> Result<Dims, String> {
    let parts: Vec<usize> = s
        .split(['x', 'X', ','])
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [nx, ny, nz] if nx > 0 && ny > 0 && nz > 0 => Ok(Dims::new(nx, ny, nz)),
        _ => Err(format!("expected three positive sizes like 128x128x64, got {s:?}")),
    }
}

/// Provenance of one command invocation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub inputs: Vec<PathBuf>,
    /// Effective configuration, echoed so the run can be repeated.
    pub config: serde_json::Value,
    pub threads: usize,
    pub specimens: Vec<SpecimenRun>,
    pub total_seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpecimenRun {
    pub name: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seconds: f64,
}

impl RunManifest {
    pub fn file_name(command: &str) -> String {
        format!("run_manifest_{command}.json")
    }

    pub fn read(path: impl AsRef<Path>) -> crate::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join(Self::file_name(&self.command));
        write_json(&path, self)?;
        Ok(path)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e).into())
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn require(path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::missing(path))
    }
}

/// Sorted subdirectories of `root` containing `marker`.
fn specimen_dirs(root: &Path, marker: &str) -> CliResult<Vec<(String, PathBuf)>> {
    require(root)?;
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        if path.is_dir() && path.join(marker).is_file() {
            dirs.push((entry.file_name().to_string_lossy().into_owned(), path));
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::missing(&root.join("*").join(marker)));
    }
    Ok(dirs)
}

fn timed<T>(f: impl FnOnce() -> CliResult<T>) -> CliResult<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

fn manifest(
    command: &str,
    inputs: Vec<PathBuf>,
    config: serde_json::Value,
    specimens: Vec<SpecimenRun>,
    start: Instant,
) -> RunManifest {
    RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        inputs,
        config,
        threads: rayon::current_num_threads(),
        specimens,
        total_seconds: start.elapsed().as_secs_f64(),
    }
}

fn read_prob(path: &Path) -> CliResult<ProbGrid> {
    require(path)?;
    let grid = read_nrrd(path)?.into_prob()?;
    grid.validate_probabilities()?;
    Ok(grid)
}

fn read_labels(path: &Path) -> CliResult<LabelGrid> {
    require(path)?;
    Ok(read_nrrd(path)?.into_labels()?)
}

fn synth_spec(args: &SynthArgs) -> SynthSpec {
    let mut spec = SynthSpec::default();
    macro_rules! set {
        ($($field:ident <- $arg:ident),*) => {$(
            if let Some(v) = args.$arg {
                spec.$field = v;
            }
        )*};
    }
    set!(
        chamber_count <- k,
        dims <- dims,
        initial_radius <- initial_radius,
        growth_factor <- growth_factor,
        angular_step <- angular_step,
        radial_expansion <- radial_expansion,
        z_pitch <- z_pitch,
        overlap_fraction <- overlap,
        wall_thickness <- wall_thickness,
        surface_interior <- surface_interior,
        noise_sigma <- noise_sigma,
        blur_radius <- blur_radius
    );
    spec
}

fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let start = Instant::now();
    if args.count == 0 {
        return Err(CliError::usage("--count must be at least 1"));
    }
    let base = synth_spec(args);
    base.validate()?;
    let seeds: Vec<u64> = (args.seed..args.seed + args.count).collect();
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let (name, dir) = if args.count == 1 {
                (String::from("specimen"), args.out_dir.clone())
            } else {
                let name = format!("seed_{seed:04}");
                (name.clone(), args.out_dir.join(name))
            };
            let (outputs, seconds) = timed(|| {
                let spec = SynthSpec {
                    rng_seed: seed,
                    ..base.clone()
                };
                let m = generate(&spec)?.write(&dir)?;
                Ok(vec![
                    m.files.gt_labels,
                    m.files.interior,
                    m.files.boundary,
                    m.files.background,
                    dir.join("manifest.json"),
                ])
            })?;
            log::info!("synth {name}: {seconds:.3} s");
            Ok(SpecimenRun {
                name,
                inputs: vec![],
                outputs,
                seconds,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let config = serde_json::json!({ "spec": base, "seeds": seeds });
    manifest("synth", vec![], config, runs, start).write(&args.out_dir)?;
    Ok(())
}

fn pipeline_config(args: &SegmentArgs) -> CliResult<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            require(path)?;
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let value: serde_json::Value = serde_json::from_str(&text).map_err(|source| Error::Json {
                path: path.clone(),
                source,
            })?;
            let value = if value.get("command").is_some() {
                value["config"].clone()
            } else {
                value
            };
            serde_json::from_value(value).map_err(|source| Error::Json {
                path: path.clone(),
                source,
            })?
        }
        None => {
            let kind = args
                .pipeline
                .ok_or_else(|| CliError::usage("--pipeline is required unless --config is given"))?;
            PipelineConfig::new(kind)
        }
    };
    if let Some(kind) = args.pipeline {
        cfg.variant = kind;
    }
    macro_rules! set {
        ($($($field:ident).+ <- $arg:ident),*) => {$(
            if let Some(v) = args.$arg {
                cfg.$($field).+ = v;
            }
        )*};
    }
    set!(
        tau_interior <- tau_interior,
        tau_boundary_plantseg <- tau_boundary,
        tau1 <- tau1,
        tau2 <- tau2,
        tau3 <- tau3,
        erosion.iterations <- erosion_iters,
        erosion.connectivity <- erosion_conn,
        boundary_gap_erosion <- boundary_gap_erosion,
        min_voxels <- min_voxels,
        gasp.merge_affinity_threshold <- merge_affinity
    );
    let _: ErosionSpec = ErosionSpec::new(cfg.erosion.connectivity, cfg.erosion.iterations)?;
    cfg.validate()?;
    Ok(cfg)
}

struct MapPaths {
    interior: Option<PathBuf>,
    boundary: Option<PathBuf>,
    background: Option<PathBuf>,
}

impl MapPaths {
    fn in_dir(dir: &Path, kind: PipelineKind) -> Self {
        let (i, b, g) = needed_maps(kind);
        Self {
            interior: i.then(|| dir.join("interior.nrrd")),
            boundary: b.then(|| dir.join("boundary.nrrd")),
            background: g.then(|| dir.join("background.nrrd")),
        }
    }

    fn all(&self) -> Vec<PathBuf> {
        [&self.interior, &self.boundary, &self.background]
            .into_iter()
            .flatten()
            .cloned()
            .collect()
    }
}

fn needed_maps(kind: PipelineKind) -> (bool, bool, bool) {
    match kind {
        PipelineKind::InteriorSw => (true, false, false),
        PipelineKind::BoundaryGasp => (false, true, false),
        PipelineKind::MtlSw => (true, true, true),
    }
}

/// Runs one specimen and writes `labels.nrrd` (plus `merge_trace.csv` for
/// the agglomerative pipeline) into `out`.
fn segment_one(maps: &MapPaths, cfg: &PipelineConfig, out: &Path) -> CliResult<Vec<PathBuf>> {
    let load = |p: &Option<PathBuf>| p.as_deref().map(read_prob).transpose();
    let (interior, boundary, background) = (load(&maps.interior)?, load(&maps.boundary)?, load(&maps.background)?);
    let input = PipelineInput {
        interior: interior.as_ref(),
        boundary: boundary.as_ref(),
        background: background.as_ref(),
    };
    let seg = run_pipeline(input, cfg)?;
    create_dir(out)?;
    let labels = out.join("labels.nrrd");
    write_nrrd(&seg.labels.into(), &labels)?;
    let mut outputs = vec![labels];
    if let Some(trace) = seg.merge_trace {
        let path = out.join("merge_trace.csv");
        write_merge_trace(&path, &trace)?;
        outputs.push(path);
    }
    Ok(outputs)
}

fn cmd_segment(args: &SegmentArgs) -> CliResult<()> {
    let start = Instant::now();
    let cfg = pipeline_config(args)?;
    let jobs: Vec<(String, MapPaths, PathBuf)> = if let Some(root) = &args.batch {
        let marker = if cfg.variant == PipelineKind::BoundaryGasp {
            "boundary.nrrd"
        } else {
            "interior.nrrd"
        };
        specimen_dirs(root, marker)?
            .into_iter()
            .map(|(name, dir)| {
                let out = args.out_dir.join(&name);
                (name, MapPaths::in_dir(&dir, cfg.variant), out)
            })
            .collect()
    } else if let Some(dir) = &args.specimen {
        vec![(
            String::from("specimen"),
            MapPaths::in_dir(dir, cfg.variant),
            args.out_dir.clone(),
        )]
    } else {
        let (i, b, g) = needed_maps(cfg.variant);
        let pick = |needed: bool, path: &Option<PathBuf>, flag: &str| -> CliResult<Option<PathBuf>> {
            match (needed, path) {
                (true, None) => Err(CliError::usage(format!("pipeline {} needs --{flag}", cfg.variant))),
                (true, Some(p)) => Ok(Some(p.clone())),
                (false, _) => Ok(None),
            }
        };
        let maps = MapPaths {
            interior: pick(i, &args.interior, "interior")?,
            boundary: pick(b, &args.boundary, "boundary")?,
            background: pick(g, &args.background, "background")?,
        };
        vec![(String::from("specimen"), maps, args.out_dir.clone())]
    };

    let runs = jobs
        .par_iter()
        .map(|(name, maps, out)| {
            let (outputs, seconds) = timed(|| segment_one(maps, &cfg, out))?;
            log::info!("segment {name} ({}): {seconds:.3} s", cfg.variant);
            Ok(SpecimenRun {
                name: name.clone(),
                inputs: maps.all(),
                outputs,
                seconds,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let inputs = match (&args.batch, &args.specimen) {
        (Some(root), _) | (None, Some(root)) => vec![root.clone()],
        _ => runs.iter().flat_map(|r| r.inputs.clone()).collect(),
    };
    let config = serde_json::to_value(cfg).expect("config serializes");
    manifest("segment", inputs, config, runs, start).write(&args.out_dir)?;
    Ok(())
}

fn order_one(labels: &Path, out: &Path) -> CliResult<GrowthPath> {
    let grid = read_labels(labels)?;
    let path = growth_path(&chamber_stats(&grid)?);
    path.write_csv(out)?;
    Ok(path)
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn cmd_order(args: &OrderArgs) -> CliResult<()> {
    let start = Instant::now();
    let (jobs, root) = match (&args.batch, &args.labels, &args.out) {
        (Some(root), _, _) => {
            let jobs: Vec<_> = specimen_dirs(root, "labels.nrrd")?
                .into_iter()
                .map(|(name, dir)| (name, dir.join("labels.nrrd"), dir.join("growth_path.csv")))
                .collect();
            (jobs, root.clone())
        }
        (None, Some(labels), Some(out)) => {
            let name = labels
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            (vec![(name, labels.clone(), out.clone())], parent_dir(out))
        }
        _ => return Err(CliError::usage("order needs --labels and --out, or --batch")),
    };
    let runs = jobs
        .par_iter()
        .map(|(name, labels, out)| {
            let (path, seconds) = timed(|| order_one(labels, out))?;
            log::info!("order {name}: {} chambers", path.len());
            Ok(SpecimenRun {
                name: name.clone(),
                inputs: vec![labels.clone()],
                outputs: vec![out.clone()],
                seconds,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let inputs = runs.iter().flat_map(|r| r.inputs.clone()).collect();
    manifest("order", inputs, serde_json::Value::Null, runs, start).write(&root)?;
    Ok(())
}

fn evaluate_one(
    pred: &Path,
    path: &Path,
    gt: &Path,
    synth: Option<&Path>,
    pipeline: Option<PipelineKind>,
    out: &Path,
) -> CliResult<EvalReport> {
    let pred_grid = read_labels(pred)?;
    require(path)?;
    let growth = GrowthPath::read_csv(path)?;
    let gt_grid = read_labels(gt)?;
    let order = match synth {
        Some(m) => {
            require(m)?;
            Some(SynthManifest::read(m)?.chronological_order)
        }
        None => None,
    };
    let mut report = evaluate(&pred_grid, &growth, &gt_grid, order.as_deref())?;
    report.pipeline = pipeline.map(|k| k.name().to_string());
    report.write_json(out)?;
    Ok(report)
}

fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let start = Instant::now();
    type Job = (String, [PathBuf; 3], Option<PathBuf>, PathBuf);
    let (jobs, pipeline, root): (Vec<Job>, _, _) = if let Some(root) = &args.batch {
        let gt_root = args.gt_root.as_ref().expect("clap enforces --gt-root");
        let pipeline = match args.pipeline {
            Some(k) => Some(k),
            None => {
                let m = root.join(RunManifest::file_name("segment"));
                m.exists()
                    .then(|| RunManifest::read(&m))
                    .transpose()?
                    .and_then(|m| serde_json::from_value::<PipelineConfig>(m.config).ok())
                    .map(|c| c.variant)
            }
        };
        let jobs = specimen_dirs(root, "labels.nrrd")?
            .into_iter()
            .map(|(name, dir)| {
                let gt_dir = gt_root.join(&name);
                let synth = Some(gt_dir.join("manifest.json")).filter(|p| p.is_file());
                let files = [
                    dir.join("labels.nrrd"),
                    dir.join("growth_path.csv"),
                    gt_dir.join("gt_labels.nrrd"),
                ];
                (name, files, synth, dir.join("eval.json"))
            })
            .collect();
        (jobs, pipeline, root.clone())
    } else {
        let (Some(pred), Some(path), Some(gt), Some(out)) = (&args.pred, &args.path, &args.gt, &args.out) else {
            return Err(CliError::usage(
                "evaluate needs --pred, --path, --gt and --out, or --batch",
            ));
        };
        let job = (
            String::from("specimen"),
            [pred.clone(), path.clone(), gt.clone()],
            args.manifest.clone(),
            out.clone(),
        );
        (vec![job], args.pipeline, parent_dir(out))
    };
    let runs = jobs
        .par_iter()
        .map(|(name, [pred, path, gt], synth, out)| {
            let (report, seconds) = timed(|| evaluate_one(pred, path, gt, synth.as_deref(), pipeline, out))?;
            log::info!("evaluate {name}: ari {:.4}, rho {:?}", report.ari, report.rho);
            let mut inputs = vec![pred.clone(), path.clone(), gt.clone()];
            inputs.extend(synth.clone());
            Ok(SpecimenRun {
                name: name.clone(),
                inputs,
                outputs: vec![out.clone()],
                seconds,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let inputs = runs.iter().flat_map(|r| r.inputs.clone()).collect();
    let config = serde_json::json!({ "pipeline": pipeline.map(|k| k.name()) });
    manifest("evaluate", inputs, config, runs, start).write(&root)?;
    Ok(())
}

/// One row of the per-pipeline summary table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub pipeline: String,
    pub specimens: usize,
    pub iou: f64,
    pub ari: f64,
    pub vi_merge: f64,
    pub vi_split: f64,
    pub m_pred: f64,
    pub m_valid: f64,
    pub m_gt: f64,
    /// Mean over specimens where rho is defined; empty when none is.
    pub rho: Option<f64>,
    pub delta: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, sum) = values.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    (n > 0).then(|| sum / n as f64)
}

/// Averages reports grouped by pipeline name, in name order.
pub fn summarize(reports: &[EvalReport]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<String, Vec<&EvalReport>> = BTreeMap::new();
    for r in reports {
        let key = r.pipeline.clone().unwrap_or_else(|| "unknown".into());
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(pipeline, rs)| {
            let avg = |f: &dyn Fn(&EvalReport) -> f64| mean(rs.iter().map(|r| f(r))).unwrap_or(f64::NAN);
            SummaryRow {
                specimens: rs.len(),
                iou: avg(&|r| r.iou),
                ari: avg(&|r| r.ari),
                vi_merge: avg(&|r| r.vi_merge),
                vi_split: avg(&|r| r.vi_split),
                m_pred: avg(&|r| r.m_pred as f64),
                m_valid: avg(&|r| r.m_valid() as f64),
                m_gt: avg(&|r| r.m_gt as f64),
                rho: mean(rs.iter().filter_map(|r| r.rho)),
                delta: mean(rs.iter().filter_map(|r| r.delta)),
                pipeline,
            }
        })
        .collect()
}

fn find_reports(dir: &Path, found: &mut Vec<PathBuf>) -> CliResult<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            find_reports(&path, found)?;
        } else if path.file_name().is_some_and(|n| n == "eval.json") {
            found.push(path);
        }
    }
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> CliResult<()> {
    let start = Instant::now();
    require(&args.dir)?;
    let mut paths = Vec::new();
    find_reports(&args.dir, &mut paths)?;
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::missing(&args.dir.join("**").join("eval.json")));
    }
    let reports = paths
        .iter()
        .map(EvalReport::read_json)
        .collect::<crate::Result<Vec<_>>>()?;
    let rows = summarize(&reports);
    let csv_err = |source| Error::Csv {
        path: args.out.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(&args.out).map_err(csv_err)?;
    for row in &rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&args.out, e))?;
    let run = SpecimenRun {
        name: String::from("summary"),
        inputs: paths.clone(),
        outputs: vec![args.out.clone()],
        seconds: start.elapsed().as_secs_f64(),
    };
    manifest(
        "report",
        vec![args.dir.clone()],
        serde_json::Value::Null,
        vec![run],
        start,
    )
    .write(&parent_dir(&args.out))?;
    Ok(())
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be positive"));
        }
        // Fails only if the pool was already built, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Segment(a) => cmd_segment(a),
        Command::Order(a) => cmd_order(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Report(a) => cmd_report(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Errors go to stderr as one JSON object.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::Success as i32;
        }
        Err(e) => {
            let err = CliError::usage(e.to_string().trim_end());
            eprintln!("{}", err.to_json());
            return err.code as i32;
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::Success as i32,
        Err(err) => {
            log::error!("{}", err.message);
            eprintln!("{}", err.to_json());
            err.code as i32
        }
    }
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}
