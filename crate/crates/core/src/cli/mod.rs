//! The `tempoproj` command line.
//!
//! Every command that writes results puts them in a run directory under
//! `--out` named after a hash of the command's configuration, so reruns
//! with the same flags land in the same place and sweeps never overwrite
//! each other. Report files are byte-identical across reruns; wall-clock
//! timings go to a `timings.json` sidecar.

mod plot;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub use plot::{pca_2d, scatter_svg};

use crate::autoencoder::{
    build_cnn_gru, build_dense_dae, encode, load_checkpoint, save_checkpoint, train, write_loss_csv,
    CnnGruConfig, DenseDaeConfig, InputShape, ModelParams, ModelSpec,
};
use crate::clustering::{Eps, NOISE};
use crate::dataset::{load_multivariate, load_ucr, synth_generate, Dataset, Delimiter, SynthSpec};
use crate::error::{Error, Result};
use crate::evaluation::{
    benchmark, improvement, raw_images, run_pipeline, Algorithm, BenchmarkResult, Pipeline, PipelineConfig,
};
use crate::metrics::MetricKind;
use crate::parallel;
use crate::projection::{load_or_compute, normalize_projection, prepare_for_metric};

/// Name of the built-in synthetic benchmark accepted by `--format synth`.
pub const BUILTIN_SYNTH: &str = "three-class";

#[derive(Debug, Parser)]
#[command(
    name = "tempoproj",
    version,
    about = "Time-series clustering on pivot-distance projections"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the shape, label and length summary of a dataset.
    Inspect(InspectArgs),
    /// Compute (or reuse) the pivot projection of a dataset.
    Project(ProjectArgs),
    /// Train the autoencoder of the ls or prls pipeline and export latents.
    Train(RunArgs),
    /// Run one pipeline end to end and write the cluster assignment.
    Cluster(RunArgs),
    /// Repeated runs over pipelines and algorithms, with summary tables.
    Benchmark(BenchmarkArgs),
    /// PCA scatter plot of a latent matrix.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Directory input is multivariate, `.json` is a generator spec, anything
    /// else is a UCR text file.
    Auto,
    Ucr,
    Multivariate,
    Synth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Euclidean,
    Dtw,
    Sbd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PipelineArg {
    Os,
    Ls,
    Pr,
    Prls,
}

impl From<PipelineArg> for Pipeline {
    fn from(p: PipelineArg) -> Self {
        match p {
            PipelineArg::Os => Pipeline::Os,
            PipelineArg::Ls => Pipeline::Ls,
            PipelineArg::Pr => Pipeline::Pr,
            PipelineArg::Prls => Pipeline::PrLs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Kmeans,
    KmeansDtw,
    Kshape,
    Spectral,
    Dbscan,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Kmeans => Algorithm::Kmeans,
            AlgorithmArg::KmeansDtw => Algorithm::KmeansDtw,
            AlgorithmArg::Kshape => Algorithm::Kshape,
            AlgorithmArg::Spectral => Algorithm::Spectral,
            AlgorithmArg::Dbscan => Algorithm::Dbscan,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset path. With `--format synth`, a generator spec (JSON) or the
    /// name of the built-in set, `three-class`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub format: Format,
    /// Column delimiter of UCR files: auto, comma, tab or whitespace.
    #[arg(long, default_value = "auto")]
    pub delimiter: String,
    /// Seed of the synthetic generator.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ProjectionArgs {
    #[arg(long, value_enum, default_value = "sbd")]
    pub metric: MetricArg,
    /// Sakoe-Chiba radius for DTW; unconstrained when omitted.
    #[arg(long)]
    pub dtw_band: Option<usize>,
    #[arg(long, default_value_t = 16)]
    pub pivots: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scale every projected sample to unit norm.
    #[arg(long)]
    pub normalize_projection: bool,
}

impl ProjectionArgs {
    fn metric(&self) -> MetricKind {
        match self.metric {
            MetricArg::Euclidean => MetricKind::Euclidean,
            MetricArg::Dtw => MetricKind::Dtw { band: self.dtw_band },
            MetricArg::Sbd => MetricKind::Sbd,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ProjectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub projection: ProjectionArgs,
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Number of clusters; defaults to the number of label classes.
    #[arg(long)]
    pub k: Option<usize>,
    /// Training epochs of the autoencoders.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// DBSCAN radius, a number or `auto`.
    #[arg(long, default_value = "auto")]
    pub eps: String,
    #[arg(long, default_value_t = crate::clustering::DEFAULT_MIN_PTS)]
    pub min_pts: usize,
    /// Feed raw series rather than projections to the prls autoencoder.
    #[arg(long)]
    pub cnn_on_raw: bool,
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub projection: ProjectionArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "prls")]
    pub pipeline: PipelineArg,
    #[arg(long, value_enum, default_value = "kmeans")]
    pub algorithm: AlgorithmArg,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub projection: ProjectionArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Pipelines to compare; all four by default.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub pipeline: Vec<PipelineArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "kmeans")]
    pub algorithm: Vec<AlgorithmArg>,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    /// Repeat the projection pipelines for each pivot count, e.g. `4,8,16,32`.
    #[arg(long, value_delimiter = ',')]
    pub sweep_pivots: Vec<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// Latent CSV as written by `train` (`sample_id,label,z0,z1,...`).
    #[arg(long, conflicts_with = "checkpoint")]
    pub latents: Option<PathBuf>,
    /// Model checkpoint; requires `--data` and, for prls models, the
    /// projection flags it was trained with.
    #[arg(long, requires = "data")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    pub format: Format,
    #[arg(long, default_value = "auto")]
    pub delimiter: String,
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    #[command(flatten)]
    pub projection: ProjectionArgs,
    /// The checkpoint was trained with `--cnn-on-raw`.
    #[arg(long)]
    pub cnn_on_raw: bool,
    /// Output SVG path.
    #[arg(long, default_value = "latents.svg")]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 2 for usage or configuration errors,
/// 1 for failures during computation.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    parallel::init_from_env();
    match execute(&cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                2
            } else {
                1
            }
        }
    }
}

pub fn execute(cmd: &Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Inspect(a) => cmd_inspect(a, out),
        Command::Project(a) => cmd_project(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Cluster(a) => cmd_cluster(a, out),
        Command::Benchmark(a) => cmd_benchmark(a, out),
        Command::Plot(a) => cmd_plot(a, out),
    }
}

fn say(out: &mut dyn Write, line: impl AsRef<str>) -> Result<()> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| Error::io("<stdout>", e))
}

/// Loads the dataset described by the data flags.
pub fn load_dataset(data: &Path, format: Format, delimiter: &str, data_seed: u64) -> Result<Dataset> {
    let delimiter: Delimiter = delimiter.parse()?;
    let format = match format {
        Format::Auto if data.is_dir() => Format::Multivariate,
        Format::Auto if data.extension().is_some_and(|e| e == "json") => Format::Synth,
        Format::Auto => Format::Ucr,
        f => f,
    };
    match format {
        Format::Ucr => load_ucr(data, delimiter),
        Format::Multivariate => load_multivariate(data),
        Format::Synth => {
            let spec = if data.as_os_str() == BUILTIN_SYNTH {
                SynthSpec::three_class_benchmark()
            } else {
                let text = fs::read_to_string(data).map_err(|e| Error::io(data, e))?;
                SynthSpec::from_json(&text)?
            };
            let mut ds = synth_generate(&spec, data_seed)?;
            ds.name = data
                .file_stem()
                .map_or_else(|| "synthetic".into(), |s| s.to_string_lossy().into_owned());
            Ok(ds)
        }
        Format::Auto => unreachable!(),
    }
}

fn load(a: &DataArgs) -> Result<Dataset> {
    load_dataset(&a.data, a.format, &a.delimiter, a.data_seed)
}

/// First 16 hex digits of the SHA-256 of a JSON value.
fn content_hash(v: &Value) -> String {
    let digest = Sha256::digest(v.to_string().as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn run_dir(out: &Path, command: &str, key: &Value) -> Result<PathBuf> {
    let dir = out.join(format!("{command}-{}", content_hash(key)));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_inspect(a: &InspectArgs, out: &mut dyn Write) -> Result<()> {
    let ds = load(&a.data)?;
    let lens: Vec<usize> = ds.samples.iter().map(|s| s.len()).collect();
    let (lo, hi) = (lens.iter().min().unwrap(), lens.iter().max().unwrap());
    say(out, format!("dataset     {}", ds.name))?;
    say(out, format!("samples     {}", ds.len()))?;
    say(out, format!("variables   {}", ds.vars()))?;
    if lo == hi {
        say(out, format!("length      {lo}"))?;
    } else {
        say(out, format!("length      {lo}..{hi} (ragged)"))?;
    }
    match &ds.labels {
        Some(labels) => {
            let k = ds.k_hint.unwrap_or(0);
            let mut counts = vec![0usize; k];
            labels.iter().for_each(|&l| counts[l] += 1);
            let parts: Vec<String> = counts
                .iter()
                .enumerate()
                .map(|(c, n)| format!("{c}:{n}"))
                .collect();
            say(out, format!("classes     {k} ({})", parts.join(" ")))?;
        }
        None => say(out, "classes     unlabelled")?,
    }
    say(out, format!("fingerprint {}", ds.fingerprint()))
}

fn cmd_project(a: &ProjectArgs, out: &mut dyn Write) -> Result<()> {
    if a.projection.pivots == 0 {
        return Err(Error::Config("--pivots must be at least 1".into()));
    }
    let ds = load(&a.data)?;
    let metric = a.projection.metric();
    let prepared = prepare_for_metric(&ds, metric, None);
    let start = Instant::now();
    let (pm, cached, path) = load_or_compute(
        a.out.join("cache"),
        &prepared,
        a.projection.pivots,
        a.projection.seed,
        metric,
    )?;
    let elapsed = start.elapsed().as_secs_f64();
    say(
        out,
        format!(
            "N={} p={} W={} metric={} elapsed={elapsed:.3}s {} {}",
            pm.n(),
            pm.p(),
            pm.w(),
            pm.metric,
            if cached { "cached" } else { "computed" },
            path.display()
        ),
    )
}

fn build_config(
    ds: &Dataset,
    pipeline: Pipeline,
    algorithm: Algorithm,
    proj: &ProjectionArgs,
    model: &ModelArgs,
) -> Result<PipelineConfig> {
    let k = match (model.k, ds.k_hint) {
        (Some(k), _) | (None, Some(k)) => k,
        (None, None) => return Err(Error::Config("unlabelled dataset: pass --k".into())),
    };
    let mut cfg = PipelineConfig::new(pipeline, k)
        .with_algorithm(algorithm)
        .with_metric(proj.metric())
        .with_pivots(proj.pivots)
        .with_seed(proj.seed);
    cfg.normalize_projection = proj.normalize_projection;
    cfg.eps = model.eps.parse::<Eps>()?;
    cfg.min_pts = model.min_pts;
    cfg.cnn_on_raw = model.cnn_on_raw;
    if let Some(e) = model.epochs {
        cfg = cfg.with_epochs(e);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Model inputs of a pipeline: z-normalized series for LS, projections
/// for Pr+LS (taken from the projection cache when present).
fn model_inputs(ds: &Dataset, cfg: &PipelineConfig, cache: &Path) -> Result<Vec<Vec<f64>>> {
    match cfg.pipeline {
        Pipeline::Ls => {
            if ds.equal_length().is_none() {
                return Err(Error::Unsupported(
                    "the ls pipeline needs equal-length series".into(),
                ));
            }
            let ds = if cfg.ls_znormalize {
                ds.znormalized()
            } else {
                ds.clone()
            };
            Ok(ds.samples.iter().map(|s| s.values().to_vec()).collect())
        }
        Pipeline::PrLs if cfg.cnn_on_raw => {
            if ds.equal_length().is_none() {
                return Err(Error::Unsupported(
                    "raw autoencoder input needs equal-length series".into(),
                ));
            }
            Ok(raw_images(ds, cfg.ls_znormalize))
        }
        Pipeline::Pr | Pipeline::PrLs => {
            let prepared = prepare_for_metric(ds, cfg.metric, cfg.projection_znormalize);
            let (mut pm, _, _) = load_or_compute(cache, &prepared, cfg.pivots, cfg.seed, cfg.metric)?;
            if cfg.normalize_projection {
                pm = normalize_projection(&pm);
            }
            Ok(pm.features())
        }
        Pipeline::Os => Err(Error::Config("the os pipeline has no model inputs".into())),
    }
}

fn latent_csv(ds: &Dataset, z: &[Vec<f64>]) -> String {
    let d = z.first().map_or(0, Vec::len);
    let mut text = String::from("sample_id,label");
    for j in 0..d {
        text.push_str(&format!(",z{j}"));
    }
    text.push('\n');
    for (i, row) in z.iter().enumerate() {
        let label = ds.labels.as_ref().map_or(String::new(), |l| l[i].to_string());
        text.push_str(&format!("{},{label}", ds.samples[i].id));
        for v in row {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    text
}

fn cmd_train(a: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let pipeline: Pipeline = a.pipeline.into();
    if !matches!(pipeline, Pipeline::Ls | Pipeline::PrLs) {
        return Err(Error::Config(format!(
            "train needs --pipeline ls or prls, got {pipeline}"
        )));
    }
    let ds = load(&a.data)?;
    let cfg = build_config(&ds, pipeline, a.algorithm.into(), &a.projection, &a.model)?;
    let key = json!({"dataset": ds.fingerprint(), "config": cfg});
    let dir = run_dir(&a.model.out, "train", &key)?;

    let start = Instant::now();
    let x = model_inputs(&ds, &cfg, &a.model.out.join("cache"))?;
    let mut model = match pipeline {
        Pipeline::Ls => build_dense_dae(
            x[0].len(),
            &DenseDaeConfig {
                seed: cfg.seed,
                ..cfg.dae.clone()
            },
        )?,
        _ => {
            let rows = if cfg.cnn_on_raw {
                x[0].len() / ds.vars()
            } else {
                cfg.pivots
            };
            let shape = InputShape::new(rows, ds.vars(), 1);
            build_cnn_gru(
                shape,
                &CnnGruConfig {
                    seed: cfg.seed,
                    ..cfg.cnn.clone()
                },
            )?
        }
    };
    let history = train(&mut model, &x)?;
    let z = encode(&model, &x)?;
    let seconds = start.elapsed().as_secs_f64();

    save_checkpoint(dir.join("model.ckpt"), &model)?;
    write_loss_csv(dir.join("loss.csv"), &history)?;
    write_text(&dir.join("latents.csv"), &latent_csv(&ds, &z))?;
    write_json(
        &dir.join("report.json"),
        &json!({
            "command": "train",
            "dataset": ds.name,
            "fingerprint": ds.fingerprint(),
            "config": cfg,
            "parameters": model.num_parameters(),
            "first_loss": history.first(),
            "final_loss": history.last(),
        }),
    )?;
    write_json(&dir.join("timings.json"), &json!({"train_seconds": seconds}))?;
    say(
        out,
        format!(
            "trained {} ({} parameters) for {} epochs: loss {:.6} -> {:.6}",
            model.spec().arch(),
            model.num_parameters(),
            history.len(),
            history.first().copied().unwrap_or(f64::NAN),
            history.last().copied().unwrap_or(f64::NAN)
        ),
    )?;
    say(out, format!("wrote {}", dir.display()))
}

fn cmd_cluster(a: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let ds = load(&a.data)?;
    let cfg = build_config(
        &ds,
        a.pipeline.into(),
        a.algorithm.into(),
        &a.projection,
        &a.model,
    )?;
    let key = json!({"dataset": ds.fingerprint(), "config": cfg});
    let dir = run_dir(&a.model.out, "cluster", &key)?;
    let report = run_pipeline(&ds, &cfg)?;

    let ids: Vec<usize> = ds.samples.iter().map(|s| s.id).collect();
    report
        .assignment
        .write_csv(dir.join("assignments.csv"), Some(&ids))?;
    if let Some(h) = &report.loss_history {
        write_loss_csv(dir.join("loss.csv"), h)?;
    }
    write_json(
        &dir.join("report.json"),
        &json!({
            "command": "cluster",
            "dataset": report.dataset,
            "fingerprint": ds.fingerprint(),
            "n": report.n,
            "config": report.config,
            "accuracy": report.accuracy,
            "clusters": report.assignment.k,
            "noise": report.assignment.noise_count(),
            "score": report.assignment.score,
            "pivots": report.pivots,
        }),
    )?;
    write_json(&dir.join("timings.json"), &report.times)?;

    let acc = report
        .accuracy
        .map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}"));
    say(
        out,
        format!(
            "{} {} k={} accuracy={acc} time={:.3}s",
            cfg.pipeline.display_name(),
            cfg.algorithm,
            cfg.k,
            report.times.total()
        ),
    )?;
    say(out, format!("wrote {}", dir.display()))
}

/// One row of the benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub pipeline: String,
    pub algorithm: String,
    pub pivots: Option<usize>,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

/// Rows for every result plus, per algorithm and pivot count, the gain of
/// Pr and Pr+LS over the better of OS and LS when both baselines ran.
pub fn benchmark_table(results: &[BenchmarkResult]) -> Vec<TableRow> {
    let mut rows: Vec<TableRow> = results
        .iter()
        .map(|r| TableRow {
            pipeline: r.config.pipeline.display_name().into(),
            algorithm: r.config.algorithm.name().into(),
            pivots: r.config.pipeline.uses_projection().then_some(r.config.pivots),
            mean: r.mean,
            std: r.std,
            runs: r.runs.len(),
        })
        .collect();
    let find = |p: Pipeline, alg: Algorithm| {
        results
            .iter()
            .find(|r| r.config.pipeline == p && r.config.algorithm == alg)
            .map(|r| r.mean)
    };
    let mut extra = Vec::new();
    for r in results {
        if !r.config.pipeline.uses_projection() {
            continue;
        }
        let alg = r.config.algorithm;
        if let (Some(os), Some(ls)) = (find(Pipeline::Os, alg), find(Pipeline::Ls, alg)) {
            extra.push(TableRow {
                pipeline: format!("improvement {}", r.config.pipeline.display_name()),
                algorithm: alg.name().into(),
                pivots: Some(r.config.pivots),
                mean: improvement(r.mean, os, ls),
                std: 0.0,
                runs: r.runs.len(),
            });
        }
    }
    rows.extend(extra);
    rows
}

pub fn table_csv(dataset: &str, rows: &[TableRow]) -> String {
    let mut text = String::from("dataset,pipeline,algorithm,pivots,runs,mean,std\n");
    for r in rows {
        let p = r.pivots.map_or(String::new(), |p| p.to_string());
        text.push_str(&format!(
            "{dataset},{},{},{p},{},{:.6},{:.6}\n",
            r.pipeline, r.algorithm, r.runs, r.mean, r.std
        ));
    }
    text
}

fn cmd_benchmark(a: &BenchmarkArgs, out: &mut dyn Write) -> Result<()> {
    if a.runs == 0 {
        return Err(Error::Config("--runs must be at least 1".into()));
    }
    if a.sweep_pivots.contains(&0) {
        return Err(Error::Config("--sweep-pivots values must be at least 1".into()));
    }
    let ds = load(&a.data)?;
    if ds.labels.is_none() {
        return Err(Error::Config(format!(
            "{} has no labels; benchmark needs them",
            ds.name
        )));
    }
    let sweeping = !a.sweep_pivots.is_empty();
    let pipelines: Vec<Pipeline> = match (a.pipeline.is_empty(), sweeping) {
        (false, _) => a.pipeline.iter().map(|&p| p.into()).collect(),
        (true, false) => Pipeline::ALL.to_vec(),
        (true, true) => vec![Pipeline::PrLs],
    };
    let pivot_counts = if sweeping {
        a.sweep_pivots.clone()
    } else {
        vec![a.projection.pivots]
    };

    let mut configs = Vec::new();
    for &alg in &a.algorithm {
        let alg: Algorithm = alg.into();
        for &pipeline in &pipelines {
            if alg.is_series_based() && pipeline != Pipeline::Os {
                continue;
            }
            let counts: &[usize] = if pipeline.uses_projection() {
                &pivot_counts
            } else {
                &pivot_counts[..1]
            };
            for &p in counts {
                let mut cfg = build_config(&ds, pipeline, alg, &a.projection, &a.model)?;
                cfg.pivots = p;
                configs.push(cfg);
            }
        }
    }
    if configs.is_empty() {
        return Err(Error::Config(
            "no valid (pipeline, algorithm) combination requested".into(),
        ));
    }
    let key = json!({"dataset": ds.fingerprint(), "configs": configs, "runs": a.runs});
    let dir = run_dir(&a.model.out, "benchmark", &key)?;

    let mut results = Vec::with_capacity(configs.len());
    let mut timings = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let res = benchmark(&ds, cfg, a.runs)?;
        let pivots = if cfg.pipeline.uses_projection() {
            format!(" p={}", cfg.pivots)
        } else {
            String::new()
        };
        say(
            out,
            format!(
                "{:<6} {:<10}{pivots} mean={:.4} std={:.4}",
                cfg.pipeline.display_name(),
                cfg.algorithm,
                res.mean,
                res.std
            ),
        )?;
        timings.push(json!({
            "pipeline": cfg.pipeline,
            "algorithm": cfg.algorithm,
            "pivots": cfg.pivots,
            "times": res.runs.iter().map(|r| r.times).collect::<Vec<_>>(),
        }));
        results.push(res);
    }
    let rows = benchmark_table(&results);
    write_text(&dir.join("results.csv"), &table_csv(&ds.name, &rows))?;
    let cells: Vec<Value> = results
        .iter()
        .map(|r| {
            json!({
                "config": r.config,
                "mean": r.mean,
                "std": r.std,
                "accuracies": r.accuracies(),
                "seeds": r.runs.iter().map(|x| x.config.seed).collect::<Vec<_>>(),
            })
        })
        .collect();
    write_json(
        &dir.join("report.json"),
        &json!({
            "command": "benchmark",
            "dataset": ds.name,
            "fingerprint": ds.fingerprint(),
            "runs": a.runs,
            "cells": cells,
            "table": rows,
        }),
    )?;
    write_json(&dir.join("timings.json"), &timings)?;
    say(out, format!("wrote {}", dir.display()))
}

/// Latent rows and the optional label column of a `latents.csv`.
type Latents = (Vec<Vec<f64>>, Option<Vec<usize>>);

fn read_latents(path: &Path) -> Result<Latents> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::EmptyDataset(path.display().to_string()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let label_col = cols.iter().position(|c| *c == "label");
    let value_cols: Vec<usize> = (0..cols.len())
        .filter(|&j| cols[j] != "label" && cols[j] != "sample_id")
        .collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut all_labelled = label_col.is_some();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            return Err(Error::Format {
                line: i + 1,
                message: format!("{} cells, header has {}", cells.len(), cols.len()),
            });
        }
        let row = value_cols
            .iter()
            .map(|&j| {
                cells[j].trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 1,
                    token: cells[j].to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
        if let Some(c) = label_col {
            match cells[c].trim().parse::<i64>() {
                Ok(l) if l >= 0 => labels.push(l as usize),
                Ok(l) if l == NOISE => labels.push(usize::MAX),
                _ => all_labelled = false,
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset(path.display().to_string()));
    }
    Ok((rows, all_labelled.then_some(labels)))
}

fn cmd_plot(a: &PlotArgs, out: &mut dyn Write) -> Result<()> {
    let (z, labels) = match (&a.latents, &a.checkpoint, &a.data) {
        (Some(path), _, _) => read_latents(path)?,
        (None, Some(ckpt), Some(data)) => {
            let ds = load_dataset(data, a.format, &a.delimiter, a.data_seed)?;
            let model: ModelParams = load_checkpoint(ckpt)?;
            let pipeline = match model.spec() {
                ModelSpec::DenseDae { .. } => Pipeline::Ls,
                ModelSpec::CnnGru { .. } => Pipeline::PrLs,
            };
            let k = ds.k_hint.unwrap_or(1);
            let mut cfg = PipelineConfig::new(pipeline, k)
                .with_metric(a.projection.metric())
                .with_pivots(a.projection.pivots)
                .with_seed(a.projection.seed);
            cfg.normalize_projection = a.projection.normalize_projection;
            cfg.cnn_on_raw = a.cnn_on_raw;
            let cache = a.out.parent().unwrap_or(Path::new(".")).join("cache");
            let x = model_inputs(&ds, &cfg, &cache)?;
            (encode(&model, &x)?, ds.labels.clone())
        }
        _ => {
            return Err(Error::Config(
                "plot needs --latents, or --checkpoint with --data".into(),
            ))
        }
    };
    let points = pca_2d(&z)?;
    let svg = scatter_svg(&points, labels.as_deref());
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_text(&a.out, &svg)?;
    say(
        out,
        format!("plotted {} points to {}", points.len(), a.out.display()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String) {
        let mut buf = Vec::new();
        let code = run(args.iter().copied(), &mut buf);
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn bad_flags_exit_two() {
        assert_eq!(run_capture(&["tempoproj", "project", "--bogus"]).0, 2);
        assert_eq!(
            run_capture(&["tempoproj", "cluster", "--data", "x", "--metric", "cosine"]).0,
            2
        );
        assert_eq!(run_capture(&["tempoproj"]).0, 2);
    }

    #[test]
    fn zero_pivots_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let args = [
            "tempoproj",
            "project",
            "--data",
            BUILTIN_SYNTH,
            "--format",
            "synth",
            "--pivots",
            "0",
            "--out",
            out,
        ];
        assert_eq!(run_capture(&args).0, 2);
    }

    #[test]
    fn missing_file_is_a_runtime_error() {
        let (code, _) = run_capture(&["tempoproj", "inspect", "--data", "/nonexistent/file.tsv"]);
        assert_eq!(code, 1);
    }

    #[test]
    fn improvement_rows() {
        let ds = synth_generate(&SynthSpec::three_class_benchmark().with_size(5, 16), 0).unwrap();
        let mk = |p: Pipeline, mean: f64| BenchmarkResult {
            config: PipelineConfig::new(p, 3),
            mean,
            std: 0.0,
            runs: vec![run_pipeline(&ds, &PipelineConfig::new(Pipeline::Os, 3)).unwrap()],
        };
        let rows = benchmark_table(&[
            mk(Pipeline::Os, 0.5),
            mk(Pipeline::Ls, 0.6),
            mk(Pipeline::Pr, 0.7),
        ]);
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[3].pipeline, "improvement Pr");
        assert!((rows[3].mean - 0.1).abs() < 1e-12);
    }

    #[test]
    fn latent_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = synth_generate(&SynthSpec::three_class_benchmark().with_size(2, 16), 0).unwrap();
        let z: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 0.5 * i as f64]).collect();
        let path = dir.path().join("z.csv");
        fs::write(&path, latent_csv(&ds, &z)).unwrap();
        let (back, labels) = read_latents(&path).unwrap();
        assert_eq!(back, z);
        assert_eq!(labels, ds.labels);
    }
}
