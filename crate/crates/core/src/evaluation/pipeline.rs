use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::clustering_accuracy;
use crate::autoencoder::{
    build_cnn_gru, build_dense_dae, encode, train, CnnGruConfig, DenseDaeConfig, InputShape,
};
use crate::clustering::{
    dbscan, kmeans, kmeans_dtw, kshape, spectral, Assignment, Eps, DEFAULT_MAX_ITER, DEFAULT_MIN_PTS,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::MetricKind;
use crate::projection::{gen_proj_space, normalize_projection, prepare_for_metric, select_pivots};

/// What the clustering algorithm sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    /// Raw series.
    Os,
    /// Dense denoising autoencoder latents of raw series.
    Ls,
    /// Flattened pivot projections.
    Pr,
    /// CNN-GRU autoencoder latents of pivot projections.
    PrLs,
}

impl Pipeline {
    pub const ALL: [Pipeline; 4] = [Pipeline::Os, Pipeline::Ls, Pipeline::Pr, Pipeline::PrLs];

    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::Os => "os",
            Pipeline::Ls => "ls",
            Pipeline::Pr => "pr",
            Pipeline::PrLs => "prls",
        }
    }

    /// Label used in result tables.
    pub fn display_name(&self) -> &'static str {
        match self {
            Pipeline::Os => "OS",
            Pipeline::Ls => "LS",
            Pipeline::Pr => "Pr",
            Pipeline::PrLs => "Pr+LS",
        }
    }

    pub fn uses_projection(&self) -> bool {
        matches!(self, Pipeline::Pr | Pipeline::PrLs)
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "os" => Ok(Pipeline::Os),
            "ls" => Ok(Pipeline::Ls),
            "pr" => Ok(Pipeline::Pr),
            "prls" | "pr+ls" => Ok(Pipeline::PrLs),
            _ => Err(Error::Config(format!(
                "unknown pipeline {s:?}; expected os, ls, pr or prls"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Kmeans,
    KmeansDtw,
    Kshape,
    Spectral,
    Dbscan,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Kmeans,
        Algorithm::KmeansDtw,
        Algorithm::Kshape,
        Algorithm::Spectral,
        Algorithm::Dbscan,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Kmeans => "kmeans",
            Algorithm::KmeansDtw => "kmeans-dtw",
            Algorithm::Kshape => "kshape",
            Algorithm::Spectral => "spectral",
            Algorithm::Dbscan => "dbscan",
        }
    }

    /// Whether the algorithm consumes series rather than feature vectors.
    pub fn is_series_based(&self) -> bool {
        matches!(self, Algorithm::KmeansDtw | Algorithm::Kshape)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "kmeans" | "k-means" => Ok(Algorithm::Kmeans),
            "kmeans-dtw" | "k-means-dtw" => Ok(Algorithm::KmeansDtw),
            "kshape" | "k-shape" => Ok(Algorithm::Kshape),
            "spectral" => Ok(Algorithm::Spectral),
            "dbscan" => Ok(Algorithm::Dbscan),
            _ => Err(Error::Config(format!(
                "unknown algorithm {s:?}; expected kmeans, kmeans-dtw, kshape, spectral or dbscan"
            ))),
        }
    }
}

/// Everything that determines one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub pipeline: Pipeline,
    pub algorithm: Algorithm,
    /// Projection metric (Pr and Pr+LS).
    pub metric: MetricKind,
    /// Pivot count (Pr and Pr+LS).
    pub pivots: usize,
    pub k: usize,
    pub seed: u64,
    /// z-normalize series before projecting; `None` follows the metric
    /// default (on for SBD, off otherwise).
    pub projection_znormalize: Option<bool>,
    /// Scale each projected sample to unit norm.
    pub normalize_projection: bool,
    /// z-normalize raw series for OS.
    pub os_znormalize: bool,
    /// z-normalize raw series before the dense autoencoder (LS).
    pub ls_znormalize: bool,
    /// Feed raw series (`T x V`) to the CNN-GRU autoencoder instead of the
    /// projections. Only meaningful for Pr+LS; kept for ablations.
    pub cnn_on_raw: bool,
    pub max_iter: usize,
    /// Sakoe-Chiba radius for k-means+DTW.
    pub dtw_band: Option<usize>,
    pub eps: Eps,
    pub min_pts: usize,
    pub cnn: CnnGruConfig,
    pub dae: DenseDaeConfig,
}

impl PipelineConfig {
    /// Defaults: SBD projections with 16 pivots, seed 0.
    pub fn new(pipeline: Pipeline, k: usize) -> Self {
        Self {
            pipeline,
            algorithm: Algorithm::Kmeans,
            metric: MetricKind::Sbd,
            pivots: 16,
            k,
            seed: 0,
            projection_znormalize: None,
            normalize_projection: false,
            os_znormalize: false,
            ls_znormalize: true,
            cnn_on_raw: false,
            max_iter: DEFAULT_MAX_ITER,
            dtw_band: None,
            eps: Eps::Auto,
            min_pts: DEFAULT_MIN_PTS,
            cnn: CnnGruConfig::default(),
            dae: DenseDaeConfig::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn with_metric(mut self, metric: MetricKind) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_pivots(mut self, p: usize) -> Self {
        self.pivots = p;
        self
    }

    /// Sets the training epochs of both autoencoders.
    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.cnn.epochs = epochs;
        self.dae.epochs = epochs;
        self
    }

    /// Checks everything that does not depend on the data.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        if self.algorithm.is_series_based() && self.pipeline != Pipeline::Os {
            return Err(Error::Config(format!(
                "{} works on series and is only available with the os pipeline, not {}",
                self.algorithm, self.pipeline
            )));
        }
        if self.pipeline.uses_projection() && self.pivots == 0 {
            return Err(Error::Parameter("pivot count must be at least 1".into()));
        }
        if self.min_pts == 0 {
            return Err(Error::Parameter("min_pts must be at least 1".into()));
        }
        match self.pipeline {
            Pipeline::PrLs => self.cnn.validate()?,
            Pipeline::Ls => self.dae.validate()?,
            _ => {}
        }
        Ok(())
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub project: f64,
    pub train: f64,
    pub cluster: f64,
}

impl StageTimes {
    pub fn total(&self) -> f64 {
        self.project + self.train + self.cluster
    }
}

/// Outcome of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub dataset: String,
    pub n: usize,
    pub assignment: Assignment,
    /// Present when the dataset has labels.
    pub accuracy: Option<f64>,
    pub times: StageTimes,
    /// Per-epoch training loss (LS and Pr+LS).
    pub loss_history: Option<Vec<f64>>,
    /// Pivot sample indices (Pr and Pr+LS).
    pub pivots: Option<Vec<usize>>,
}

fn flatten(ds: &Dataset, znormalize: bool) -> Result<Vec<Vec<f64>>> {
    if ds.equal_length().is_none() {
        return Err(Error::Unsupported(format!(
            "{} has series of different lengths; feature-vector pipelines need equal lengths",
            ds.name
        )));
    }
    let ds = if znormalize { ds.znormalized() } else { ds.clone() };
    Ok(ds.samples.iter().map(|s| s.values().to_vec()).collect())
}

/// Series as `T x V` row-major images (time down the rows).
pub(crate) fn raw_images(ds: &Dataset, znormalize: bool) -> Vec<Vec<f64>> {
    let ds = if znormalize { ds.znormalized() } else { ds.clone() };
    ds.samples
        .iter()
        .map(|s| {
            let (v, t) = (s.vars(), s.len());
            let mut img = vec![0.0; t * v];
            for (var, row) in s.rows().enumerate() {
                for (step, x) in row.iter().enumerate() {
                    img[step * v + var] = *x;
                }
            }
            img
        })
        .collect()
}

fn cluster_points(points: &[Vec<f64>], cfg: &PipelineConfig) -> Result<Assignment> {
    match cfg.algorithm {
        Algorithm::Kmeans => kmeans(points, cfg.k, cfg.seed, cfg.max_iter),
        Algorithm::Spectral => spectral(points, cfg.k, cfg.seed),
        Algorithm::Dbscan => dbscan(points, cfg.eps, cfg.min_pts),
        Algorithm::KmeansDtw | Algorithm::Kshape => unreachable!("rejected by validate"),
    }
}

/// Runs one configuration end to end. Errors carry the stage name.
pub fn run_pipeline(ds: &Dataset, cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut times = StageTimes::default();
    let mut loss_history = None;
    let mut pivots = None;

    let points: Option<Vec<Vec<f64>>> = match cfg.pipeline {
        Pipeline::Os if cfg.algorithm.is_series_based() => None,
        Pipeline::Os => Some(flatten(ds, cfg.os_znormalize).map_err(|e| e.in_stage("prepare"))?),
        Pipeline::Ls => {
            let start = Instant::now();
            let x = flatten(ds, cfg.ls_znormalize).map_err(|e| e.in_stage("prepare"))?;
            let dae = DenseDaeConfig {
                seed: cfg.seed,
                ..cfg.dae.clone()
            };
            let mut model = build_dense_dae(x[0].len(), &dae).map_err(|e| e.in_stage("train"))?;
            loss_history = Some(train(&mut model, &x).map_err(|e| e.in_stage("train"))?);
            let z = encode(&model, &x).map_err(|e| e.in_stage("train"))?;
            times.train = start.elapsed().as_secs_f64();
            Some(z)
        }
        Pipeline::PrLs if cfg.cnn_on_raw => {
            let start = Instant::now();
            let t = ds.equal_length().ok_or_else(|| {
                Error::Unsupported(format!("{} has series of different lengths", ds.name)).in_stage("prepare")
            })?;
            let x = raw_images(ds, cfg.ls_znormalize);
            let cnn = CnnGruConfig {
                seed: cfg.seed,
                ..cfg.cnn.clone()
            };
            let mut model =
                build_cnn_gru(InputShape::new(t, ds.vars(), 1), &cnn).map_err(|e| e.in_stage("train"))?;
            loss_history = Some(train(&mut model, &x).map_err(|e| e.in_stage("train"))?);
            let z = encode(&model, &x).map_err(|e| e.in_stage("train"))?;
            times.train = start.elapsed().as_secs_f64();
            Some(z)
        }
        Pipeline::Pr | Pipeline::PrLs => {
            let start = Instant::now();
            let prepared = prepare_for_metric(ds, cfg.metric, cfg.projection_znormalize);
            let set = select_pivots(&prepared, cfg.pivots, cfg.seed).map_err(|e| e.in_stage("project"))?;
            let mut pm = gen_proj_space(&prepared, &set, cfg.metric).map_err(|e| e.in_stage("project"))?;
            if cfg.normalize_projection {
                pm = normalize_projection(&pm);
            }
            times.project = start.elapsed().as_secs_f64();
            pivots = Some(set.indices().to_vec());
            let features = pm.features();
            if cfg.pipeline == Pipeline::Pr {
                Some(features)
            } else {
                let start = Instant::now();
                let cnn = CnnGruConfig {
                    seed: cfg.seed,
                    ..cfg.cnn.clone()
                };
                let shape = InputShape::new(pm.p(), pm.w(), 1);
                let mut model = build_cnn_gru(shape, &cnn).map_err(|e| e.in_stage("train"))?;
                loss_history = Some(train(&mut model, &features).map_err(|e| e.in_stage("train"))?);
                let z = encode(&model, &features).map_err(|e| e.in_stage("train"))?;
                times.train = start.elapsed().as_secs_f64();
                Some(z)
            }
        }
    };

    let start = Instant::now();
    let assignment = match &points {
        Some(p) => cluster_points(p, cfg),
        None if cfg.algorithm == Algorithm::KmeansDtw => {
            kmeans_dtw(ds, cfg.k, cfg.seed, cfg.max_iter, cfg.dtw_band)
        }
        None => kshape(ds, cfg.k, cfg.seed, cfg.max_iter),
    }
    .map_err(|e| e.in_stage("cluster"))?;
    times.cluster = start.elapsed().as_secs_f64();

    let accuracy = match &ds.labels {
        Some(truth) => {
            Some(clustering_accuracy(&assignment.labels, truth).map_err(|e| e.in_stage("evaluate"))?)
        }
        None => None,
    };
    Ok(RunReport {
        config: cfg.clone(),
        dataset: ds.name.clone(),
        n: ds.len(),
        assignment,
        accuracy,
        times,
        loss_history,
        pivots,
    })
}
