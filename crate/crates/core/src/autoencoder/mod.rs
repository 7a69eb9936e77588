//! Autoencoders that map samples to latent vectors.
//!
//! Two architectures are provided. [`build_cnn_gru`] stacks three
//! convolution / leaky-ReLU / max-pool levels, summarizes the remaining rows
//! with a GRU and mirrors everything in the decoder. [`build_dense_dae`] is a
//! plain fully connected denoising autoencoder used as a baseline.
//!
//! Both are trained by [`train`] on mean squared reconstruction error with
//! Adam, and [`encode`] maps samples to their latent vectors.

mod checkpoint;
mod cnn_gru;
mod dense;

use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use cnn_gru::{CnnGruPlan, LevelPlan};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::tensor::{adam_step, AdamState, Graph, Tensor, Var};

/// Hyperparameters of the convolutional-recurrent autoencoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnGruConfig {
    pub filters: [usize; 3],
    pub kernel: (usize, usize),
    pub pool: (usize, usize),
    pub latent_dim: usize,
    pub lrelu_alpha: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for CnnGruConfig {
    fn default() -> Self {
        Self {
            filters: [16, 32, 64],
            kernel: (4, 4),
            pool: (5, 5),
            latent_dim: 10,
            lrelu_alpha: 0.1,
            lr: 0.001,
            batch_size: 256,
            epochs: 200,
            seed: 0,
        }
    }
}

impl CnnGruConfig {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            self.filters[0],
            self.filters[1],
            self.filters[2],
            self.kernel.0,
            self.kernel.1,
            self.pool.0,
            self.pool.1,
            self.latent_dim,
            self.batch_size,
            self.epochs,
        ];
        if sizes.contains(&0) {
            return Err(Error::Config(format!("CNN-GRU sizes must be positive: {self:?}")));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if !(self.lrelu_alpha >= 0.0 && self.lrelu_alpha.is_finite()) {
            return Err(Error::Config(format!(
                "invalid leaky ReLU slope {}",
                self.lrelu_alpha
            )));
        }
        Ok(())
    }
}

/// Hyperparameters of the dense denoising autoencoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseDaeConfig {
    pub hidden_dims: Vec<usize>,
    pub latent_dim: usize,
    /// Corruption noise as a multiple of each input feature's standard
    /// deviation. Zero disables corruption.
    pub noise_std: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for DenseDaeConfig {
    fn default() -> Self {
        Self {
            hidden_dims: vec![500, 500, 2000],
            latent_dim: 5,
            noise_std: 0.2,
            lr: 0.001,
            batch_size: 256,
            epochs: 200,
            seed: 0,
        }
    }
}

impl DenseDaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dims.contains(&0) || self.latent_dim == 0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config(format!(
                "dense DAE sizes must be positive: {self:?}"
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(format!("invalid noise level {}", self.noise_std)));
        }
        Ok(())
    }
}

/// Spatial layout of one CNN input sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
}

impl InputShape {
    pub fn new(rows: usize, cols: usize, channels: usize) -> Self {
        Self { rows, cols, channels }
    }

    pub fn features(&self) -> usize {
        self.rows * self.cols * self.channels
    }
}

/// Architecture and the configuration it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "snake_case")]
pub enum ModelSpec {
    CnnGru {
        plan: CnnGruPlan,
        config: CnnGruConfig,
    },
    DenseDae {
        widths: Vec<usize>,
        config: DenseDaeConfig,
    },
}

impl ModelSpec {
    pub fn arch(&self) -> &'static str {
        match self {
            ModelSpec::CnnGru { .. } => "cnn_gru",
            ModelSpec::DenseDae { .. } => "dense_dae",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ModelSpec::CnnGru { plan, .. } => plan.input.features(),
            ModelSpec::DenseDae { widths, .. } => widths[0],
        }
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            ModelSpec::CnnGru { config, .. } => config.latent_dim,
            ModelSpec::DenseDae { config, .. } => config.latent_dim,
        }
    }

    fn training(&self) -> (f64, usize, usize, u64) {
        match self {
            ModelSpec::CnnGru { config: c, .. } => (c.lr, c.batch_size, c.epochs, c.seed),
            ModelSpec::DenseDae { config: c, .. } => (c.lr, c.batch_size, c.epochs, c.seed),
        }
    }
}

/// Named parameter tensors of a model, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    spec: ModelSpec,
    params: Vec<(String, Tensor)>,
}

impl ModelParams {
    pub(crate) fn from_parts(spec: ModelSpec, params: Vec<(String, Tensor)>) -> Self {
        Self { spec, params }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[(String, Tensor)] {
        &self.params
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.spec.latent_dim()
    }

    /// Records the encoder on `g`; `p` are graph variables for
    /// [`ModelParams::params`] in order, `x` is `[B, input_dim]`.
    pub fn encode_graph(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<Var> {
        match &self.spec {
            ModelSpec::CnnGru { plan, config } => plan.encode(g, p, x, config.lrelu_alpha),
            ModelSpec::DenseDae { widths, .. } => dense::encode(g, p, x, widths.len() - 1),
        }
    }

    pub fn decode_graph(&self, g: &mut Graph, p: &[Var], z: Var) -> Result<Var> {
        match &self.spec {
            ModelSpec::CnnGru { plan, config } => plan.decode(g, p, z, config.lrelu_alpha),
            ModelSpec::DenseDae { widths, .. } => dense::decode(g, p, z, widths.len() - 1),
        }
    }
}

/// Builds an untrained CNN-GRU autoencoder. Kernel and pool extents are
/// clamped per level to the size of that level's input.
pub fn build_cnn_gru(input: InputShape, cfg: &CnnGruConfig) -> Result<ModelParams> {
    cfg.validate()?;
    let plan = CnnGruPlan::new(input, cfg)?;
    let params = plan.init_params(&mut stream_rng(cfg.seed, Stream::Init));
    Ok(ModelParams::from_parts(
        ModelSpec::CnnGru {
            plan,
            config: cfg.clone(),
        },
        params,
    ))
}

pub fn build_dense_dae(input_dim: usize, cfg: &DenseDaeConfig) -> Result<ModelParams> {
    cfg.validate()?;
    if input_dim == 0 {
        return Err(Error::Config("dense DAE input dimension must be positive".into()));
    }
    let widths = dense::encoder_widths(input_dim, &cfg.hidden_dims, cfg.latent_dim);
    let params = dense::init_params(&widths, &mut stream_rng(cfg.seed, Stream::Init));
    Ok(ModelParams::from_parts(
        ModelSpec::DenseDae {
            widths,
            config: cfg.clone(),
        },
        params,
    ))
}

fn check_samples(model: &ModelParams, samples: &[Vec<f64>]) -> Result<()> {
    let d = model.input_dim();
    if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| s.len() != d) {
        return Err(Error::Shape(format!(
            "sample {i} has {} features, model expects {d}",
            s.len()
        )));
    }
    Ok(())
}

fn batch_tensor(samples: &[Vec<f64>], idx: &[usize], d: usize) -> Tensor {
    let mut data = Vec::with_capacity(idx.len() * d);
    for &i in idx {
        data.extend_from_slice(&samples[i]);
    }
    Tensor::new(vec![idx.len(), d], data).expect("rows have d features")
}

/// Per-feature population standard deviation.
fn feature_std(samples: &[Vec<f64>], d: usize) -> Vec<f64> {
    let n = samples.len() as f64;
    (0..d)
        .map(|j| {
            let mean = samples.iter().map(|s| s[j]).sum::<f64>() / n;
            (samples.iter().map(|s| (s[j] - mean).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect()
}

/// Trains in place and returns the mean reconstruction loss of each epoch.
///
/// Runs `epochs * ceil(N / batch)` Adam steps; the batch size is clamped to
/// `N`. Samples are reshuffled every epoch from the model's seed, so the
/// whole trajectory is reproducible.
pub fn train(model: &mut ModelParams, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    let settings = model.spec.training();
    train_with(model, samples, settings, |_, _| {})
}

/// Like [`train`], but calls `progress(epoch, mean_loss)` after each epoch.
pub fn train_with_progress(
    model: &mut ModelParams,
    samples: &[Vec<f64>],
    progress: impl FnMut(usize, f64),
) -> Result<Vec<f64>> {
    let settings = model.spec.training();
    train_with(model, samples, settings, progress)
}

fn train_with(
    model: &mut ModelParams,
    samples: &[Vec<f64>],
    (lr, batch, epochs, seed): (f64, usize, usize, u64),
    mut progress: impl FnMut(usize, f64),
) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset("no samples to train on".into()));
    }
    check_samples(model, samples)?;
    let n = samples.len();
    let d = model.input_dim();
    let batch = batch.min(n);
    let mut rng = stream_rng(seed, Stream::Training);
    let noise = match &model.spec {
        ModelSpec::DenseDae { config, .. } if config.noise_std > 0.0 => Some(
            feature_std(samples, d)
                .into_iter()
                .map(|s| s * config.noise_std)
                .collect::<Vec<_>>(),
        ),
        _ => None,
    };
    let standard = Normal::new(0.0, 1.0).expect("unit normal");

    let tensors: Vec<&Tensor> = model.params.iter().map(|(_, t)| t).collect();
    let mut adam = AdamState::new(&tensors, lr);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(epochs);
    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(batch) {
            let clean = batch_tensor(samples, idx, d);
            let mut g = Graph::new();
            let vars: Vec<Var> = model.params.iter().map(|(_, t)| g.param(t.clone())).collect();
            let target = g.input(clean.clone());
            let x = match &noise {
                Some(scale) => {
                    let mut noisy = clean;
                    for row in noisy.data_mut().chunks_mut(d) {
                        for (v, s) in row.iter_mut().zip(scale) {
                            *v += s * standard.sample(&mut rng);
                        }
                    }
                    g.input(noisy)
                }
                None => target,
            };
            let z = model.encode_graph(&mut g, &vars, x)?;
            let recon = model.decode_graph(&mut g, &vars, z)?;
            let loss = g.mse_loss(recon, target)?;
            let value = g.value(loss).item();
            if !value.is_finite() {
                return Err(Error::Divergence { epoch, loss: value });
            }
            total += value * idx.len() as f64;
            g.backward(loss)?;
            let grads: Vec<Vec<f64>> = vars
                .iter()
                .map(|v| {
                    g.grad(*v)
                        .map(<[f64]>::to_vec)
                        .unwrap_or_else(|| vec![0.0; g.value(*v).numel()])
                })
                .collect();
            let grads: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
            let mut params: Vec<&mut Tensor> = model.params.iter_mut().map(|(_, t)| t).collect();
            adam_step(&mut params, &grads, &mut adam)?;
        }
        let mean = total / n as f64;
        history.push(mean);
        progress(epoch, mean);
    }
    Ok(history)
}

/// Maps samples to latent vectors. No corruption is applied.
pub fn encode(model: &ModelParams, samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_samples(model, samples)?;
    let d = model.input_dim();
    let latent = model.latent_dim();
    let chunks: Vec<Vec<Vec<f64>>> = samples
        .par_chunks(256)
        .map(|chunk| {
            let mut g = Graph::new();
            let vars: Vec<Var> = model.params.iter().map(|(_, t)| g.input(t.clone())).collect();
            let idx: Vec<usize> = (0..chunk.len()).collect();
            let x = g.input(batch_tensor(chunk, &idx, d));
            let z = model.encode_graph(&mut g, &vars, x)?;
            Ok(g.value(z).data().chunks(latent).map(<[f64]>::to_vec).collect())
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Reconstructions of `samples`, each of the model's input dimension.
pub fn reconstruct(model: &ModelParams, samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_samples(model, samples)?;
    let d = model.input_dim();
    let mut g = Graph::new();
    let vars: Vec<Var> = model.params.iter().map(|(_, t)| g.input(t.clone())).collect();
    let idx: Vec<usize> = (0..samples.len()).collect();
    let x = g.input(batch_tensor(samples, &idx, d));
    let z = model.encode_graph(&mut g, &vars, x)?;
    let r = model.decode_graph(&mut g, &vars, z)?;
    Ok(g.value(r).data().chunks(d).map(<[f64]>::to_vec).collect())
}

/// Writes `epoch,mean_loss` rows, epochs numbered from 1.
pub fn write_loss_csv(path: impl AsRef<Path>, history: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("epoch,mean_loss\n");
    for (i, l) in history.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, l));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cnn() -> CnnGruConfig {
        CnnGruConfig {
            filters: [4, 4, 4],
            latent_dim: 3,
            epochs: 5,
            ..Default::default()
        }
    }

    fn small_dae() -> DenseDaeConfig {
        DenseDaeConfig {
            hidden_dims: vec![8, 8],
            latent_dim: 2,
            epochs: 5,
            ..Default::default()
        }
    }

    fn samples(n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..d).map(|j| ((i * 7 + j * 3) % 11) as f64 / 11.0).collect())
            .collect()
    }

    #[test]
    fn cnn_latent_shape_for_sixteen_by_one() {
        let model = build_cnn_gru(InputShape::new(16, 1, 1), &CnnGruConfig::default()).unwrap();
        let z = encode(&model, &samples(3, 16)).unwrap();
        assert_eq!(z.len(), 3);
        assert!(z.iter().all(|r| r.len() == 10 && r.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn decoder_restores_input_shape() {
        for &(r, c) in &[(16, 1), (7, 3), (32, 2), (1, 1), (26, 4)] {
            let model = build_cnn_gru(InputShape::new(r, c, 1), &small_cnn()).unwrap();
            let out = reconstruct(&model, &samples(2, r * c)).unwrap();
            assert_eq!(out.len(), 2);
            assert!(out.iter().all(|o| o.len() == r * c), "{r}x{c}");
        }
    }

    #[test]
    fn same_seed_same_weights() {
        let a = build_cnn_gru(InputShape::new(8, 2, 1), &small_cnn()).unwrap();
        let b = build_cnn_gru(InputShape::new(8, 2, 1), &small_cnn()).unwrap();
        assert_eq!(a, b);
        let c = build_cnn_gru(
            InputShape::new(8, 2, 1),
            &CnnGruConfig {
                seed: 1,
                ..small_cnn()
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dense_latent_dim() {
        let model = build_dense_dae(140, &DenseDaeConfig::default()).unwrap();
        let z = encode(&model, &samples(2, 140)).unwrap();
        assert_eq!(z[0].len(), 5);
        assert_eq!(z, encode(&model, &samples(2, 140)).unwrap());
    }

    #[test]
    fn training_is_reproducible() {
        let data = samples(20, 6);
        let mut a = build_dense_dae(6, &small_dae()).unwrap();
        let mut b = build_dense_dae(6, &small_dae()).unwrap();
        let ha = train(&mut a, &data).unwrap();
        let hb = train(&mut b, &data).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a, b);
        assert_eq!(ha.len(), 5);
    }

    #[test]
    fn oversized_batch_still_trains() {
        let data = samples(10, 8);
        let mut m = build_cnn_gru(
            InputShape::new(8, 1, 1),
            &CnnGruConfig {
                batch_size: 1000,
                epochs: 30,
                ..small_cnn()
            },
        )
        .unwrap();
        let before = m.clone();
        let h = train(&mut m, &data).unwrap();
        assert_ne!(before, m);
        assert!(h.last().unwrap() < &h[0]);
    }

    #[test]
    fn wrong_feature_count_is_shape_error() {
        let m = build_dense_dae(6, &small_dae()).unwrap();
        assert!(matches!(encode(&m, &samples(2, 5)), Err(Error::Shape(_))));
    }

    #[test]
    fn divergence_reports_epoch() {
        let mut m = build_dense_dae(2, &small_dae()).unwrap();
        let data = vec![vec![f64::MAX, 1.0], vec![-f64::MAX, 0.0]];
        match train(&mut m, &data) {
            Err(Error::Divergence { epoch, .. }) => assert_eq!(epoch, 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = CnnGruConfig {
            latent_dim: 0,
            ..Default::default()
        };
        assert!(build_cnn_gru(InputShape::new(4, 1, 1), &cfg)
            .unwrap_err()
            .is_config());
    }
}
