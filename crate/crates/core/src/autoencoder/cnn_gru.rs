//! Shape planning and graph construction for the convolutional-recurrent
//! autoencoder.

use serde::{Deserialize, Serialize};

use super::{CnnGruConfig, InputShape};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::init::glorot_uniform;
use crate::tensor::{Graph, GruWeights, Tensor, Var};

/// Resolved sizes of one convolution level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelPlan {
    pub in_channels: usize,
    pub filters: usize,
    /// Spatial extent seen by the convolution (pre-pool).
    pub height: usize,
    pub width: usize,
    /// Kernel after clamping to the input extent.
    pub kernel: (usize, usize),
    /// Pool window after clamping.
    pub pool: (usize, usize),
}

impl LevelPlan {
    pub fn pooled(&self) -> (usize, usize) {
        (
            self.height.div_ceil(self.pool.0),
            self.width.div_ceil(self.pool.1),
        )
    }
}

/// Every shape the network passes through for a given input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnGruPlan {
    pub input: InputShape,
    pub levels: Vec<LevelPlan>,
    pub latent_dim: usize,
}

impl CnnGruPlan {
    pub fn new(input: InputShape, cfg: &CnnGruConfig) -> Result<Self> {
        if input.rows == 0 || input.cols == 0 || input.channels == 0 {
            return Err(Error::Config(format!("input shape {input:?} has a zero extent")));
        }
        let (mut c, mut h, mut w) = (input.channels, input.rows, input.cols);
        let mut levels = Vec::with_capacity(cfg.filters.len());
        for (i, &f) in cfg.filters.iter().enumerate() {
            if h == 0 || w == 0 {
                return Err(Error::Config(format!(
                    "encoder level {} receives a zero-extent input ({h}x{w})",
                    i + 1
                )));
            }
            let level = LevelPlan {
                in_channels: c,
                filters: f,
                height: h,
                width: w,
                kernel: (cfg.kernel.0.min(h), cfg.kernel.1.min(w)),
                pool: (cfg.pool.0.min(h), cfg.pool.1.min(w)),
            };
            (h, w) = level.pooled();
            c = f;
            levels.push(level);
        }
        Ok(Self {
            input,
            levels,
            latent_dim: cfg.latent_dim,
        })
    }

    /// `(channels, steps, width)` of the tensor entering the encoder GRU.
    pub fn bottleneck(&self) -> (usize, usize, usize) {
        let last = self.levels.last().expect("at least one level");
        let (h, w) = last.pooled();
        (last.filters, h, w)
    }

    /// Human-readable per-level summary, e.g. for logs.
    pub fn describe(&self) -> String {
        self.levels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let (ph, pw) = l.pooled();
                format!(
                    "level {}: {}x{}x{} conv {}x{} -> {} filters, pool {}x{} -> {}x{}",
                    i + 1,
                    l.in_channels,
                    l.height,
                    l.width,
                    l.kernel.0,
                    l.kernel.1,
                    l.filters,
                    l.pool.0,
                    l.pool.1,
                    ph,
                    pw
                )
            })
            .collect::<Vec<_>>()
            .join("; ")
    }

    pub fn init_params(&self, rng: &mut Rng) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (i, l) in self.levels.iter().enumerate() {
            let (kh, kw) = l.kernel;
            let area = kh * kw;
            out.push((
                format!("enc{i}.kernel"),
                glorot_uniform(
                    vec![l.filters, l.in_channels, kh, kw],
                    l.in_channels * area,
                    l.filters * area,
                    rng,
                ),
            ));
            out.push((format!("enc{i}.bias"), Tensor::zeros(vec![l.filters])));
        }
        let (c, _, w) = self.bottleneck();
        let seq_dim = c * w;
        out.extend(gru_params("enc_gru", seq_dim, self.latent_dim, rng));
        out.extend(gru_params("dec_gru", self.latent_dim, seq_dim, rng));
        for (i, l) in self.levels.iter().enumerate().rev() {
            let (kh, kw) = l.kernel;
            let area = kh * kw;
            // decoder level i maps the level's filters back to its input channels
            out.push((
                format!("dec{i}.kernel"),
                glorot_uniform(
                    vec![l.in_channels, l.filters, kh, kw],
                    l.filters * area,
                    l.in_channels * area,
                    rng,
                ),
            ));
            out.push((format!("dec{i}.bias"), Tensor::zeros(vec![l.in_channels])));
        }
        out
    }

    /// `x: [B, rows * cols * channels]` in channel-major order. Returns the
    /// latent `[B, latent_dim]`; `p` holds graph variables in
    /// [`CnnGruPlan::init_params`] order.
    pub fn encode(&self, g: &mut Graph, p: &[Var], x: Var, alpha: f64) -> Result<Var> {
        let b = g.shape(x)[0];
        let InputShape { rows, cols, channels } = self.input;
        let mut h = g.reshape(x, vec![b, channels, rows, cols])?;
        for (i, l) in self.levels.iter().enumerate() {
            h = g.conv2d(h, p[2 * i], p[2 * i + 1])?;
            h = g.leaky_relu(h, alpha);
            h = g.maxpool2d(h, l.pool)?;
        }
        let seq = g.to_sequence(h)?;
        let base = 2 * self.levels.len();
        let states = g.gru(seq, gru_vars(p, base))?;
        g.last_step(states)
    }

    /// Inverse path from `[B, latent_dim]` to `[B, features]`.
    pub fn decode(&self, g: &mut Graph, p: &[Var], z: Var, alpha: f64) -> Result<Var> {
        let b = g.shape(z)[0];
        let (c, steps, w) = self.bottleneck();
        let base = 2 * self.levels.len() + 3;
        let rep = g.repeat_steps(z, steps)?;
        let seq = g.gru(rep, gru_vars(p, base))?;
        let mut h = g.from_sequence(seq, c, w)?;
        let mut k = base + 3;
        for (i, l) in self.levels.iter().enumerate().rev() {
            h = g.upsample2d(h, l.pool, Some((l.height, l.width)))?;
            h = g.conv2d(h, p[k], p[k + 1])?;
            if i > 0 {
                h = g.leaky_relu(h, alpha);
            }
            k += 2;
        }
        g.reshape(h, vec![b, self.input.features()])
    }
}

fn gru_params(prefix: &str, input: usize, hidden: usize, rng: &mut Rng) -> Vec<(String, Tensor)> {
    vec![
        (
            format!("{prefix}.input"),
            glorot_uniform(vec![input, 3 * hidden], input, 3 * hidden, rng),
        ),
        (
            format!("{prefix}.hidden"),
            glorot_uniform(vec![hidden, 3 * hidden], hidden, 3 * hidden, rng),
        ),
        (format!("{prefix}.bias"), Tensor::zeros(vec![3 * hidden])),
    ]
}

fn gru_vars(p: &[Var], at: usize) -> GruWeights {
    GruWeights {
        input: p[at],
        hidden: p[at + 1],
        bias: p[at + 2],
    }
}
