//! Fully connected denoising autoencoder used by the latent-space baseline.

use crate::error::Result;
use crate::rng::Rng;
use crate::tensor::init::glorot_uniform;
use crate::tensor::{Graph, Tensor, Var};

/// Layer widths from input to latent, e.g. `[140, 500, 500, 2000, 5]`.
pub(crate) fn encoder_widths(input_dim: usize, hidden: &[usize], latent: usize) -> Vec<usize> {
    let mut w = Vec::with_capacity(hidden.len() + 2);
    w.push(input_dim);
    w.extend_from_slice(hidden);
    w.push(latent);
    w
}

pub(crate) fn init_params(widths: &[usize], rng: &mut Rng) -> Vec<(String, Tensor)> {
    let mut out = Vec::new();
    let mut push = |name: String, din: usize, dout: usize, rng: &mut Rng| {
        out.push((
            format!("{name}.weight"),
            glorot_uniform(vec![din, dout], din, dout, rng),
        ));
        out.push((format!("{name}.bias"), Tensor::zeros(vec![dout])));
    };
    for (i, pair) in widths.windows(2).enumerate() {
        push(format!("enc{i}"), pair[0], pair[1], rng);
    }
    let rev: Vec<usize> = widths.iter().rev().copied().collect();
    for (i, pair) in rev.windows(2).enumerate() {
        push(format!("dec{i}"), pair[0], pair[1], rng);
    }
    out
}

/// Stack of linear layers; ReLU between them, none after the last.
fn stack(g: &mut Graph, p: &[Var], mut h: Var, layers: usize) -> Result<Var> {
    for i in 0..layers {
        h = g.linear(h, p[2 * i], p[2 * i + 1])?;
        if i + 1 < layers {
            h = g.leaky_relu(h, 0.0);
        }
    }
    Ok(h)
}

pub(crate) fn encode(g: &mut Graph, p: &[Var], x: Var, layers: usize) -> Result<Var> {
    stack(g, &p[..2 * layers], x, layers)
}

pub(crate) fn decode(g: &mut Graph, p: &[Var], z: Var, layers: usize) -> Result<Var> {
    stack(g, &p[2 * layers..], z, layers)
}
