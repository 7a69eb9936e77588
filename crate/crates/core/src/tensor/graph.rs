use super::linalg::{gemm, MatMut, MatRef};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// The three GRU parameter tensors. Gate blocks are ordered
/// `[update | reset | candidate]` along the last axis.
#[derive(Debug, Clone, Copy)]
pub struct GruWeights {
    /// `[input_dim, 3 * hidden]`
    pub input: Var,
    /// `[hidden, 3 * hidden]`
    pub hidden: Var,
    /// `[3 * hidden]`
    pub bias: Var,
}

#[derive(Debug)]
struct GruCache {
    /// Per step: previous state, update gate, reset gate, candidate and
    /// `reset * previous`, each `[B, H]`.
    h_prev: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    n: Vec<Vec<f64>>,
    rh: Vec<Vec<f64>>,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        x: Var,
        k: Var,
        b: Var,
        cols: Vec<f64>,
    },
    MaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    Upsample {
        x: Var,
        ph: usize,
        pw: usize,
    },
    LeakyRelu {
        x: Var,
        alpha: f64,
    },
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    Gru {
        x: Var,
        weights: GruWeights,
        cache: GruCache,
    },
    LastStep {
        x: Var,
    },
    Repeat {
        x: Var,
        steps: usize,
    },
    ToSequence {
        x: Var,
    },
    FromSequence {
        x: Var,
    },
    Reshape {
        x: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Mse {
        a: Var,
        b: Var,
    },
    WeightedSum {
        x: Var,
        weights: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Operation tape. Nodes are appended in evaluation order.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Start offsets of "same" zero padding for a kernel extent.
fn same_pad(k: usize) -> usize {
    (k - 1) / 2
}

fn dims4(shape: &[usize], what: &str) -> Result<(usize, usize, usize, usize)> {
    match *shape {
        [a, b, c, d] => Ok((a, b, c, d)),
        _ => Err(Error::Shape(format!("{what} must be 4-d, got {shape:?}"))),
    }
}

fn dims3(shape: &[usize], what: &str) -> Result<(usize, usize, usize)> {
    match *shape {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(Error::Shape(format!("{what} must be 3-d, got {shape:?}"))),
    }
}

fn dims2(shape: &[usize], what: &str) -> Result<(usize, usize)> {
    match *shape {
        [a, b] => Ok((a, b)),
        _ => Err(Error::Shape(format!("{what} must be 2-d, got {shape:?}"))),
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, mut value: Tensor, op: Op, inputs: &[Var]) -> Var {
        value.requires_grad = inputs.iter().any(|v| self.nodes[v.0].value.requires_grad);
        value.grad = None;
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf; gradients are accumulated for it.
    pub fn param(&mut self, t: Tensor) -> Var {
        let mut t = t;
        t.requires_grad = true;
        t.grad = None;
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    /// Constant leaf.
    pub fn input(&mut self, t: Tensor) -> Var {
        let mut t = t;
        t.requires_grad = false;
        t.grad = None;
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last `backward` target with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.grad()
    }

    /// Same-padded, stride-1 2-D cross-correlation.
    ///
    /// `x: [B, C, H, W]`, `k: [F, C, kh, kw]`, `b: [F]` gives `[B, F, H, W]`.
    /// For even kernel extents the extra padding row/column goes after the
    /// data.
    pub fn conv2d(&mut self, x: Var, k: Var, b: Var) -> Result<Var> {
        let (bs, c, h, w) = dims4(self.shape(x), "conv2d input")?;
        let (f, kc, kh, kw) = dims4(self.shape(k), "conv2d kernel")?;
        if kc != c {
            return Err(Error::Shape(format!(
                "conv2d kernel expects {kc} channels, input has {c}"
            )));
        }
        if self.shape(b) != [f] {
            return Err(Error::Shape(format!(
                "conv2d bias must be [{f}], got {:?}",
                self.shape(b)
            )));
        }
        if kh == 0 || kw == 0 || kh > h + kh - 1 || kw > w + kw - 1 {
            return Err(Error::Shape("conv2d kernel has zero extent".into()));
        }
        let ckk = c * kh * kw;
        let hw = h * w;
        let (pt, pl) = (same_pad(kh), same_pad(kw));
        let xd = self.value(x).data();
        let mut cols = vec![0.0; bs * ckk * hw];
        for bi in 0..bs {
            let col = &mut cols[bi * ckk * hw..(bi + 1) * ckk * hw];
            for ci in 0..c {
                let plane = &xd[(bi * c + ci) * hw..(bi * c + ci + 1) * hw];
                for i in 0..kh {
                    for j in 0..kw {
                        let row = &mut col[((ci * kh + i) * kw + j) * hw..][..hw];
                        for y in 0..h {
                            let sy = y as isize + i as isize - pt as isize;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            for xo in 0..w {
                                let sx = xo as isize + j as isize - pl as isize;
                                if sx >= 0 && sx < w as isize {
                                    row[y * w + xo] = plane[sy as usize * w + sx as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
        let kd = self.value(k).data();
        let bd = self.value(b).data();
        let mut out = vec![0.0; bs * f * hw];
        for bi in 0..bs {
            let o = &mut out[bi * f * hw..(bi + 1) * f * hw];
            for fi in 0..f {
                o[fi * hw..(fi + 1) * hw].fill(bd[fi]);
            }
            gemm(
                1.0,
                MatRef::new(kd, f, ckk),
                MatRef::new(&cols[bi * ckk * hw..(bi + 1) * ckk * hw], ckk, hw),
                1.0,
                MatMut::new(o, f, hw),
            );
        }
        let value = Tensor::new(vec![bs, f, h, w], out)?;
        Ok(self.push(value, Op::Conv2d { x, k, b, cols }, &[x, k, b]))
    }

    /// Non-overlapping max pooling. The window is clamped to the input
    /// extent and ragged edges form partial windows (ceil mode). Ties go to
    /// the first element in row-major order.
    pub fn maxpool2d(&mut self, x: Var, size: (usize, usize)) -> Result<Var> {
        let (bs, c, h, w) = dims4(self.shape(x), "maxpool2d input")?;
        let (ph, pw) = effective_pool(size, h, w)?;
        let (oh, ow) = (h.div_ceil(ph), w.div_ceil(pw));
        let xd = self.value(x).data();
        let mut out = Vec::with_capacity(bs * c * oh * ow);
        let mut argmax = Vec::with_capacity(out.capacity());
        for plane in 0..bs * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = usize::MAX;
                    for y in oy * ph..((oy + 1) * ph).min(h) {
                        for xx in ox * pw..((ox + 1) * pw).min(w) {
                            let idx = base + y * w + xx;
                            if best == usize::MAX || xd[idx] > xd[best] {
                                best = idx;
                            }
                        }
                    }
                    out.push(xd[best]);
                    argmax.push(best);
                }
            }
        }
        let value = Tensor::new(vec![bs, c, oh, ow], out)?;
        Ok(self.push(value, Op::MaxPool { x, argmax }, &[x]))
    }

    /// Nearest-neighbour upsampling by `(ph, pw)`. With `crop = Some((h, w))`
    /// the result is cut to `h x w`, which inverts a ceil-mode pooling shape.
    pub fn upsample2d(&mut self, x: Var, size: (usize, usize), crop: Option<(usize, usize)>) -> Result<Var> {
        let (bs, c, h, w) = dims4(self.shape(x), "upsample2d input")?;
        let (ph, pw) = size;
        if ph == 0 || pw == 0 {
            return Err(Error::Shape("upsample factor must be positive".into()));
        }
        let (oh, ow) = crop.unwrap_or((h * ph, w * pw));
        if oh > h * ph || ow > w * pw || oh == 0 || ow == 0 {
            return Err(Error::Shape(format!(
                "cannot crop {}x{} upsampled input to {oh}x{ow}",
                h * ph,
                w * pw
            )));
        }
        let xd = self.value(x).data();
        let mut out = Vec::with_capacity(bs * c * oh * ow);
        for plane in 0..bs * c {
            for y in 0..oh {
                for xx in 0..ow {
                    out.push(xd[plane * h * w + (y / ph) * w + xx / pw]);
                }
            }
        }
        let value = Tensor::new(vec![bs, c, oh, ow], out)?;
        Ok(self.push(value, Op::Upsample { x, ph, pw }, &[x]))
    }

    /// `x` if positive, `alpha * x` otherwise.
    pub fn leaky_relu(&mut self, x: Var, alpha: f64) -> Var {
        let t = self.value(x);
        let data = t
            .data()
            .iter()
            .map(|&v| if v > 0.0 { v } else { alpha * v })
            .collect();
        let value = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        self.push(value, Op::LeakyRelu { x, alpha }, &[x])
    }

    /// `x [B, in] * w [in, out] + b [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (bs, din) = dims2(self.shape(x), "linear input")?;
        let (win, dout) = dims2(self.shape(w), "linear weight")?;
        if win != din || self.shape(b) != [dout] {
            return Err(Error::Shape(format!(
                "linear: input {:?}, weight {:?}, bias {:?}",
                self.shape(x),
                self.shape(w),
                self.shape(b)
            )));
        }
        let bd = self.value(b).data();
        let mut out: Vec<f64> = (0..bs).flat_map(|_| bd.iter().copied()).collect();
        gemm(
            1.0,
            MatRef::new(self.value(x).data(), bs, din),
            MatRef::new(self.value(w).data(), din, dout),
            1.0,
            MatMut::new(&mut out, bs, dout),
        );
        let value = Tensor::new(vec![bs, dout], out)?;
        Ok(self.push(value, Op::Linear { x, w, b }, &[x, w, b]))
    }

    /// Runs a GRU over `x: [B, T, D]` from a zero state and returns every
    /// hidden state, `[B, T, H]`.
    ///
    /// ```text
    /// z = sigmoid(x Wz + h Uz + bz)
    /// r = sigmoid(x Wr + h Ur + br)
    /// n = tanh(x Wn + (r * h) Un + bn)
    /// h' = z * h + (1 - z) * n
    /// ```
    pub fn gru(&mut self, x: Var, weights: GruWeights) -> Result<Var> {
        let (bs, steps, d) = dims3(self.shape(x), "gru input")?;
        let (wd, h3) = dims2(self.shape(weights.input), "gru input weights")?;
        let hd = h3 / 3;
        if wd != d || h3 != 3 * hd || hd == 0 {
            return Err(Error::Shape(format!(
                "gru input weights {:?} do not fit input {:?}",
                self.shape(weights.input),
                self.shape(x)
            )));
        }
        if self.shape(weights.hidden) != [hd, h3] || self.shape(weights.bias) != [h3] {
            return Err(Error::Shape(format!(
                "gru hidden weights {:?} / bias {:?} do not fit hidden size {hd}",
                self.shape(weights.hidden),
                self.shape(weights.bias)
            )));
        }
        if steps == 0 {
            return Err(Error::Shape("gru needs at least one timestep".into()));
        }
        let xd = self.value(x).data();
        let wi = self.value(weights.input).data();
        let wh = self.value(weights.hidden).data();
        let bias = self.value(weights.bias).data();

        let mut cache = GruCache {
            h_prev: Vec::with_capacity(steps),
            z: Vec::with_capacity(steps),
            r: Vec::with_capacity(steps),
            n: Vec::with_capacity(steps),
            rh: Vec::with_capacity(steps),
        };
        let mut out = vec![0.0; bs * steps * hd];
        let mut h = vec![0.0; bs * hd];
        let mut ax = vec![0.0; bs * h3];
        let mut ah = vec![0.0; bs * 2 * hd];
        let mut an = vec![0.0; bs * hd];
        for t in 0..steps {
            for row in ax.chunks_mut(h3) {
                row.copy_from_slice(bias);
            }
            gemm(
                1.0,
                MatRef::strided(&xd[t * d..], bs, d, steps * d, 1),
                MatRef::new(wi, d, h3),
                1.0,
                MatMut::new(&mut ax, bs, h3),
            );
            gemm(
                1.0,
                MatRef::new(&h, bs, hd),
                MatRef::strided(wh, hd, 2 * hd, h3, 1),
                0.0,
                MatMut::new(&mut ah, bs, 2 * hd),
            );
            let mut z = vec![0.0; bs * hd];
            let mut r = vec![0.0; bs * hd];
            let mut rh = vec![0.0; bs * hd];
            for bi in 0..bs {
                for j in 0..hd {
                    let zi = sigmoid(ax[bi * h3 + j] + ah[bi * 2 * hd + j]);
                    let ri = sigmoid(ax[bi * h3 + hd + j] + ah[bi * 2 * hd + hd + j]);
                    z[bi * hd + j] = zi;
                    r[bi * hd + j] = ri;
                    rh[bi * hd + j] = ri * h[bi * hd + j];
                }
            }
            gemm(
                1.0,
                MatRef::new(&rh, bs, hd),
                MatRef::strided(&wh[2 * hd..], hd, hd, h3, 1),
                0.0,
                MatMut::new(&mut an, bs, hd),
            );
            let mut n = vec![0.0; bs * hd];
            let mut h_next = vec![0.0; bs * hd];
            for bi in 0..bs {
                for j in 0..hd {
                    let idx = bi * hd + j;
                    let ni = (ax[bi * h3 + 2 * hd + j] + an[idx]).tanh();
                    n[idx] = ni;
                    h_next[idx] = z[idx] * h[idx] + (1.0 - z[idx]) * ni;
                    out[(bi * steps + t) * hd + j] = h_next[idx];
                }
            }
            cache.h_prev.push(std::mem::replace(&mut h, h_next));
            cache.z.push(z);
            cache.r.push(r);
            cache.n.push(n);
            cache.rh.push(rh);
        }
        let value = Tensor::new(vec![bs, steps, hd], out)?;
        Ok(self.push(
            value,
            Op::Gru { x, weights, cache },
            &[x, weights.input, weights.hidden, weights.bias],
        ))
    }

    /// `[B, T, H] -> [B, H]`, the final timestep.
    pub fn last_step(&mut self, x: Var) -> Result<Var> {
        let (bs, steps, hd) = dims3(self.shape(x), "last_step input")?;
        let xd = self.value(x).data();
        let data = (0..bs)
            .flat_map(|b| {
                xd[(b * steps + steps - 1) * hd..(b * steps + steps) * hd]
                    .iter()
                    .copied()
            })
            .collect();
        let value = Tensor::new(vec![bs, hd], data)?;
        Ok(self.push(value, Op::LastStep { x }, &[x]))
    }

    /// `[B, H] -> [B, T, H]` by repeating each row `steps` times.
    pub fn repeat_steps(&mut self, x: Var, steps: usize) -> Result<Var> {
        let (bs, hd) = dims2(self.shape(x), "repeat_steps input")?;
        let xd = self.value(x).data();
        let mut data = Vec::with_capacity(bs * steps * hd);
        for b in 0..bs {
            for _ in 0..steps {
                data.extend_from_slice(&xd[b * hd..(b + 1) * hd]);
            }
        }
        let value = Tensor::new(vec![bs, steps, hd], data)?;
        Ok(self.push(value, Op::Repeat { x, steps }, &[x]))
    }

    /// `[B, C, H, W] -> [B, H, C * W]`: rows become timesteps, feature index
    /// is `c * W + w`.
    pub fn to_sequence(&mut self, x: Var) -> Result<Var> {
        let (bs, c, h, w) = dims4(self.shape(x), "to_sequence input")?;
        let xd = self.value(x).data();
        let mut data = vec![0.0; xd.len()];
        for b in 0..bs {
            for ci in 0..c {
                for y in 0..h {
                    for xx in 0..w {
                        data[(b * h + y) * c * w + ci * w + xx] = xd[((b * c + ci) * h + y) * w + xx];
                    }
                }
            }
        }
        let value = Tensor::new(vec![bs, h, c * w], data)?;
        Ok(self.push(value, Op::ToSequence { x }, &[x]))
    }

    /// Inverse of [`Graph::to_sequence`]: `[B, T, C * W] -> [B, C, T, W]`.
    pub fn from_sequence(&mut self, x: Var, channels: usize, width: usize) -> Result<Var> {
        let (bs, steps, f) = dims3(self.shape(x), "from_sequence input")?;
        if f != channels * width {
            return Err(Error::Shape(format!(
                "from_sequence: {f} features cannot split into {channels}x{width}"
            )));
        }
        let xd = self.value(x).data();
        let mut data = vec![0.0; xd.len()];
        for b in 0..bs {
            for ci in 0..channels {
                for y in 0..steps {
                    for xx in 0..width {
                        data[((b * channels + ci) * steps + y) * width + xx] =
                            xd[(b * steps + y) * f + ci * width + xx];
                    }
                }
            }
        }
        let value = Tensor::new(vec![bs, channels, steps, width], data)?;
        Ok(self.push(value, Op::FromSequence { x }, &[x]))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let value = self.value(x).clone().reshaped(shape)?;
        Ok(self.push(value, Op::Reshape { x }, &[x]))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "{what}: shapes {:?} and {:?} differ",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        Ok(self.push(value, Op::Add { a, b }, &[a, b]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        Ok(self.push(value, Op::Mul { a, b }, &[a, b]))
    }

    /// Mean of squared differences over all elements, as a scalar.
    pub fn mse_loss(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mse_loss")?;
        let n = self.value(a).numel() as f64;
        let s: f64 = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        Ok(self.push(Tensor::scalar(s / n), Op::Mse { a, b }, &[a, b]))
    }

    /// `sum_i x_i * weights_i` with constant weights, as a scalar.
    pub fn weighted_sum(&mut self, x: Var, weights: Vec<f64>) -> Result<Var> {
        if weights.len() != self.value(x).numel() {
            return Err(Error::Shape(format!(
                "{} weights for {} elements",
                weights.len(),
                self.value(x).numel()
            )));
        }
        let s = self
            .value(x)
            .data()
            .iter()
            .zip(&weights)
            .map(|(a, b)| a * b)
            .sum();
        Ok(self.push(Tensor::scalar(s), Op::WeightedSum { x, weights }, &[x]))
    }

    /// Reverse sweep from a scalar. Gradients from earlier `backward` calls
    /// are cleared first.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar, got shape {:?}",
                self.shape(loss)
            )));
        }
        for node in &mut self.nodes {
            node.value.grad = None;
        }
        self.nodes[loss.0].value.grad = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].value.requires_grad {
                continue;
            }
            let Some(g) = self.nodes[idx].value.grad.take() else {
                continue;
            };
            let contributions = self.node_backward(idx, &g);
            self.nodes[idx].value.grad = Some(g);
            for (var, grad) in contributions {
                let node = &mut self.nodes[var.0];
                if node.value.requires_grad {
                    node.value.accumulate_grad(&grad);
                }
            }
        }
        Ok(())
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].value.requires_grad
    }

    fn node_backward(&self, idx: usize, g: &[f64]) -> Vec<(Var, Vec<f64>)> {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => vec![],
            Op::Conv2d { x, k, b, cols } => self.conv2d_backward(*x, *k, *b, cols, g),
            Op::MaxPool { x, argmax } => {
                let mut dx = vec![0.0; self.value(*x).numel()];
                for (o, &src) in argmax.iter().enumerate() {
                    dx[src] += g[o];
                }
                vec![(*x, dx)]
            }
            Op::Upsample { x, ph, pw } => {
                let (_, _, h, w) = dims4(self.shape(*x), "").unwrap();
                let (_, _, oh, ow) = dims4(node.value.shape(), "").unwrap();
                let mut dx = vec![0.0; self.value(*x).numel()];
                for (plane, gp) in g.chunks(oh * ow).enumerate() {
                    for y in 0..oh {
                        for xx in 0..ow {
                            dx[plane * h * w + (y / ph) * w + xx / pw] += gp[y * ow + xx];
                        }
                    }
                }
                vec![(*x, dx)]
            }
            Op::LeakyRelu { x, alpha } => {
                let dx = self
                    .value(*x)
                    .data()
                    .iter()
                    .zip(g)
                    .map(|(&v, &gi)| if v > 0.0 { gi } else { alpha * gi })
                    .collect();
                vec![(*x, dx)]
            }
            Op::Linear { x, w, b } => {
                let (bs, din) = dims2(self.shape(*x), "").unwrap();
                let dout = self.shape(*w)[1];
                let mut out = Vec::new();
                if self.wants(*x) {
                    let mut dx = vec![0.0; bs * din];
                    gemm(
                        1.0,
                        MatRef::new(g, bs, dout),
                        MatRef::new(self.value(*w).data(), din, dout).t(),
                        0.0,
                        MatMut::new(&mut dx, bs, din),
                    );
                    out.push((*x, dx));
                }
                if self.wants(*w) {
                    let mut dw = vec![0.0; din * dout];
                    gemm(
                        1.0,
                        MatRef::new(self.value(*x).data(), bs, din).t(),
                        MatRef::new(g, bs, dout),
                        0.0,
                        MatMut::new(&mut dw, din, dout),
                    );
                    out.push((*w, dw));
                }
                if self.wants(*b) {
                    let mut db = vec![0.0; dout];
                    for row in g.chunks(dout) {
                        db.iter_mut().zip(row).for_each(|(a, v)| *a += v);
                    }
                    out.push((*b, db));
                }
                out
            }
            Op::Gru { x, weights, cache } => self.gru_backward(*x, *weights, cache, g),
            Op::LastStep { x } => {
                let (bs, steps, hd) = dims3(self.shape(*x), "").unwrap();
                let mut dx = vec![0.0; bs * steps * hd];
                for b in 0..bs {
                    dx[(b * steps + steps - 1) * hd..(b * steps + steps) * hd]
                        .copy_from_slice(&g[b * hd..(b + 1) * hd]);
                }
                vec![(*x, dx)]
            }
            Op::Repeat { x, steps } => {
                let (bs, hd) = dims2(self.shape(*x), "").unwrap();
                let mut dx = vec![0.0; bs * hd];
                for b in 0..bs {
                    for t in 0..*steps {
                        let src = &g[(b * steps + t) * hd..(b * steps + t + 1) * hd];
                        dx[b * hd..(b + 1) * hd]
                            .iter_mut()
                            .zip(src)
                            .for_each(|(a, v)| *a += v);
                    }
                }
                vec![(*x, dx)]
            }
            Op::ToSequence { x } => {
                let (bs, c, h, w) = dims4(self.shape(*x), "").unwrap();
                let mut dx = vec![0.0; g.len()];
                for b in 0..bs {
                    for ci in 0..c {
                        for y in 0..h {
                            for xx in 0..w {
                                dx[((b * c + ci) * h + y) * w + xx] = g[(b * h + y) * c * w + ci * w + xx];
                            }
                        }
                    }
                }
                vec![(*x, dx)]
            }
            Op::FromSequence { x } => {
                let (bs, steps, f) = dims3(self.shape(*x), "").unwrap();
                let (_, c, _, w) = dims4(node.value.shape(), "").unwrap();
                let mut dx = vec![0.0; g.len()];
                for b in 0..bs {
                    for ci in 0..c {
                        for y in 0..steps {
                            for xx in 0..w {
                                dx[(b * steps + y) * f + ci * w + xx] =
                                    g[((b * c + ci) * steps + y) * w + xx];
                            }
                        }
                    }
                }
                vec![(*x, dx)]
            }
            Op::Reshape { x } => vec![(*x, g.to_vec())],
            Op::Add { a, b } => vec![(*a, g.to_vec()), (*b, g.to_vec())],
            Op::Mul { a, b } => {
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                let da = g.iter().zip(bd).map(|(gi, v)| gi * v).collect();
                let db = g.iter().zip(ad).map(|(gi, v)| gi * v).collect();
                vec![(*a, da), (*b, db)]
            }
            Op::Mse { a, b } => {
                let scale = 2.0 * g[0] / self.value(*a).numel() as f64;
                let da: Vec<f64> = self
                    .value(*a)
                    .data()
                    .iter()
                    .zip(self.value(*b).data())
                    .map(|(x, y)| scale * (x - y))
                    .collect();
                let db = da.iter().map(|v| -v).collect();
                vec![(*a, da), (*b, db)]
            }
            Op::WeightedSum { x, weights } => {
                vec![(*x, weights.iter().map(|w| w * g[0]).collect())]
            }
        }
    }

    fn conv2d_backward(&self, x: Var, k: Var, b: Var, cols: &[f64], g: &[f64]) -> Vec<(Var, Vec<f64>)> {
        let (bs, c, h, w) = dims4(self.shape(x), "").unwrap();
        let (f, _, kh, kw) = dims4(self.shape(k), "").unwrap();
        let (ckk, hw) = (c * kh * kw, h * w);
        let mut out = Vec::new();
        if self.wants(b) {
            let mut db = vec![0.0; f];
            for bi in 0..bs {
                for fi in 0..f {
                    db[fi] += g[(bi * f + fi) * hw..(bi * f + fi + 1) * hw].iter().sum::<f64>();
                }
            }
            out.push((b, db));
        }
        if self.wants(k) {
            let mut dk = vec![0.0; f * ckk];
            for bi in 0..bs {
                gemm(
                    1.0,
                    MatRef::new(&g[bi * f * hw..(bi + 1) * f * hw], f, hw),
                    MatRef::new(&cols[bi * ckk * hw..(bi + 1) * ckk * hw], ckk, hw).t(),
                    1.0,
                    MatMut::new(&mut dk, f, ckk),
                );
            }
            out.push((k, dk));
        }
        if self.wants(x) {
            let kd = self.value(k).data();
            let (pt, pl) = (same_pad(kh), same_pad(kw));
            let mut dx = vec![0.0; bs * c * hw];
            let mut dcol = vec![0.0; ckk * hw];
            for bi in 0..bs {
                gemm(
                    1.0,
                    MatRef::new(kd, f, ckk).t(),
                    MatRef::new(&g[bi * f * hw..(bi + 1) * f * hw], f, hw),
                    0.0,
                    MatMut::new(&mut dcol, ckk, hw),
                );
                for ci in 0..c {
                    let plane = &mut dx[(bi * c + ci) * hw..(bi * c + ci + 1) * hw];
                    for i in 0..kh {
                        for j in 0..kw {
                            let row = &dcol[((ci * kh + i) * kw + j) * hw..][..hw];
                            for y in 0..h {
                                let sy = y as isize + i as isize - pt as isize;
                                if sy < 0 || sy >= h as isize {
                                    continue;
                                }
                                for xo in 0..w {
                                    let sx = xo as isize + j as isize - pl as isize;
                                    if sx >= 0 && sx < w as isize {
                                        plane[sy as usize * w + sx as usize] += row[y * w + xo];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            out.push((x, dx));
        }
        out
    }

    fn gru_backward(&self, x: Var, wts: GruWeights, cache: &GruCache, g: &[f64]) -> Vec<(Var, Vec<f64>)> {
        let (bs, steps, d) = dims3(self.shape(x), "").unwrap();
        let xd = self.value(x).data();
        let wi = self.value(wts.input).data();
        let wh = self.value(wts.hidden).data();
        let h3 = wi.len() / d;
        let hd = h3 / 3;

        let mut dx = vec![0.0; bs * steps * d];
        let mut dwi = vec![0.0; d * h3];
        let mut dwh = vec![0.0; hd * h3];
        let mut dbias = vec![0.0; h3];
        let mut dh = vec![0.0; bs * hd];
        let mut da = vec![0.0; bs * h3];
        let mut drh = vec![0.0; bs * hd];
        for t in (0..steps).rev() {
            for b in 0..bs {
                for j in 0..hd {
                    dh[b * hd + j] += g[(b * steps + t) * hd + j];
                }
            }
            let (hp, z, r, n, rh) = (
                &cache.h_prev[t],
                &cache.z[t],
                &cache.r[t],
                &cache.n[t],
                &cache.rh[t],
            );
            // candidate pre-activation gradient first; the reset gate needs it
            let mut dh_prev = vec![0.0; bs * hd];
            for idx in 0..bs * hd {
                let (b, j) = (idx / hd, idx % hd);
                let dz = dh[idx] * (hp[idx] - n[idx]);
                let dn = dh[idx] * (1.0 - z[idx]);
                da[b * h3 + j] = dz * z[idx] * (1.0 - z[idx]);
                da[b * h3 + 2 * hd + j] = dn * (1.0 - n[idx] * n[idx]);
                dh_prev[idx] = dh[idx] * z[idx];
            }
            // drh = da_n * Un^T
            gemm(
                1.0,
                MatRef::strided(&da[2 * hd..], bs, hd, h3, 1),
                MatRef::strided(&wh[2 * hd..], hd, hd, h3, 1).t(),
                0.0,
                MatMut::new(&mut drh, bs, hd),
            );
            for idx in 0..bs * hd {
                let (b, j) = (idx / hd, idx % hd);
                let dr = drh[idx] * hp[idx];
                da[b * h3 + hd + j] = dr * r[idx] * (1.0 - r[idx]);
                dh_prev[idx] += drh[idx] * r[idx];
            }
            // dWi += x_t^T da, dx_t = da Wi^T
            let xt = MatRef::strided(&xd[t * d..], bs, d, steps * d, 1);
            gemm(
                1.0,
                xt.t(),
                MatRef::new(&da, bs, h3),
                1.0,
                MatMut::new(&mut dwi, d, h3),
            );
            gemm(
                1.0,
                MatRef::new(&da, bs, h3),
                MatRef::new(wi, d, h3).t(),
                0.0,
                MatMut::strided(&mut dx[t * d..], bs, d, steps * d, 1),
            );
            for row in da.chunks(h3) {
                dbias.iter_mut().zip(row).for_each(|(a, v)| *a += v);
            }
            // gates z, r see h_prev; the candidate sees r * h_prev
            gemm(
                1.0,
                MatRef::new(hp, bs, hd).t(),
                MatRef::strided(&da, bs, 2 * hd, h3, 1),
                1.0,
                MatMut::strided(&mut dwh, hd, 2 * hd, h3, 1),
            );
            gemm(
                1.0,
                MatRef::new(rh, bs, hd).t(),
                MatRef::strided(&da[2 * hd..], bs, hd, h3, 1),
                1.0,
                MatMut::strided(&mut dwh[2 * hd..], hd, hd, h3, 1),
            );
            gemm(
                1.0,
                MatRef::strided(&da, bs, 2 * hd, h3, 1),
                MatRef::strided(wh, hd, 2 * hd, h3, 1).t(),
                1.0,
                MatMut::new(&mut dh_prev, bs, hd),
            );
            dh = dh_prev;
        }
        let mut out = Vec::with_capacity(4);
        if self.wants(x) {
            out.push((x, dx));
        }
        out.push((wts.input, dwi));
        out.push((wts.hidden, dwh));
        out.push((wts.bias, dbias));
        out
    }
}

/// Pool window clamped to the input extent.
pub(crate) fn effective_pool(size: (usize, usize), h: usize, w: usize) -> Result<(usize, usize)> {
    if size.0 == 0 || size.1 == 0 {
        return Err(Error::Shape("pool size must be positive".into()));
    }
    if h == 0 || w == 0 {
        return Err(Error::Shape("cannot pool an empty input".into()));
    }
    Ok((size.0.min(h), size.1.min(w)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn identity_kernel_conv() {
        let mut g = Graph::new();
        let x = g.input(t(&[1, 1, 2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let k = g.param(t(&[1, 1, 1, 1], &[1.0]));
        let b = g.param(t(&[1], &[0.0]));
        let y = g.conv2d(x, k, b).unwrap();
        assert_eq!(g.value(y).data(), g.value(x).data());
    }

    #[test]
    fn conv_two_by_two_hand_sums() {
        // pad 0 before, 1 after: out[y,x] = in[y,x] + in[y+1,x+1]
        let mut g = Graph::new();
        let x = g.input(t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let k = g.param(t(&[1, 1, 2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let b = g.param(t(&[1], &[0.0]));
        let y = g.conv2d(x, k, b).unwrap();
        assert_eq!(g.value(y).data(), &[5.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn conv_channel_mismatch() {
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros(vec![1, 2, 3, 3]));
        let k = g.param(Tensor::zeros(vec![1, 3, 1, 1]));
        let b = g.param(Tensor::zeros(vec![1]));
        assert!(matches!(g.conv2d(x, k, b), Err(Error::Shape(_))));
    }

    #[test]
    fn pooling_examples() {
        let mut g = Graph::new();
        let x = g.input(t(&[1, 1, 2, 2], &[1.0, 3.0, 2.0, 0.0]));
        let y = g.maxpool2d(x, (2, 2)).unwrap();
        assert_eq!(g.value(y).data(), &[3.0]);
        let big = g.maxpool2d(x, (5, 5)).unwrap();
        assert_eq!(g.shape(big), &[1, 1, 1, 1]);
        assert_eq!(g.value(big).data(), &[3.0]);
        // ceil mode on a ragged edge
        let r = g.input(t(&[1, 1, 1, 5], &[1.0, 5.0, 2.0, 0.0, 7.0]));
        let p = g.maxpool2d(r, (1, 2)).unwrap();
        assert_eq!(g.value(p).data(), &[5.0, 2.0, 7.0]);
    }

    #[test]
    fn pooling_tie_routes_to_first() {
        let mut g = Graph::new();
        let x = g.param(t(&[1, 1, 1, 3], &[2.0, 2.0, 1.0]));
        let y = g.maxpool2d(x, (1, 3)).unwrap();
        let s = g.weighted_sum(y, vec![1.0]).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn upsample_examples() {
        let mut g = Graph::new();
        let x = g.input(t(&[1, 1, 1, 1], &[1.0]));
        let y = g.upsample2d(x, (2, 2), None).unwrap();
        assert_eq!(g.value(y).data(), &[1.0; 4]);
        // constant input: upsample(maxpool(x)) == x, including ragged crop
        let c = g.input(Tensor::full(vec![1, 2, 7, 3], 0.25));
        let p = g.maxpool2d(c, (5, 5)).unwrap();
        assert_eq!(g.shape(p), &[1, 2, 2, 1]);
        let u = g.upsample2d(p, (5, 3), Some((7, 3))).unwrap();
        assert_eq!(g.value(u), g.value(c));
    }

    #[test]
    fn leaky_relu_values() {
        let mut g = Graph::new();
        let x = g.input(t(&[3], &[-1.0, 2.0, 0.0]));
        let y = g.leaky_relu(x, 0.1);
        assert_eq!(g.value(y).data(), &[-0.1, 2.0, 0.0]);
    }

    #[test]
    fn mse_values_and_gradient() {
        let mut g = Graph::new();
        let a = g.param(t(&[2], &[0.0, 0.0]));
        let b = g.input(t(&[2], &[1.0, 1.0]));
        let l = g.mse_loss(a, b).unwrap();
        assert_eq!(g.value(l).item(), 1.0);
        g.backward(l).unwrap();
        // 2 (a - b) / n
        assert_eq!(g.grad(a).unwrap(), &[-1.0, -1.0]);
        let same = g.mse_loss(b, b).unwrap();
        assert_eq!(g.value(same).item(), 0.0);
        let c = g.input(t(&[3], &[1.0, 1.0, 1.0]));
        assert!(matches!(g.mse_loss(a, c), Err(Error::Shape(_))));
    }

    #[test]
    fn diamond_graph_accumulates() {
        // y = (x + x) * x = 2 x^2, dy/dx = 4x
        let mut g = Graph::new();
        let x = g.param(t(&[2], &[1.5, -2.0]));
        let s = g.add(x, x).unwrap();
        let y = g.mul(s, x).unwrap();
        let out = g.weighted_sum(y, vec![1.0, 1.0]).unwrap();
        g.backward(out).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[6.0, -8.0]);
        // repeated backward starts from cleared gradients
        g.backward(out).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[6.0, -8.0]);
    }

    #[test]
    fn gru_zero_weights_give_zero_state() {
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros(vec![2, 4, 3]));
        let w = GruWeights {
            input: g.param(Tensor::zeros(vec![3, 15])),
            hidden: g.param(Tensor::zeros(vec![5, 15])),
            bias: g.param(Tensor::zeros(vec![15])),
        };
        let seq = g.gru(x, w).unwrap();
        let last = g.last_step(seq).unwrap();
        assert_eq!(g.shape(last), &[2, 5]);
        assert!(g.value(last).data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gru_single_step_scalar_recurrence() {
        // H = 1, D = 1, one step from h0 = 0:
        // z = s(wz x + bz), r = s(wr x + br), n = tanh(wn x + bn), h = (1 - z) n
        let (x0, wz, wr, wn, bz, br, bn) = (0.7, 0.3, -0.4, 1.2, 0.1, 0.2, -0.3);
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let z = s(wz * x0 + bz);
        let _r = s(wr * x0 + br);
        let n = (wn * x0 + bn).tanh();
        let expected = (1.0 - z) * n;

        let mut g = Graph::new();
        let x = g.input(t(&[1, 1, 1], &[x0]));
        let w = GruWeights {
            input: g.param(t(&[1, 3], &[wz, wr, wn])),
            hidden: g.param(t(&[1, 3], &[0.5, -0.6, 0.9])),
            bias: g.param(t(&[3], &[bz, br, bn])),
        };
        let seq = g.gru(x, w).unwrap();
        let h = g.last_step(seq).unwrap();
        assert!((g.value(h).item() - expected).abs() < 1e-15);
    }

    #[test]
    fn sequence_layout_roundtrip() {
        let mut g = Graph::new();
        let data: Vec<f64> = (0..24).map(f64::from).collect();
        let x = g.input(t(&[2, 3, 2, 2], &data));
        let s = g.to_sequence(x).unwrap();
        assert_eq!(g.shape(s), &[2, 2, 6]);
        // batch 0, row 1: channel-major features [c0 w0, c0 w1, c1 w0, ...]
        assert_eq!(&g.value(s).data()[6..12], &[2.0, 3.0, 6.0, 7.0, 10.0, 11.0]);
        let back = g.from_sequence(s, 3, 2).unwrap();
        assert_eq!(g.value(back).data(), &data[..]);
    }
}
