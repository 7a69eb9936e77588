use super::Tensor;
use crate::error::{Error, Result};

/// Adam moments for a fixed list of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &[&Tensor], lr: f64) -> Self {
        Self {
            step: 0,
            m: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut [&mut Tensor], grads: &[&[f64]], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "{} parameters, {} gradients, {} moment buffers",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        if p.numel() != g.len() || state.m[k].len() != g.len() {
            return Err(Error::Shape(format!(
                "parameter {k} and its gradient differ in size"
            )));
        }
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for i in 0..g.len() {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p.data[i] -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
        let before = p.clone();
        let mut st = AdamState::new(&[&p], 0.001);
        adam_step(&mut [&mut p], &[&[0.0; 3]], &mut st).unwrap();
        assert_eq!(p.data(), before.data());
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // t=1: m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
        let mut p = Tensor::scalar(0.0);
        let mut st = AdamState::new(&[&p], 0.001);
        adam_step(&mut [&mut p], &[&[1.0]], &mut st).unwrap();
        let expected = -0.001 / (1.0 + 1e-7);
        assert!((p.item() - expected).abs() < 1e-15);
    }

    #[test]
    fn descends_convex_quadratic() {
        // f(x) = sum (x_i - c_i)^2
        let c = [3.0, -1.0];
        let mut p = Tensor::new(vec![2], vec![0.0, 0.0]).unwrap();
        let mut st = AdamState::new(&[&p], 0.05);
        let loss = |x: &[f64]| x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let mut history = vec![loss(p.data())];
        for _ in 0..200 {
            let g: Vec<f64> = p.data().iter().zip(&c).map(|(a, b)| 2.0 * (a - b)).collect();
            adam_step(&mut [&mut p], &[&g], &mut st).unwrap();
            history.push(loss(p.data()));
        }
        for w in history[..40].windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(history.last().unwrap() < &1e-2);
    }
}
