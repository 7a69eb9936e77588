//! The reverse-mode graph on its own: fit a line with Adam.

use tempoproj::tensor::{adam_step, AdamState, Graph, Tensor};

fn main() -> tempoproj::Result<()> {
    let xs: Vec<f64> = (0..20).map(|i| i as f64 / 10.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
    let x = Tensor::new(vec![20, 1], xs)?;
    let y = Tensor::new(vec![20, 1], ys)?;

    let mut params = [Tensor::zeros(vec![1, 1]), Tensor::zeros(vec![1])];
    let mut state = AdamState::new(&params.iter().collect::<Vec<_>>(), 0.01);
    for step in 0..2000 {
        let mut g = Graph::new();
        let w = g.param(params[0].clone());
        let b = g.param(params[1].clone());
        let xv = g.input(x.clone());
        let yv = g.input(y.clone());
        let pred = g.linear(xv, w, b)?;
        let loss = g.mse_loss(pred, yv)?;
        g.backward(loss)?;
        let grads = [g.grad(w).unwrap().to_vec(), g.grad(b).unwrap().to_vec()];
        let grads: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
        let mut refs: Vec<&mut Tensor> = params.iter_mut().collect();
        adam_step(&mut refs, &grads, &mut state)?;
        if step % 500 == 0 {
            println!("step {step:>4}  loss {:.6}", g.value(loss).data()[0]);
        }
    }
    println!("w {:.4}, b {:.4}", params[0].data()[0], params[1].data()[0]);
    Ok(())
}
