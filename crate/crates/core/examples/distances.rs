//! Euclidean, DTW and shape-based distance on a pair of shifted sines.

use tempoproj::metrics::{dtw, dtw_path, euclidean, sbd, sbd_align};

fn main() -> tempoproj::Result<()> {
    let wave = |shift: f64| -> Vec<f64> {
        (0..64)
            .map(|t| (t as f64 / 64.0 * std::f64::consts::TAU * 2.0 + shift).sin())
            .collect()
    };
    let x = wave(0.0);
    let y = wave(0.8);

    println!("euclidean      {:.4}", euclidean(&x, &y)?);
    println!("dtw            {:.4}", dtw(&x, &y, None)?);
    println!("dtw band=4     {:.4}", dtw(&x, &y, Some(4))?);
    println!("sbd            {:.4}", sbd(&x, &y)?);

    let doubled: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    println!("sbd(x, 2x)     {:.2e}", sbd(&x, &doubled)?);

    let (_, aligned) = sbd_align(&x, &y)?;
    println!("euclidean after sbd alignment {:.4}", euclidean(&x, &aligned)?);

    let (_, path) = dtw_path(&x, &y, None)?;
    println!("warping path has {} steps, first {:?}", path.len(), &path[..4]);
    Ok(())
}
