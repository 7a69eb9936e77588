//! Spectral clustering of blobs with very different spreads.

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;
use tempoproj::clustering::spectral;
use tempoproj::evaluation::clustering_accuracy;

fn main() -> tempoproj::Result<()> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(4);
    let blobs = [
        ((0.0, 0.0), 0.2, 30),
        ((8.0, 1.0), 0.6, 15),
        ((2.0, 9.0), 0.4, 25),
    ];
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for (label, &((cx, cy), spread, size)) in blobs.iter().enumerate() {
        let noise = Normal::new(0.0, spread).unwrap();
        for _ in 0..size {
            points.push(vec![cx + noise.sample(&mut rng), cy + noise.sample(&mut rng)]);
            truth.push(label);
        }
    }
    let a = spectral(&points, 3, 0)?;
    println!("spectral accuracy {:.3}", clustering_accuracy(&a.labels, &truth)?);
    Ok(())
}
