//! DBSCAN with the radius taken from the elbow of the k-distance curve.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use tempoproj::clustering::{dbscan, elbow, k_distance_curve, Eps, DEFAULT_MIN_PTS, NOISE};

fn main() -> tempoproj::Result<()> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
    let mut points: Vec<Vec<f64>> = Vec::new();
    for (cx, cy) in [(0.0, 0.0), (5.0, 5.0)] {
        for _ in 0..40 {
            points.push(vec![cx + rng.gen_range(-0.5..0.5), cy + rng.gen_range(-0.5..0.5)]);
        }
    }
    // a few scattered outliers
    for _ in 0..5 {
        points.push(vec![rng.gen_range(-10.0..15.0), rng.gen_range(10.0..15.0)]);
    }

    let curve = k_distance_curve(&points, DEFAULT_MIN_PTS);
    println!("k-distance elbow {:.3}", elbow(&curve).unwrap());
    let a = dbscan(&points, Eps::Auto, DEFAULT_MIN_PTS)?;
    println!(
        "{} clusters, {} noise points, eps {:.3}",
        a.k,
        a.noise_count(),
        a.score.unwrap()
    );
    let outliers: Vec<usize> = (80..85).filter(|&i| a.labels[i] == NOISE).collect();
    println!("outliers flagged as noise: {outliers:?}");
    Ok(())
}
