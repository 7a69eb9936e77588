//! Normalized spectral clustering (Ng, Jordan and Weiss).

use rayon::prelude::*;

use super::eigen::{jacobi_eigen, SymmetricMatrix};
use super::kmeans::{kmeans, sq_dist, DEFAULT_MAX_ITER};
use super::{check_points, Assignment};
use crate::error::{Error, Result};

/// Pairwise squared Euclidean distances.
pub(crate) fn pairwise_sq(points: &[Vec<f64>]) -> SymmetricMatrix {
    let n = points.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| sq_dist(&points[i], &points[j])).collect())
        .collect();
    SymmetricMatrix::from_fn(n, |i, j| rows[i][j - i])
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Gaussian affinity with the median pairwise distance as bandwidth, the
/// top-`k` eigenvectors of `D^-1/2 A D^-1/2`, row normalization, then
/// k-means on the rows.
pub fn spectral(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Assignment> {
    check_points(points)?;
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k must be in 1..={n}, got {k}")));
    }
    if k == n {
        return Ok(Assignment::new((0..n as i64).collect(), k, None));
    }
    let d2 = pairwise_sq(points);
    let dists: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| d2.get(i, j).sqrt())
        .collect();
    if dists.iter().all(|&d| d == 0.0) {
        return Err(Error::DegenerateInput("all points are identical".into()));
    }
    let mut sigma = median(dists.clone());
    if sigma == 0.0 {
        // more than half the pairs coincide; fall back to the positive ones
        sigma = median(dists.into_iter().filter(|&d| d > 0.0).collect());
    }
    let denom = 2.0 * sigma * sigma;
    let affinity = SymmetricMatrix::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            (-d2.get(i, j) / denom).exp()
        }
    });
    let degree: Vec<f64> = (0..n).map(|i| (0..n).map(|j| affinity.get(i, j)).sum()).collect();
    let inv_sqrt: Vec<f64> = degree
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let normalized = SymmetricMatrix::from_fn(n, |i, j| inv_sqrt[i] * affinity.get(i, j) * inv_sqrt[j]);
    let eig = jacobi_eigen(&normalized)?;
    let embedding: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row: Vec<f64> = eig.vectors[..k].iter().map(|v| v[i]).collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter().map(|v| v / norm).collect()
            } else {
                row
            }
        })
        .collect();
    let mut a = kmeans(&embedding, k, seed, DEFAULT_MAX_ITER)?;
    a.score = None;
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::clustering_accuracy;

    fn three_blobs() -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (c, (cx, cy, spread, m)) in [(0.0, 0.0, 0.2, 30), (8.0, 1.0, 0.6, 15), (2.0, 9.0, 0.4, 25)]
            .into_iter()
            .enumerate()
        {
            for i in 0..m {
                let a = i as f64 * 2.4;
                let r = spread * ((i % 5) as f64 + 1.0) / 5.0;
                pts.push(vec![cx + r * a.cos(), cy + r * a.sin()]);
                truth.push(c);
            }
        }
        (pts, truth)
    }

    #[test]
    fn unequal_blobs() {
        let (pts, truth) = three_blobs();
        let s = spectral(&pts, 3, 1).unwrap();
        assert_eq!(clustering_accuracy(&s.labels, &truth).unwrap(), 1.0);
        assert_eq!(s, spectral(&pts, 3, 1).unwrap());
    }

    #[test]
    fn far_blobs_match_kmeans() {
        let pts: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let o = if i < 10 { 0.0 } else { 50.0 };
                vec![o + (i % 5) as f64 * 0.1, o - (i % 3) as f64 * 0.1]
            })
            .collect();
        let s = spectral(&pts, 2, 3).unwrap();
        let km = kmeans(&pts, 2, 3, 300).unwrap();
        let as_truth: Vec<usize> = km.labels.iter().map(|&l| l as usize).collect();
        assert_eq!(clustering_accuracy(&s.labels, &as_truth).unwrap(), 1.0);
    }

    #[test]
    fn identical_points_are_degenerate() {
        let pts = vec![vec![1.0, 1.0]; 5];
        assert!(matches!(spectral(&pts, 2, 0), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn k_equals_n() {
        let (pts, _) = three_blobs();
        let a = spectral(&pts, pts.len(), 0).unwrap();
        assert_eq!(a.k, pts.len());
    }
}
