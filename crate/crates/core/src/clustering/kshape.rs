//! k-shape: SBD assignment with eigenvector shape extraction.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use super::eigen::{jacobi_eigen, SymmetricMatrix};
use super::Assignment;
use crate::dataset::{znormalize_row, Dataset};
use crate::error::{Error, Result};
use crate::metrics::sbd::{sbd, sbd_align};
use crate::rng::{stream_rng, Stream};

/// SBD that treats an all-zero side as uncorrelated instead of failing.
fn sbd_or_one(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.iter().all(|v| *v == 0.0) || y.iter().all(|v| *v == 0.0) {
        return Ok(1.0);
    }
    sbd(x, y)
}

/// Shape that maximizes the summed squared correlation with the members
/// after aligning them to `reference`.
pub fn extract_shape(members: &[&[f64]], reference: &[f64]) -> Result<Vec<f64>> {
    let m = reference.len();
    let zero_ref = reference.iter().all(|v| *v == 0.0);
    let mut aligned = Vec::with_capacity(members.len());
    for x in members {
        let a = if zero_ref || x.iter().all(|v| *v == 0.0) {
            x.to_vec()
        } else {
            sbd_align(reference, x)?.1
        };
        aligned.push(znormalize_row(&a));
    }
    // S = X^T X, M = Q S Q with Q = I - 11^T / m
    let mut s = vec![0.0; m * m];
    for a in &aligned {
        for i in 0..m {
            if a[i] == 0.0 {
                continue;
            }
            for j in 0..m {
                s[i * m + j] += a[i] * a[j];
            }
        }
    }
    let row_mean: Vec<f64> = (0..m)
        .map(|i| s[i * m..(i + 1) * m].iter().sum::<f64>() / m as f64)
        .collect();
    let total_mean = row_mean.iter().sum::<f64>() / m as f64;
    // S is symmetric, so column means equal row means
    let centered = SymmetricMatrix::from_fn(m, |i, j| s[i * m + j] - row_mean[i] - row_mean[j] + total_mean);
    let eig = jacobi_eigen(&centered)?;
    let mut c = eig.vectors[0].clone();
    let (mut plus, mut minus) = (0.0, 0.0);
    for a in &aligned {
        for (x, v) in a.iter().zip(&c) {
            plus += (x - v) * (x - v);
            minus += (x + v) * (x + v);
        }
    }
    if minus < plus {
        c.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(znormalize_row(&c))
}

/// k-shape clustering of univariate equal-length series. Inputs are
/// z-normalized first; `score` is the summed SBD to assigned centroids.
pub fn kshape(ds: &Dataset, k: usize, seed: u64, max_iter: usize) -> Result<Assignment> {
    let n = ds.len();
    if ds.vars() != 1 {
        return Err(Error::Unsupported(format!(
            "k-shape handles univariate series only, got {} variables",
            ds.vars()
        )));
    }
    let m = ds
        .equal_length()
        .ok_or_else(|| Error::Unsupported("k-shape needs equal-length series".into()))?;
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k must be in 1..={n}, got {k}")));
    }
    let series: Vec<Vec<f64>> = ds.samples.iter().map(|s| znormalize_row(s.row(0))).collect();

    // random initial partition with every cluster non-empty
    let mut rng = stream_rng(seed, Stream::Clustering);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut labels = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        labels[i] = if r < k { r } else { rng.gen_range(0..k) };
    }
    let mut centers = vec![vec![0.0; m]; k];
    let mut score = 0.0;
    let mut dist = vec![0.0f64; n];
    for _ in 0..max_iter.max(1) {
        let mut taken = vec![false; n];
        let updated: Vec<Option<Vec<f64>>> = (0..k)
            .into_par_iter()
            .map(|j| {
                let members: Vec<&[f64]> = series
                    .iter()
                    .zip(&labels)
                    .filter(|(_, &l)| l == j)
                    .map(|(s, _)| s.as_slice())
                    .collect();
                if members.is_empty() {
                    Ok(None)
                } else {
                    extract_shape(&members, &centers[j]).map(Some)
                }
            })
            .collect::<Result<_>>()?;
        for (j, u) in updated.into_iter().enumerate() {
            centers[j] = match u {
                Some(c) => c,
                None => {
                    let far = (0..n)
                        .filter(|&i| !taken[i])
                        .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                        .expect("k <= n");
                    taken[far] = true;
                    series[far].clone()
                }
            };
        }
        let nearest: Vec<(usize, f64)> = series
            .par_iter()
            .map(|s| {
                let mut best = (0, f64::INFINITY);
                for (j, c) in centers.iter().enumerate() {
                    let d = sbd_or_one(c, s)?;
                    if d < best.1 {
                        best = (j, d);
                    }
                }
                Ok(best)
            })
            .collect::<Result<_>>()?;
        let changed = nearest.iter().zip(&labels).any(|((j, _), l)| j != l);
        labels = nearest.iter().map(|(j, _)| *j).collect();
        dist = nearest.iter().map(|(_, d)| *d).collect();
        score = dist.iter().sum();
        if !changed {
            break;
        }
    }
    Ok(Assignment::new(
        labels.iter().map(|&l| l as i64).collect(),
        k,
        Some(score),
    ))
}
