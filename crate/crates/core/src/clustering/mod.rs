//! Clustering back-ends for raw series, projections and latent vectors.
//!
//! Point-based algorithms ([`kmeans`], [`spectral`], [`dbscan`]) take rows of
//! equal dimension. [`kmeans_dtw`] and [`kshape`] work on the series of a
//! [`Dataset`](crate::dataset::Dataset) directly. Every algorithm is
//! deterministic for a given input, seed and parameter set.

mod dba;
mod dbscan;
mod eigen;
mod kmeans;
mod kshape;
mod spectral;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use dba::{kmeans_dtw, DBA_ITERATIONS};
pub use dbscan::{dbscan, elbow, k_distance_curve, resolve_eps, Eps, DEFAULT_MIN_PTS};
pub use eigen::{jacobi_eigen, Eigen, SymmetricMatrix, MAX_SWEEPS, OFF_DIAGONAL_TOL};
pub use kmeans::{kmeans, kmeans_restarts, DEFAULT_MAX_ITER, DEFAULT_RESTARTS};
pub use kshape::{extract_shape, kshape};
pub use spectral::spectral;

use crate::error::{Error, Result};

/// Label of DBSCAN noise points.
pub const NOISE: i64 = -1;

/// Cluster labels for every sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// One label per sample, in `0..k` or [`NOISE`].
    pub labels: Vec<i64>,
    pub k: usize,
    /// Algorithm-specific objective: inertia for k-means, summed distance
    /// for the series-based methods, the radius used by DBSCAN.
    pub score: Option<f64>,
}

impl Assignment {
    pub fn new(labels: Vec<i64>, k: usize, score: Option<f64>) -> Self {
        debug_assert!(labels.iter().all(|&l| l == NOISE || (l >= 0 && (l as usize) < k)));
        Self { labels, k, score }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    /// `sample_id,cluster` rows. `ids` defaults to `0..N`.
    pub fn to_csv(&self, ids: Option<&[usize]>) -> String {
        let mut out = String::from("sample_id,cluster\n");
        for (i, l) in self.labels.iter().enumerate() {
            let id = ids.map_or(i, |ids| ids[i]);
            let _ = writeln!(out, "{id},{l}");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, ids: Option<&[usize]>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv(ids)).map_err(|e| Error::io(path, e))
    }
}

/// Non-empty, rectangular and finite.
pub(crate) fn check_points(points: &[Vec<f64>]) -> Result<()> {
    let first = points
        .first()
        .ok_or_else(|| Error::EmptyDataset("no points to cluster".into()))?;
    if first.is_empty() {
        return Err(Error::Shape("points have zero dimensions".into()));
    }
    for (i, p) in points.iter().enumerate() {
        if p.len() != first.len() {
            return Err(Error::Shape(format!(
                "point {i} has {} dimensions, expected {}",
                p.len(),
                first.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("point {i} has non-finite coordinates")));
        }
    }
    Ok(())
}
