//! Density-based clustering.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::spectral::pairwise_sq;
use super::{check_points, Assignment, NOISE};
use crate::error::{Error, Result};

pub const DEFAULT_MIN_PTS: usize = 4;

/// Neighborhood radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Eps {
    Auto,
    Value(f64),
}

impl fmt::Display for Eps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Eps::Auto => f.write_str("auto"),
            Eps::Value(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Eps {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Eps::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v >= 0.0 => Ok(Eps::Value(v)),
            _ => Err(Error::Config(format!(
                "eps must be 'auto' or a non-negative number, got {s:?}"
            ))),
        }
    }
}

/// Sorted distances from each point to its `min_pts`-th nearest neighbor,
/// the point itself counting as the first.
pub fn k_distance_curve(points: &[Vec<f64>], min_pts: usize) -> Vec<f64> {
    let n = points.len();
    if min_pts == 0 || min_pts > n {
        return Vec::new();
    }
    let d2 = pairwise_sq(points);
    let mut curve: Vec<f64> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| d2.get(i, j)).collect();
            row.sort_by(f64::total_cmp);
            row[min_pts - 1].sqrt()
        })
        .collect();
    curve.sort_by(f64::total_cmp);
    curve
}

/// Knee of an ascending curve: the point farthest from the chord joining
/// its ends, after scaling both axes to `[0, 1]`.
pub fn elbow(curve: &[f64]) -> Option<f64> {
    let n = curve.len();
    let (&first, &last) = (curve.first()?, curve.last()?);
    if n < 3 || last <= first {
        return Some(last);
    }
    let span = last - first;
    let mut best = (0.0, last);
    for (i, &y) in curve.iter().enumerate() {
        let x = i as f64 / (n - 1) as f64;
        let yn = (y - first) / span;
        // chord is y = x; distance is proportional to x - y for a convex curve
        let d = (x - yn).abs();
        if d > best.0 {
            best = (d, y);
        }
    }
    Some(best.1)
}

/// Resolves [`Eps::Auto`] with [`elbow`] of the k-distance curve.
pub fn resolve_eps(points: &[Vec<f64>], eps: Eps, min_pts: usize) -> f64 {
    match eps {
        Eps::Value(v) => v,
        Eps::Auto => elbow(&k_distance_curve(points, min_pts)).unwrap_or(0.0),
    }
}

/// DBSCAN. Core points within `eps` of each other form clusters; a border
/// point joins the cluster of its nearest core neighbor, which makes the
/// partition independent of input order. Noise is labelled `-1`.
pub fn dbscan(points: &[Vec<f64>], eps: Eps, min_pts: usize) -> Result<Assignment> {
    check_points(points)?;
    if min_pts == 0 {
        return Err(Error::Parameter("min_pts must be at least 1".into()));
    }
    let n = points.len();
    let eps = resolve_eps(points, eps, min_pts);
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::Parameter(format!("invalid eps {eps}")));
    }
    let d2 = pairwise_sq(points);
    let within = |i: usize, j: usize| d2.get(i, j).sqrt() <= eps;
    let core: Vec<bool> = (0..n)
        .map(|i| (0..n).filter(|&j| within(i, j)).count() >= min_pts)
        .collect();

    let mut labels = vec![NOISE; n];
    let mut next = 0i64;
    for start in 0..n {
        if !core[start] || labels[start] != NOISE {
            continue;
        }
        labels[start] = next;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if core[j] && labels[j] == NOISE && within(i, j) {
                    labels[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    for i in 0..n {
        if core[i] {
            continue;
        }
        let nearest_core = (0..n)
            .filter(|&j| core[j] && within(i, j))
            .min_by(|&a, &b| d2.get(i, a).total_cmp(&d2.get(i, b)));
        if let Some(j) = nearest_core {
            labels[i] = labels[j];
        }
    }
    Ok(Assignment::new(labels, next as usize, Some(eps)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob_and_outliers() -> Vec<Vec<f64>> {
        let mut pts: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i % 5) as f64 * 0.1, (i / 5) as f64 * 0.1])
            .collect();
        pts.push(vec![50.0, 50.0]);
        pts.push(vec![-40.0, 10.0]);
        pts.push(vec![10.0, -60.0]);
        pts
    }

    #[test]
    fn blob_plus_noise() {
        let a = dbscan(&blob_and_outliers(), Eps::Value(0.3), 4).unwrap();
        assert_eq!(a.k, 1);
        assert_eq!(a.labels.iter().filter(|&&l| l == NOISE).count(), 3);
        assert!(a.labels[..20].iter().all(|&l| l == 0));
    }

    #[test]
    fn auto_eps_finds_the_blob() {
        let a = dbscan(&blob_and_outliers(), Eps::Auto, 4).unwrap();
        assert_eq!(a.k, 1);
        assert_eq!(&a.labels[20..], &[NOISE; 3]);
    }

    #[test]
    fn extreme_eps() {
        let pts = blob_and_outliers();
        let zero = dbscan(&pts, Eps::Value(0.0), 4).unwrap();
        assert!(zero.labels.iter().all(|&l| l == NOISE));
        let inf = dbscan(&pts, Eps::Value(f64::INFINITY), 4).unwrap();
        assert!(inf.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn order_independent() {
        let pts = blob_and_outliers();
        let mut perm: Vec<usize> = (0..pts.len()).collect();
        perm.reverse();
        perm.swap(3, 11);
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let a = dbscan(&pts, Eps::Auto, 4).unwrap();
        let b = dbscan(&shuffled, Eps::Auto, 4).unwrap();
        // b[r] corresponds to a[perm[r]]: compare co-membership of every pair
        let n = pts.len();
        for r in 0..n {
            for q in 0..n {
                let same_a = a.labels[perm[r]] != NOISE && a.labels[perm[r]] == a.labels[perm[q]];
                let same_b = b.labels[r] != NOISE && b.labels[r] == b.labels[q];
                assert_eq!(same_a, same_b);
            }
            assert_eq!(a.labels[perm[r]] == NOISE, b.labels[r] == NOISE);
        }
    }

    #[test]
    fn elbow_of_hockey_stick() {
        let curve = [0.1, 0.1, 0.11, 0.12, 0.12, 0.13, 5.0, 9.0];
        assert_eq!(elbow(&curve), Some(0.13));
    }

    #[test]
    fn eps_parsing() {
        assert_eq!("auto".parse::<Eps>().unwrap(), Eps::Auto);
        assert_eq!("0.5".parse::<Eps>().unwrap(), Eps::Value(0.5));
        assert!("-1".parse::<Eps>().is_err());
    }
}
