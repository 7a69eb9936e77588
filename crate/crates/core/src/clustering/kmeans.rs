use rand::Rng as _;

use super::{check_points, Assignment};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Rng, Stream};

pub const DEFAULT_MAX_ITER: usize = 300;
/// Independent k-means++ starts; the lowest final inertia wins.
pub const DEFAULT_RESTARTS: usize = 10;

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance from the closest chosen center.
pub(crate) fn kmeans_pp(points: &[Vec<f64>], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = vec![points[rng.gen_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    idx = i;
                    break;
                }
                r -= w;
            }
            // guard against landing on a zero-weight tail through rounding
            if d2[idx] == 0.0 {
                idx = d2.iter().rposition(|&w| w > 0.0).expect("total > 0");
            }
            idx
        } else {
            rng.gen_range(0..n)
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    centers
}

pub(crate) struct Lloyd {
    pub labels: Vec<usize>,
    pub inertia_trace: Vec<f64>,
}

/// Lloyd iterations from the given centers until labels stop changing.
pub(crate) fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>, max_iter: usize) -> Lloyd {
    let n = points.len();
    let k = centers.len();
    let d = points[0].len();
    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        let mut inertia = 0.0;
        let mut dist = vec![0.0; n];
        for (i, p) in points.iter().enumerate() {
            let (j, dd) = nearest(p, &centers);
            changed |= labels[i] != j;
            labels[i] = j;
            dist[i] = dd;
            inertia += dd;
        }
        trace.push(inertia);
        if !changed || iterations == max_iter {
            break;
        }
        iterations += 1;

        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        let mut taken = vec![false; n];
        for j in 0..k {
            if counts[j] > 0 {
                let c = counts[j] as f64;
                centers[j] = sums[j].iter().map(|s| s / c).collect();
            } else {
                // re-seed from the point currently worst served
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                    .expect("k <= n");
                taken[far] = true;
                centers[j] = points[far].clone();
            }
        }
    }
    Lloyd {
        labels,
        inertia_trace: trace,
    }
}

/// Euclidean k-means with k-means++ seeding and [`DEFAULT_RESTARTS`]
/// restarts. `score` is the final inertia.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<Assignment> {
    kmeans_restarts(points, k, seed, max_iter, DEFAULT_RESTARTS)
}

/// [`kmeans`] with an explicit number of starts, all drawn from one seeded
/// stream. Ties keep the earliest start.
pub fn kmeans_restarts(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iter: usize,
    restarts: usize,
) -> Result<Assignment> {
    check_points(points)?;
    if restarts == 0 {
        return Err(Error::Parameter("restarts must be at least 1".into()));
    }
    if k == 0 || k > points.len() {
        return Err(Error::Parameter(format!(
            "k must be in 1..={}, got {k}",
            points.len()
        )));
    }
    let mut rng = stream_rng(seed, Stream::Clustering);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..restarts {
        let centers = kmeans_pp(points, k, &mut rng);
        let run = lloyd(points, centers, max_iter);
        let inertia = *run.inertia_trace.last().expect("one pass");
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, run.labels));
        }
    }
    let (inertia, labels) = best.expect("restarts >= 1");
    Ok(Assignment::new(
        labels.iter().map(|&l| l as i64).collect(),
        k,
        Some(inertia),
    ))
}
