//! k-means under DTW with DTW barycenter averaging (DBA) centroids.

use rand::Rng as _;
use rayon::prelude::*;

use super::Assignment;
use crate::dataset::{Dataset, TimeSeries};
use crate::error::{Error, Result};
use crate::metrics::dtw::{dtw, dtw_path};
use crate::rng::{stream_rng, Rng, Stream};

/// Barycenter refinement passes per centroid update.
pub const DBA_ITERATIONS: usize = 10;

/// Band wide enough for two lengths to align at all.
fn fit_band(band: Option<usize>, a: usize, b: usize) -> Option<usize> {
    band.map(|w| w.max(a.abs_diff(b)))
}

/// Mean DTW over variables.
fn series_dtw(c: &TimeSeries, s: &TimeSeries, band: Option<usize>) -> Result<f64> {
    let mut total = 0.0;
    for (x, y) in c.rows().zip(s.rows()) {
        total += dtw(x, y, fit_band(band, x.len(), y.len()))?;
    }
    Ok(total / c.vars() as f64)
}

/// DBA passes on one variable of a centroid.
fn dba_row(center: &[f64], members: &[&[f64]], band: Option<usize>) -> Result<Vec<f64>> {
    let mut c = center.to_vec();
    for _ in 0..DBA_ITERATIONS {
        let mut sum = vec![0.0; c.len()];
        let mut count = vec![0usize; c.len()];
        for m in members {
            let (_, path) = dtw_path(&c, m, fit_band(band, c.len(), m.len()))?;
            for (i, j) in path {
                sum[i] += m[j];
                count[i] += 1;
            }
        }
        let next: Vec<f64> = sum
            .iter()
            .zip(&count)
            .zip(&c)
            .map(|((s, &n), &old)| if n > 0 { s / n as f64 } else { old })
            .collect();
        if next == c {
            break;
        }
        c = next;
    }
    Ok(c)
}

fn dba(center: &TimeSeries, members: &[&TimeSeries], band: Option<usize>) -> Result<TimeSeries> {
    let mut rows = Vec::with_capacity(center.vars());
    for v in 0..center.vars() {
        let m: Vec<&[f64]> = members.iter().map(|s| s.row(v)).collect();
        rows.push(dba_row(center.row(v), &m, band)?);
    }
    TimeSeries::from_rows(center.id, rows)
}

/// Picks `k` distinct members: the first uniformly, each next one with
/// probability proportional to its squared DTW to the closest pick.
fn seed_members(ds: &Dataset, k: usize, band: Option<usize>, rng: &mut Rng) -> Result<Vec<TimeSeries>> {
    let n = ds.len();
    let mut picked = vec![rng.gen_range(0..n)];
    let mut d2 = vec![f64::INFINITY; n];
    while picked.len() < k {
        let last = &ds.samples[*picked.last().expect("non-empty")];
        let dists: Vec<f64> = ds
            .samples
            .par_iter()
            .map(|s| series_dtw(last, s, band))
            .collect::<Result<_>>()?;
        for (d, new) in d2.iter_mut().zip(dists) {
            *d = d.min(new * new);
        }
        for &i in &picked {
            d2[i] = 0.0;
        }
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut idx = d2.iter().rposition(|&w| w > 0.0).expect("total > 0");
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && r < w {
                    idx = i;
                    break;
                }
                r -= w;
            }
            idx
        } else {
            // every remaining member duplicates a pick
            (0..n).find(|i| !picked.contains(i)).expect("k <= n")
        };
        picked.push(next);
    }
    Ok(picked.iter().map(|&i| ds.samples[i].clone()).collect())
}

/// k-means with DTW assignment and DBA centroids, initialized from `k`
/// distinct members chosen with k-means++ weighting under DTW. Multivariate series use the mean per-variable
/// DTW. `score` is the summed distance to the assigned centroids.
pub fn kmeans_dtw(
    ds: &Dataset,
    k: usize,
    seed: u64,
    max_iter: usize,
    band: Option<usize>,
) -> Result<Assignment> {
    let n = ds.len();
    if n == 0 {
        return Err(Error::EmptyDataset(ds.name.clone()));
    }
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k must be in 1..={n}, got {k}")));
    }
    let mut rng = stream_rng(seed, Stream::Clustering);
    let mut centers = seed_members(ds, k, band, &mut rng)?;

    let mut labels = vec![usize::MAX; n];
    let mut score;
    let mut iter = 0;
    loop {
        let nearest: Vec<(usize, f64)> = ds
            .samples
            .par_iter()
            .map(|s| {
                let mut best = (0, f64::INFINITY);
                for (j, c) in centers.iter().enumerate() {
                    let d = series_dtw(c, s, band)?;
                    if d < best.1 {
                        best = (j, d);
                    }
                }
                Ok(best)
            })
            .collect::<Result<_>>()?;
        let changed = nearest.iter().zip(&labels).any(|((j, _), l)| j != l);
        labels = nearest.iter().map(|(j, _)| *j).collect();
        score = nearest.iter().map(|(_, d)| d).sum::<f64>();
        if !changed || iter == max_iter {
            break;
        }
        iter += 1;

        let mut taken = vec![false; n];
        let updated: Vec<Option<TimeSeries>> = (0..k)
            .into_par_iter()
            .map(|j| {
                let members: Vec<&TimeSeries> = ds
                    .samples
                    .iter()
                    .zip(&labels)
                    .filter(|(_, &l)| l == j)
                    .map(|(s, _)| s)
                    .collect();
                if members.is_empty() {
                    Ok(None)
                } else {
                    dba(&centers[j], &members, band).map(Some)
                }
            })
            .collect::<Result<_>>()?;
        for (j, u) in updated.into_iter().enumerate() {
            centers[j] = match u {
                Some(c) => c,
                None => {
                    let far = (0..n)
                        .filter(|&i| !taken[i])
                        .max_by(|&a, &b| nearest[a].1.total_cmp(&nearest[b].1).then(b.cmp(&a)))
                        .expect("k <= n");
                    taken[far] = true;
                    ds.samples[far].clone()
                }
            };
        }
    }
    Ok(Assignment::new(
        labels.iter().map(|&l| l as i64).collect(),
        k,
        Some(score),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::clustering_accuracy;

    fn shifted_family() -> (Dataset, Vec<usize>) {
        let shapes: [fn(f64) -> f64; 3] = [
            |t| (t * std::f64::consts::TAU / 12.0).sin(),
            |t| {
                if (t as usize / 12).is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                }
            },
            |t| ((t as usize % 8) as f64) / 4.0 - 1.0,
        ];
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for (c, f) in shapes.iter().enumerate() {
            for shift in 0..3 {
                // classes sit at different levels so shifts within a class are
                // far cheaper to warp away than the gap between classes
                let v: Vec<f64> = (0..48)
                    .map(|t| f((t + 2 * shift) as f64) + 3.0 * c as f64)
                    .collect();
                samples.push(TimeSeries::univariate(samples.len(), v).unwrap());
                labels.push(c);
            }
        }
        let ds = Dataset::new("shifts", samples, Some(labels.clone())).unwrap();
        (ds, labels)
    }

    #[test]
    fn phase_shifted_classes() {
        let (ds, truth) = shifted_family();
        for seed in 0..5 {
            let a = kmeans_dtw(&ds, 3, seed, 50, None).unwrap();
            assert_eq!(clustering_accuracy(&a.labels, &truth).unwrap(), 1.0);
        }
        assert_eq!(
            kmeans_dtw(&ds, 3, 4, 50, None).unwrap(),
            kmeans_dtw(&ds, 3, 4, 50, None).unwrap()
        );
    }

    #[test]
    fn single_cluster() {
        let (ds, _) = shifted_family();
        let a = kmeans_dtw(&ds, 1, 0, 5, Some(3)).unwrap();
        assert!(a.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn barycenter_of_identical_series_is_that_series() {
        let s = [1.0, 3.0, 2.0, 0.0];
        let c = dba_row(&[0.0; 4], &[&s, &s], None).unwrap();
        assert_eq!(c, s.to_vec());
    }
}
