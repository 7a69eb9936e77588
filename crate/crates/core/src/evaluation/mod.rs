//! Accuracy under the best label matching, the four pipelines and
//! multi-run benchmarks.

mod benchmark;
mod pipeline;

pub use benchmark::{benchmark, improvement, sample_std, BenchmarkResult};
pub(crate) use pipeline::raw_images;
pub use pipeline::{run_pipeline, Algorithm, Pipeline, PipelineConfig, RunReport, StageTimes};

use crate::clustering::NOISE;
use crate::error::{Error, Result};

/// Minimum-cost assignment of rows to columns of a square matrix, using
/// the O(n^3) shortest augmenting path method with potentials. Returns
/// `assignment[row] = column` and the total cost.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<(Vec<usize>, f64)> {
    let n = cost.len();
    if let Some(r) = cost.iter().position(|r| r.len() != n) {
        return Err(Error::Shape(format!(
            "cost matrix must be square: row {r} has {} columns, expected {n}",
            cost[r].len()
        )));
    }
    if cost.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("cost matrix has non-finite entries".into()));
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    // 1-based arrays; index 0 is the virtual start column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[matched_row[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
    Ok((assignment, total))
}

/// Fraction of samples whose cluster maps to their class under the best
/// one-to-one matching. The contingency table is zero-padded to square, so
/// surplus clusters or classes match nothing. Noise labels ([`NOISE`]) are
/// always counted as wrong.
pub fn clustering_accuracy(pred: &[i64], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::EmptyDataset("no labels to score".into()));
    }
    if let Some(bad) = pred.iter().find(|&&l| l < 0 && l != NOISE) {
        return Err(Error::Label(format!("invalid cluster label {bad}")));
    }
    let mut clusters: Vec<i64> = pred.iter().copied().filter(|&l| l != NOISE).collect();
    clusters.sort_unstable();
    clusters.dedup();
    let classes = truth.iter().max().map_or(0, |m| m + 1);
    let size = clusters.len().max(classes);
    if size == 0 {
        return Ok(0.0);
    }
    let mut table = vec![vec![0.0; size]; size];
    for (&p, &t) in pred.iter().zip(truth) {
        if p == NOISE {
            continue;
        }
        let row = clusters.binary_search(&p).expect("collected above");
        table[row][t] += 1.0;
    }
    let cost: Vec<Vec<f64>> = table.iter().map(|r| r.iter().map(|c| -c).collect()).collect();
    let (_, total) = hungarian(&cost)?;
    Ok(-total / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        fn rec(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == cost.len() {
                *best = best.min(acc);
                return;
            }
            for c in 0..cost.len() {
                if !used[c] {
                    used[c] = true;
                    rec(cost, row + 1, used, acc + cost[row][c], best);
                    used[c] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
        best
    }

    #[test]
    fn hungarian_examples() {
        let id: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        assert_eq!(hungarian(&id).unwrap(), (vec![0, 1, 2, 3], 0.0));
        let m = vec![vec![4.0, 1.0], vec![2.0, 0.0]];
        assert_eq!(hungarian(&m).unwrap(), (vec![1, 0], 3.0));
        assert!(matches!(hungarian(&[vec![1.0, 2.0]]), Err(Error::Shape(_))));
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(clustering_accuracy(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap(), 0.5);
        assert_eq!(clustering_accuracy(&[2, 0, 1], &[2, 0, 1]).unwrap(), 1.0);
        assert!(matches!(clustering_accuracy(&[0], &[0, 1]), Err(Error::Shape(_))));
    }

    #[test]
    fn noise_is_never_correct() {
        // a spare class exists, but noise still cannot be matched to it
        assert_eq!(
            clustering_accuracy(&[0, 0, NOISE, NOISE], &[0, 0, 1, 1]).unwrap(),
            0.5
        );
        assert_eq!(clustering_accuracy(&[NOISE, NOISE], &[0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn more_clusters_than_classes() {
        assert_eq!(clustering_accuracy(&[0, 1, 2, 3], &[0, 0, 1, 1]).unwrap(), 0.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn hungarian_matches_brute_force(
            n in 1usize..7,
            vals in prop::collection::vec(0u32..50, 49),
        ) {
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| vals[i * 7 + j] as f64).collect())
                .collect();
            let (perm, total) = hungarian(&cost).unwrap();
            let mut seen = perm.clone();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(total, brute_force(&cost));
        }

        #[test]
        fn accuracy_is_relabeling_invariant(
            pred in prop::collection::vec(0i64..4, 1..40),
            truth_seed in prop::collection::vec(0usize..3, 40),
            shift in 1i64..4,
        ) {
            let truth = &truth_seed[..pred.len()];
            let a = clustering_accuracy(&pred, truth).unwrap();
            let relabeled: Vec<i64> = pred.iter().map(|l| (l + shift) % 4).collect();
            prop_assert_eq!(a, clustering_accuracy(&relabeled, truth).unwrap());
            let truth_perm: Vec<usize> = truth.iter().map(|t| (t + 1) % 3).collect();
            prop_assert_eq!(a, clustering_accuracy(&pred, &truth_perm).unwrap());
            let self_truth: Vec<usize> = pred.iter().map(|&l| l as usize).collect();
            prop_assert_eq!(clustering_accuracy(&pred, &self_truth).unwrap(), 1.0);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
