//! Dynamic time warping with squared local cost and the symmetric
//! `(1,0) (0,1) (1,1)` step pattern, optionally restricted to a Sakoe-Chiba
//! band `|i - j| <= band`.

use crate::error::{Error, Result};

fn check(x: &[f64], y: &[f64], band: Option<usize>) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Shape("dtw of an empty sequence".into()));
    }
    if let Some(b) = band {
        let gap = x.len().abs_diff(y.len());
        if b < gap {
            return Err(Error::Parameter(format!(
                "band {b} is narrower than the length difference {gap}; no alignment path exists"
            )));
        }
    }
    Ok(())
}

fn window(i: usize, n: usize, band: Option<usize>) -> (usize, usize) {
    match band {
        Some(b) => (i.saturating_sub(b), (i + b).min(n - 1)),
        None => (0, n - 1),
    }
}

/// Minimum accumulated squared difference over monotone alignments.
pub fn dtw(x: &[f64], y: &[f64], band: Option<usize>) -> Result<f64> {
    check(x, y, band)?;
    let n = y.len();
    let mut prev = vec![f64::INFINITY; n];
    let mut cur = vec![f64::INFINITY; n];
    for (i, &a) in x.iter().enumerate() {
        let (lo, hi) = window(i, n, band);
        cur.iter_mut().for_each(|c| *c = f64::INFINITY);
        for j in lo..=hi {
            let cost = (a - y[j]) * (a - y[j]);
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let up = prev[j];
                let left = if j > 0 { cur[j - 1] } else { f64::INFINITY };
                let diag = if j > 0 { prev[j - 1] } else { f64::INFINITY };
                up.min(left).min(diag)
            };
            cur[j] = cost + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[n - 1])
}

/// DTW cost and an optimal warping path as `(i, j)` index pairs from
/// `(0, 0)` to `(|x|-1, |y|-1)`. Ties prefer the diagonal step.
pub fn dtw_path(x: &[f64], y: &[f64], band: Option<usize>) -> Result<(f64, Vec<(usize, usize)>)> {
    check(x, y, band)?;
    let (m, n) = (x.len(), y.len());
    let mut acc = vec![f64::INFINITY; m * n];
    for i in 0..m {
        let (lo, hi) = window(i, n, band);
        for j in lo..=hi {
            let cost = (x[i] - y[j]) * (x[i] - y[j]);
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let up = if i > 0 {
                    acc[(i - 1) * n + j]
                } else {
                    f64::INFINITY
                };
                let left = if j > 0 { acc[i * n + j - 1] } else { f64::INFINITY };
                let diag = if i > 0 && j > 0 {
                    acc[(i - 1) * n + j - 1]
                } else {
                    f64::INFINITY
                };
                up.min(left).min(diag)
            };
            acc[i * n + j] = cost + best;
        }
    }
    let mut path = vec![(m - 1, n - 1)];
    let (mut i, mut j) = (m - 1, n - 1);
    while i > 0 || j > 0 {
        let step = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = acc[(i - 1) * n + j - 1];
            let up = acc[(i - 1) * n + j];
            let left = acc[i * n + j - 1];
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        (i, j) = step;
        path.push(step);
    }
    path.reverse();
    Ok((acc[m * n - 1], path))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Enumerates every monotone path with the three-step pattern.
    fn brute_force(x: &[f64], y: &[f64]) -> f64 {
        fn go(x: &[f64], y: &[f64], i: usize, j: usize) -> f64 {
            let c = (x[i] - y[j]).powi(2);
            if i + 1 == x.len() && j + 1 == y.len() {
                return c;
            }
            let mut best = f64::INFINITY;
            if i + 1 < x.len() {
                best = best.min(go(x, y, i + 1, j));
            }
            if j + 1 < y.len() {
                best = best.min(go(x, y, i, j + 1));
            }
            if i + 1 < x.len() && j + 1 < y.len() {
                best = best.min(go(x, y, i + 1, j + 1));
            }
            c + best
        }
        go(x, y, 0, 0)
    }

    #[test]
    fn hand_examples() {
        assert_eq!(dtw(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], None).unwrap(), 0.0);
        assert_eq!(brute_force(&[0.0, 1.0], &[0.0, 0.0, 1.0]), 0.0);
        assert_eq!(dtw(&[0.0, 1.0], &[0.0, 0.0, 1.0], None).unwrap(), 0.0);
        assert_eq!(brute_force(&[0.0, 0.0], &[1.0, 1.0]), 2.0);
        assert_eq!(dtw(&[0.0, 0.0], &[1.0, 1.0], None).unwrap(), 2.0);
    }

    #[test]
    fn matches_brute_force_on_small_inputs() {
        let xs = [
            vec![0.3, -1.2, 2.0, 0.1],
            vec![1.0, 1.5, -0.5],
            vec![2.0, 0.0, 0.0, 1.0, -1.0],
        ];
        for x in &xs {
            for y in &xs {
                let fast = dtw(x, y, None).unwrap();
                assert!((fast - brute_force(x, y)).abs() < 1e-12);
                let (cost, path) = dtw_path(x, y, None).unwrap();
                assert!((cost - fast).abs() < 1e-12);
                let along: f64 = path.iter().map(|&(i, j)| (x[i] - y[j]).powi(2)).sum();
                assert!((along - cost).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_band_is_squared_euclidean() {
        let x = [1.0, 2.0, 4.0];
        let y = [0.0, 2.0, 2.0];
        assert_eq!(dtw(&x, &y, Some(0)).unwrap(), 5.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(dtw(&[], &[1.0], None), Err(Error::Shape(_))));
        assert!(matches!(
            dtw(&[1.0], &[1.0, 2.0, 3.0], Some(1)),
            Err(Error::Parameter(_))
        ));
    }
}
