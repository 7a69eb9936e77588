//! Symmetric storage and the cyclic Jacobi eigensolver.

use crate::error::{Error, Result};

/// Symmetric matrix stored as its packed upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    upper: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            upper: vec![0.0; n * (n + 1) / 2],
        }
    }

    /// Fills entry `(i, j)` for `i <= j` from `f(i, j)`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                upper.push(f(i, j));
            }
        }
        Self { n, upper }
    }

    /// Symmetric part of a dense row-major matrix.
    pub fn from_dense(n: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != n * n {
            return Err(Error::Shape(format!(
                "{} values for a {n}x{n} matrix",
                dense.len()
            )));
        }
        Ok(Self::from_fn(n, |i, j| {
            0.5 * (dense[i * n + j] + dense[j * n + i])
        }))
    }

    pub fn order(&self) -> usize {
        self.n
    }

    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + j
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index(i, j);
        self.upper[k] = v;
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = self.get(i, j);
            }
        }
        d
    }
}

/// Eigen-decomposition with eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector of `values[i]`.
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

pub const MAX_SWEEPS: usize = 100;
pub const OFF_DIAGONAL_TOL: f64 = 1e-10;

fn off_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops
/// below [`OFF_DIAGONAL_TOL`].
pub fn jacobi_eigen(m: &SymmetricMatrix) -> Result<Eigen> {
    let n = m.order();
    if m.upper.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let mut a = m.to_dense();
    // v is stored column-major: column k is eigenvector k
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let mut sweeps = 0;
    while off_norm(&a, n) >= OFF_DIAGONAL_TOL {
        if sweeps == MAX_SWEEPS {
            return Err(Error::Numerical(format!(
                "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps (off-diagonal norm {:e})",
                off_norm(&a, n)
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                // negligible against both diagonal entries: drop it
                if sweeps > 4
                    && app.abs() + 1e3 * apq.abs() == app.abs()
                    && aqq.abs() + 1e3 * apq.abs() == aqq.abs()
                {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    Ok(Eigen {
        values: order.iter().map(|&i| a[i * n + i]).collect(),
        vectors: order
            .iter()
            .map(|&col| (0..n).map(|r| v[r * n + col]).collect())
            .collect(),
        sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_and_diagonal() {
        let id = SymmetricMatrix::from_fn(4, |i, j| if i == j { 1.0 } else { 0.0 });
        let e = jacobi_eigen(&id).unwrap();
        assert_eq!(e.values, vec![1.0; 4]);

        let d = SymmetricMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 0) => 1.0,
            (1, 1) => 3.0,
            _ => 0.0,
        });
        let e = jacobi_eigen(&d).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert_eq!(e.vectors[0], vec![0.0, 1.0]);
        assert_eq!(e.vectors[1], vec![1.0, 0.0]);
    }

    #[test]
    fn non_finite_rejected() {
        let m = SymmetricMatrix::from_fn(2, |_, _| f64::NAN);
        assert!(matches!(jacobi_eigen(&m), Err(Error::Numerical(_))));
    }

    #[test]
    fn packed_indexing() {
        let mut m = SymmetricMatrix::zeros(3);
        m.set(2, 0, 5.0);
        assert_eq!(m.get(0, 2), 5.0);
        assert_eq!(m.to_dense()[2 * 3], 5.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn residuals_and_orthonormality(
            n in 1usize..12,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(seed);
            let m = SymmetricMatrix::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
            let e = jacobi_eigen(&m).unwrap();
            for w in e.values.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            for (lam, vec) in e.values.iter().zip(&e.vectors) {
                for i in 0..n {
                    let av: f64 = (0..n).map(|j| m.get(i, j) * vec[j]).sum();
                    prop_assert!((av - lam * vec[i]).abs() < 1e-8);
                }
            }
            for a in 0..n {
                for b in 0..n {
                    let dot: f64 = (0..n).map(|i| e.vectors[a][i] * e.vectors[b][i]).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((dot - want).abs() < 1e-8);
                }
            }
            // reconstruction V diag(l) V^T
            for i in 0..n {
                for j in 0..n {
                    let r: f64 = (0..n).map(|k| e.values[k] * e.vectors[k][i] * e.vectors[k][j]).sum();
                    prop_assert!((r - m.get(i, j)).abs() < 1e-8);
                }
            }
        }
    }
}
