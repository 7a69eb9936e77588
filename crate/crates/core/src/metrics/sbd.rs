//! Cross-correlation over all lags and the shape-based distance built on it.

use super::fft::{rfft_padded, FftPlan};
use crate::error::{Error, Result};

/// Cross-correlation of two sequences at all `2m - 1` lags.
///
/// Entry `w` holds lag `s = w - (m - 1)`:
/// `CC(s) = sum_l x[l + s] * y[l]` over indices inside both (zero-padded)
/// sequences. The zero-lag entry is the plain inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCorrelationSequence {
    values: Vec<f64>,
    m: usize,
}

impl CrossCorrelationSequence {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Aligned length both inputs were padded to.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at_lag(&self, lag: isize) -> f64 {
        self.values[(lag + self.m as isize - 1) as usize]
    }

    pub fn zero_lag(&self) -> f64 {
        self.at_lag(0)
    }

    /// Lag of the largest entry; the first one wins ties.
    pub fn argmax_lag(&self) -> isize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best as isize - (self.m as isize - 1)
    }
}

fn fft_size(m: usize) -> usize {
    (2 * m - 1).next_power_of_two()
}

/// FFT-based cross-correlation in `O(m log m)`. The shorter input is
/// zero-padded to `m = max(|x|, |y|)`.
pub fn cross_correlate(x: &[f64], y: &[f64]) -> Result<CrossCorrelationSequence> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Shape("cross-correlation of an empty sequence".into()));
    }
    let m = x.len().max(y.len());
    let n = fft_size(m);
    let plan = FftPlan::new(n);
    let fx = rfft_padded(&plan, x);
    let fy = rfft_padded(&plan, y);
    let mut prod: Vec<_> = fx.iter().zip(&fy).map(|(a, b)| *a * b.conj()).collect();
    plan.inverse(&mut prod);
    let mut values = Vec::with_capacity(2 * m - 1);
    values.extend(prod[n - (m - 1)..].iter().map(|c| c.re));
    values.extend(prod[..m].iter().map(|c| c.re));
    Ok(CrossCorrelationSequence { values, m })
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn check_nonzero(x: &[f64], which: &str) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Shape(format!("{which} sequence is empty")));
    }
    if x.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateInput(format!(
            "{which} sequence is all zeros; its autocorrelation vanishes"
        )));
    }
    Ok(())
}

/// Coefficient-normalized cross-correlation: `CC / sqrt(R0(x,x) R0(y,y))`.
pub fn ncc(x: &[f64], y: &[f64]) -> Result<CrossCorrelationSequence> {
    check_nonzero(x, "first")?;
    check_nonzero(y, "second")?;
    let mut cc = cross_correlate(x, y)?;
    let denom = (energy(x) * energy(y)).sqrt();
    for v in &mut cc.values {
        *v /= denom;
    }
    Ok(cc)
}

/// Shape-based distance `1 - max_w NCC_w(x, y)`, in `[0, 2]`.
pub fn sbd(x: &[f64], y: &[f64]) -> Result<f64> {
    let cc = ncc(x, y)?;
    if x == y {
        return Ok(0.0);
    }
    let best = cc.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((1.0 - best).clamp(0.0, 2.0))
}

/// SBD together with `y` shifted onto `x` at the best lag (zero-filled,
/// length `max(|x|, |y|)`).
pub fn sbd_align(x: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>)> {
    let cc = ncc(x, y)?;
    let lag = cc.argmax_lag();
    let dist = (1.0 - cc.at_lag(lag)).clamp(0.0, 2.0);
    let m = cc.m();
    // CC(s) pairs x[l + s] with y[l], so y moves right by s.
    let mut aligned = vec![0.0; m];
    for (l, &v) in y.iter().enumerate() {
        let t = l as isize + lag;
        if t >= 0 && (t as usize) < m {
            aligned[t as usize] = v;
        }
    }
    Ok((dist, aligned))
}

/// Reusable spectrum of one sequence for repeated SBD queries against it.
#[derive(Debug, Clone)]
pub struct SbdReference {
    plan: FftPlan,
    spectrum: Vec<super::fft::Complex>,
    m: usize,
    ref_len: usize,
    norm: f64,
}

impl SbdReference {
    /// `m` is the aligned length every query will be padded to; it must be at
    /// least the length of `x` and of every query.
    pub fn new(x: &[f64], m: usize) -> Result<Self> {
        check_nonzero(x, "reference")?;
        assert!(m >= x.len());
        let plan = FftPlan::new(fft_size(m));
        let spectrum = rfft_padded(&plan, x);
        Ok(Self {
            plan,
            spectrum,
            m,
            ref_len: x.len(),
            norm: energy(x).sqrt(),
        })
    }

    /// `sbd(reference, y)`.
    pub fn distance(&self, y: &[f64]) -> Result<f64> {
        check_nonzero(y, "query")?;
        if y.len() > self.m {
            return Err(Error::Shape(format!(
                "query of length {} exceeds aligned length {}",
                y.len(),
                self.m
            )));
        }
        let fy = rfft_padded(&self.plan, y);
        let mut prod: Vec<_> = self
            .spectrum
            .iter()
            .zip(&fy)
            .map(|(a, b)| *a * b.conj())
            .collect();
        self.plan.inverse(&mut prod);
        let n = self.plan.len();
        // same lag window as the pairwise computation
        let m = self.ref_len.max(y.len());
        let best = prod[n - (m - 1)..]
            .iter()
            .chain(&prod[..m])
            .map(|c| c.re)
            .fold(f64::NEG_INFINITY, f64::max);
        let denom = self.norm * energy(y).sqrt();
        Ok((1.0 - best / denom).clamp(0.0, 2.0))
    }
}
