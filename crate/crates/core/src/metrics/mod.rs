//! Time-series distances: Euclidean, DTW and the FFT-accelerated
//! shape-based distance (SBD).

pub mod dtw;
pub mod fft;
pub mod sbd;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::TimeSeries;
use crate::error::{Error, Result};

pub use dtw::{dtw, dtw_path};
pub use sbd::{cross_correlate, sbd, sbd_align, CrossCorrelationSequence, SbdReference};

/// Which scalar distance is applied per variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "lowercase")]
pub enum MetricKind {
    Euclidean,
    /// `band` is the Sakoe-Chiba radius; `None` is unconstrained.
    Dtw {
        band: Option<usize>,
    },
    Sbd,
}

impl MetricKind {
    pub const fn tag(&self) -> u8 {
        match self {
            MetricKind::Euclidean => 0,
            MetricKind::Dtw { .. } => 1,
            MetricKind::Sbd => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Euclidean => "euclidean",
            MetricKind::Dtw { .. } => "dtw",
            MetricKind::Sbd => "sbd",
        }
    }

    pub fn dtw_band(&self) -> Option<usize> {
        match self {
            MetricKind::Dtw { band } => *band,
            _ => None,
        }
    }

    /// Distance between two single-variable rows.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            MetricKind::Euclidean => euclidean(x, y),
            MetricKind::Dtw { band } => dtw(x, y, *band),
            MetricKind::Sbd => sbd(x, y),
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricKind::Dtw { band: Some(b) } => write!(f, "dtw(band={b})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" | "euc" => Ok(MetricKind::Euclidean),
            "dtw" => Ok(MetricKind::Dtw { band: None }),
            "sbd" => Ok(MetricKind::Sbd),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

pub fn euclidean(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "euclidean distance needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Per-variable distance vector of length `W = V`.
pub fn sample_distance(a: &TimeSeries, b: &TimeSeries, kind: MetricKind) -> Result<Vec<f64>> {
    if a.vars() != b.vars() {
        return Err(Error::Shape(format!(
            "samples {} and {} have {} and {} variables",
            a.id,
            b.id,
            a.vars(),
            b.vars()
        )));
    }
    a.rows().zip(b.rows()).map(|(x, y)| kind.distance(x, y)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn euclidean_examples() {
        assert_eq!(euclidean(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(euclidean(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        let d = euclidean(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(euclidean(&[1.0], &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn sample_distance_is_per_variable() {
        let a = TimeSeries::from_rows(0, vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![3.0, 3.0]]).unwrap();
        let b = TimeSeries::from_rows(1, vec![vec![3.0, 4.0], vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let d = sample_distance(&a, &b, MetricKind::Euclidean).unwrap();
        assert_eq!(d, vec![5.0, 0.0, 1.0]);
        assert_eq!(
            sample_distance(&a, &a, MetricKind::Dtw { band: None }).unwrap(),
            vec![0.0; 3]
        );
        let u = TimeSeries::univariate(2, vec![1.0, 2.0, 0.5]).unwrap();
        assert_eq!(sample_distance(&u, &u, MetricKind::Sbd).unwrap().len(), 1);
        assert!(matches!(
            sample_distance(&a, &u, MetricKind::Sbd),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn metric_parsing() {
        assert_eq!("sbd".parse::<MetricKind>().unwrap(), MetricKind::Sbd);
        assert_eq!("dtw".parse::<MetricKind>().unwrap().dtw_band(), None);
        assert!("edr".parse::<MetricKind>().is_err());
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..48).prop_flat_map(|n| {
            (
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(-5.0f64..5.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn symmetry_and_identity((x, y) in pair()) {
            for kind in [MetricKind::Euclidean, MetricKind::Dtw { band: None }, MetricKind::Sbd] {
                let xy = kind.distance(&x, &y).unwrap();
                let yx = kind.distance(&y, &x).unwrap();
                prop_assert!((xy - yx).abs() < 1e-9);
                prop_assert!(kind.distance(&x, &x).unwrap().abs() < 1e-9);
            }
            let s = sbd(&x, &y).unwrap();
            prop_assert!((-1e-9..=2.0 + 1e-9).contains(&s));
        }

        #[test]
        fn wide_band_equals_unbanded((x, y) in pair(), extra in 0usize..5) {
            let band = x.len().max(y.len()) + extra;
            prop_assert_eq!(dtw(&x, &y, Some(band)).unwrap(), dtw(&x, &y, None).unwrap());
        }

        #[test]
        fn sbd_positive_scale_invariant(x in prop::collection::vec(-5.0f64..5.0, 2..64), alpha in 0.01f64..100.0) {
            prop_assume!(x.iter().any(|v| v.abs() > 1e-3));
            let scaled: Vec<f64> = x.iter().map(|v| v * alpha).collect();
            prop_assert!(sbd(&x, &scaled).unwrap() < 1e-9);
        }
    }
}
