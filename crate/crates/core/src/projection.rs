//! Pivot projections: each sample is replaced by its per-variable distances
//! to `p` pivot samples drawn from the dataset, giving an `N x p x W` tensor.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{sample_distance, MetricKind};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PivotSet {
    indices: Vec<usize>,
    pub seed: u64,
}

impl PivotSet {
    /// Explicit pivots; indices must be distinct.
    pub fn from_indices(indices: Vec<usize>, seed: u64) -> Result<Self> {
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Parameter("pivot indices must be distinct".into()));
        }
        if indices.is_empty() {
            return Err(Error::Parameter("need at least one pivot".into()));
        }
        Ok(Self { indices, seed })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Draws `p` distinct pivots uniformly without replacement. Indices are
/// returned in ascending order.
pub fn select_pivots(ds: &Dataset, p: usize, seed: u64) -> Result<PivotSet> {
    let n = ds.len();
    if p == 0 || p > n {
        return Err(Error::Parameter(format!(
            "pivot count must be in 1..={n}, got {p}"
        )));
    }
    let mut rng = stream_rng(seed, Stream::Pivots);
    let mut indices = index::sample(&mut rng, n, p).into_vec();
    indices.sort_unstable();
    Ok(PivotSet { indices, seed })
}

/// The projected dataset: `values[(i * p + j) * w + v]` is the distance of
/// variable `v` of sample `i` to the same variable of pivot `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    values: Vec<f64>,
    n: usize,
    p: usize,
    w: usize,
    pub metric: MetricKind,
    pub pivot_set: PivotSet,
}

impl ProjectionMatrix {
    pub fn from_parts(
        values: Vec<f64>,
        n: usize,
        w: usize,
        metric: MetricKind,
        pivot_set: PivotSet,
    ) -> Result<Self> {
        let p = pivot_set.len();
        if values.len() != n * p * w {
            return Err(Error::Shape(format!(
                "projection needs {n}x{p}x{w} values, got {}",
                values.len()
            )));
        }
        Ok(Self {
            values,
            n,
            p,
            w,
            metric,
            pivot_set,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Distance vector (length `W`) of sample `i` to pivot `j`.
    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.p + j) * self.w;
        &self.values[start..start + self.w]
    }

    /// The `p x W` block of sample `i`, row-major.
    pub fn block(&self, i: usize) -> &[f64] {
        let len = self.p * self.w;
        &self.values[i * len..(i + 1) * len]
    }

    /// One flattened `p * W` feature row per sample.
    pub fn features(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.block(i).to_vec()).collect()
    }
}

/// Fills the `N x p x W` distance tensor. Cells are computed in parallel.
pub fn gen_proj_space(ds: &Dataset, pivots: &PivotSet, metric: MetricKind) -> Result<ProjectionMatrix> {
    let n = ds.len();
    if let Some(&bad) = pivots.indices().iter().find(|&&i| i >= n) {
        return Err(Error::Parameter(format!(
            "pivot index {bad} out of range for {n} samples"
        )));
    }
    if pivots.len() > n {
        return Err(Error::Parameter(format!(
            "{} pivots for {n} samples",
            pivots.len()
        )));
    }
    if metric == MetricKind::Euclidean {
        let t0 = ds.samples[0].len();
        if let Some(bad) = ds.samples.iter().find(|s| s.len() != t0) {
            return Err(Error::Shape(format!(
                "euclidean projection needs equal lengths: sample {} has {} timesteps, sample {} has {t0}",
                bad.id,
                bad.len(),
                ds.samples[0].id
            )));
        }
    }
    let p = pivots.len();
    let w = ds.vars();
    let rows: Vec<Vec<f64>> = ds
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, sample)| {
            let mut row = Vec::with_capacity(p * w);
            for &pj in pivots.indices() {
                if pj == i {
                    row.extend(std::iter::repeat_n(0.0, w));
                    continue;
                }
                let d = sample_distance(sample, &ds.samples[pj], metric)
                    .map_err(|e| with_context(e, &format!("sample {i} vs pivot sample {pj}")))?;
                row.extend(d);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let values = rows.into_iter().flatten().collect();
    ProjectionMatrix::from_parts(values, n, w, metric, pivots.clone())
}

fn with_context(e: Error, ctx: &str) -> Error {
    match e {
        Error::Shape(m) => Error::Shape(format!("{ctx}: {m}")),
        Error::DegenerateInput(m) => Error::DegenerateInput(format!("{ctx}: {m}")),
        Error::Parameter(m) => Error::Parameter(format!("{ctx}: {m}")),
        other => other,
    }
}

/// Scales each sample's `p x W` block to unit Euclidean norm. All-zero
/// blocks stay zero.
pub fn normalize_projection(pm: &ProjectionMatrix) -> ProjectionMatrix {
    let len = pm.p * pm.w;
    let mut values = pm.values.clone();
    for block in values.chunks_mut(len) {
        let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            block.iter_mut().for_each(|v| *v /= norm);
        }
    }
    ProjectionMatrix { values, ..pm.clone() }
}

/// Applies the metric's default preprocessing: SBD projections are computed
/// on z-normalized samples, the others on raw samples. `znormalize`
/// overrides the default.
pub fn prepare_for_metric(ds: &Dataset, metric: MetricKind, znormalize: Option<bool>) -> Dataset {
    let z = znormalize.unwrap_or(metric == MetricKind::Sbd);
    if z {
        ds.znormalized()
    } else {
        ds.clone()
    }
}

const CACHE_MAGIC: &[u8; 8] = b"TPPROJ\0\0";
const CACHE_VERSION: u32 = 1;
const NO_BAND: u64 = u64::MAX;

/// Cache file name for a projection of a dataset with the given fingerprint.
pub fn cache_file_name(fingerprint: &str, metric: MetricKind, p: usize, seed: u64) -> String {
    let band = metric
        .dtw_band()
        .map_or_else(|| "none".to_string(), |b| b.to_string());
    format!("proj-{fingerprint}-{}-b{band}-p{p}-s{seed}.bin", metric.name())
}

/// Binary cache layout, all integers little-endian:
/// magic (8 bytes) | version u32 | N u64 | p u64 | W u64 | metric tag u8 |
/// dtw band u64 (`u64::MAX` = none) | seed u64 | p pivot indices u64 |
/// N*p*W f64 values, row-major.
pub fn write_projection(path: impl AsRef<Path>, pm: &ProjectionMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(64 + pm.values.len() * 8);
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    for v in [pm.n as u64, pm.p as u64, pm.w as u64] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.push(pm.metric.tag());
    let band = pm.metric.dtw_band().map_or(NO_BAND, |b| b as u64);
    buf.extend_from_slice(&band.to_le_bytes());
    buf.extend_from_slice(&pm.pivot_set.seed.to_le_bytes());
    for &i in pm.pivot_set.indices() {
        buf.extend_from_slice(&(i as u64).to_le_bytes());
    }
    for v in &pm.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format {
                line: 0,
                message: "projection cache is truncated".into(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_projection(path: impl AsRef<Path>) -> Result<ProjectionMatrix> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    let bad = |message: &str| Error::Format {
        line: 0,
        message: message.to_string(),
    };
    if c.take(8)? != CACHE_MAGIC {
        return Err(bad("not a projection cache file"));
    }
    let version = u32::from_le_bytes(c.take(4)?.try_into().unwrap());
    if version != CACHE_VERSION {
        return Err(bad(&format!("unsupported cache version {version}")));
    }
    let n = c.u64()? as usize;
    let p = c.u64()? as usize;
    let w = c.u64()? as usize;
    let tag = c.take(1)?[0];
    let band = c.u64()?;
    let seed = c.u64()?;
    let metric = match tag {
        0 => MetricKind::Euclidean,
        1 => MetricKind::Dtw {
            band: (band != NO_BAND).then_some(band as usize),
        },
        2 => MetricKind::Sbd,
        t => return Err(bad(&format!("unknown metric tag {t}"))),
    };
    let indices = (0..p)
        .map(|_| c.u64().map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let bytes = c.take(n * p * w * 8)?;
    let values = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if c.pos != buf.len() {
        return Err(bad("trailing bytes after projection values"));
    }
    ProjectionMatrix::from_parts(values, n, w, metric, PivotSet::from_indices(indices, seed)?)
}

/// Loads the projection from `cache_dir` if present, otherwise computes and
/// stores it. Returns the matrix and whether it came from the cache.
pub fn load_or_compute(
    cache_dir: impl AsRef<Path>,
    ds: &Dataset,
    p: usize,
    seed: u64,
    metric: MetricKind,
) -> Result<(ProjectionMatrix, bool, PathBuf)> {
    let path = cache_dir
        .as_ref()
        .join(cache_file_name(&ds.fingerprint(), metric, p, seed));
    if path.exists() {
        if let Ok(pm) = read_projection(&path) {
            if pm.n() == ds.len() && pm.p() == p && pm.metric == metric {
                return Ok((pm, true, path));
            }
        }
    }
    let pivots = select_pivots(ds, p, seed)?;
    let pm = gen_proj_space(ds, &pivots, metric)?;
    write_projection(&path, &pm)?;
    Ok((pm, false, path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_generate, SynthSpec, TimeSeries};

    fn scalar_ds(values: &[f64]) -> Dataset {
        let samples = values
            .iter()
            .enumerate()
            .map(|(i, &v)| TimeSeries::new(i, 1, 1, vec![v]).unwrap())
            .collect();
        Dataset::new("scalars", samples, None).unwrap()
    }

    #[test]
    fn hand_computed_euclidean_projection() {
        let ds = scalar_ds(&[0.0, 3.0, 4.0]);
        let pivots = PivotSet::from_indices(vec![0, 1], 0).unwrap();
        let pm = gen_proj_space(&ds, &pivots, MetricKind::Euclidean).unwrap();
        assert_eq!(pm.values(), &[0.0, 3.0, 3.0, 0.0, 4.0, 1.0]);
        assert_eq!(pm.features()[2], vec![4.0, 1.0]);
    }

    #[test]
    fn pivot_selection() {
        let ds = synth_generate(&SynthSpec::three_class_benchmark().with_size(20, 16), 1).unwrap();
        let ds = Dataset::new("d", ds.samples[..50].to_vec(), None).unwrap();
        let a = select_pivots(&ds, 16, 3).unwrap();
        assert_eq!(a, select_pivots(&ds, 16, 3).unwrap());
        assert_eq!(a.len(), 16);
        let mut uniq = a.indices().to_vec();
        uniq.dedup();
        assert_eq!(uniq.len(), 16);
        assert!(a.indices().iter().all(|&i| i < 50));
        assert_ne!(a, select_pivots(&ds, 16, 4).unwrap());

        let all = select_pivots(&ds, 50, 9).unwrap();
        assert_eq!(all.indices(), (0..50).collect::<Vec<_>>().as_slice());
        assert!(matches!(select_pivots(&ds, 0, 1), Err(Error::Parameter(_))));
        assert!(matches!(select_pivots(&ds, 51, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn sbd_projection_invariants() {
        let ds = synth_generate(&SynthSpec::three_class_benchmark().with_size(2, 32), 5).unwrap();
        let ds = Dataset::new("five", ds.samples[..5].to_vec(), None).unwrap();
        let pivots = select_pivots(&ds, 3, 2).unwrap();
        let pm = gen_proj_space(&ds, &pivots, MetricKind::Sbd).unwrap();
        assert!(pm.values().iter().all(|v| (0.0..=2.0).contains(v)));
        for (j, &pj) in pivots.indices().iter().enumerate() {
            assert_eq!(pm.get(pj, j), &[0.0]);
        }
        for i in 0..5 {
            for (j, &pj) in pivots.indices().iter().enumerate() {
                let d = sample_distance(&ds.samples[i], &ds.samples[pj], MetricKind::Sbd).unwrap();
                assert_eq!(pm.get(i, j), d.as_slice());
            }
        }
    }

    #[test]
    fn euclidean_rejects_ragged_lengths() {
        let a = TimeSeries::univariate(0, vec![1.0, 2.0]).unwrap();
        let b = TimeSeries::univariate(1, vec![1.0, 2.0, 3.0]).unwrap();
        let ds = Dataset::new("r", vec![a, b], None).unwrap();
        let pivots = PivotSet::from_indices(vec![0], 0).unwrap();
        let err = gen_proj_space(&ds, &pivots, MetricKind::Euclidean).unwrap_err();
        assert!(
            matches!(err, Error::Shape(ref m) if m.contains("sample 1")),
            "{err}"
        );
        // elastic metrics accept unequal lengths
        assert!(gen_proj_space(&ds, &pivots, MetricKind::Dtw { band: None }).is_ok());
    }

    #[test]
    fn normalize_blocks() {
        let pivots = PivotSet::from_indices(vec![0, 1], 0).unwrap();
        let pm = ProjectionMatrix::from_parts(vec![3.0, 4.0, 0.0, 0.0], 2, 1, MetricKind::Euclidean, pivots)
            .unwrap();
        let once = normalize_projection(&pm);
        assert_eq!(once.values(), &[0.6, 0.8, 0.0, 0.0]);
        let twice = normalize_projection(&once);
        for (a, b) in once.values().iter().zip(twice.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cache_roundtrip_and_reuse() {
        let dir = tempfile::tempdir().unwrap();
        let ds = synth_generate(&SynthSpec::three_class_benchmark().with_size(4, 16), 3).unwrap();
        let metric = MetricKind::Dtw { band: Some(3) };
        let (pm, cached, path) = load_or_compute(dir.path(), &ds, 4, 11, metric).unwrap();
        assert!(!cached);
        assert_eq!(read_projection(&path).unwrap(), pm);
        let (again, cached, _) = load_or_compute(dir.path(), &ds, 4, 11, metric).unwrap();
        assert!(cached);
        assert_eq!(again, pm);

        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], CACHE_MAGIC);
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(read_projection(&path).is_err());
    }
}
