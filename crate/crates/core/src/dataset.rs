//! Labeled time-series datasets: UCR flat files, multivariate CSV
//! directories, z-normalization and a seeded synthetic generator.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// One sample: `vars` rows (variables) by `len` columns (timesteps), stored
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub id: usize,
    vars: usize,
    len: usize,
    values: Vec<f64>,
}

impl TimeSeries {
    /// Builds a series from per-variable rows. All rows must have the same
    /// length and every value must be finite.
    pub fn from_rows(id: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let vars = rows.len();
        if vars == 0 {
            return Err(Error::Shape(format!("sample {id} has no variables")));
        }
        let len = rows[0].len();
        if rows.iter().any(|r| r.len() != len) {
            return Err(Error::Shape(format!(
                "sample {id} has variables of different lengths"
            )));
        }
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        Self::new(id, vars, len, values)
    }

    pub fn univariate(id: usize, values: Vec<f64>) -> Result<Self> {
        let len = values.len();
        Self::new(id, 1, len, values)
    }

    pub fn new(id: usize, vars: usize, len: usize, values: Vec<f64>) -> Result<Self> {
        if vars == 0 || len == 0 {
            return Err(Error::Shape(format!(
                "sample {id} must have at least one variable and one timestep"
            )));
        }
        if values.len() != vars * len {
            return Err(Error::Shape(format!(
                "sample {id}: expected {} values for {vars}x{len}, got {}",
                vars * len,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format {
                line: 0,
                message: format!("sample {id} has a non-finite value at position {pos}"),
            });
        }
        Ok(Self {
            id,
            vars,
            len,
            values,
        })
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn row(&self, var: usize) -> &[f64] {
        &self.values[var * self.len..(var + 1) * self.len]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.len)
    }

    /// Row-major `vars * len` values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Applies `f` to every value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> TimeSeries {
        TimeSeries {
            id: self.id,
            vars: self.vars,
            len: self.len,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub samples: Vec<TimeSeries>,
    pub labels: Option<Vec<usize>>,
    pub k_hint: Option<usize>,
}

impl Dataset {
    /// Checks the shared-variable-count and label invariants.
    pub fn new(
        name: impl Into<String>,
        samples: Vec<TimeSeries>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let name = name.into();
        if samples.is_empty() {
            return Err(Error::EmptyDataset(name));
        }
        let vars = samples[0].vars();
        if let Some(bad) = samples.iter().find(|s| s.vars() != vars) {
            return Err(Error::Shape(format!(
                "sample {} has {} variables, expected {vars}",
                bad.id,
                bad.vars()
            )));
        }
        let k_hint = match &labels {
            Some(l) => {
                if l.len() != samples.len() {
                    return Err(Error::Label(format!(
                        "{} labels for {} samples",
                        l.len(),
                        samples.len()
                    )));
                }
                let k = l.iter().max().map_or(0, |m| m + 1);
                let mut seen = vec![false; k];
                for &c in l {
                    seen[c] = true;
                }
                if seen.iter().any(|s| !s) {
                    return Err(Error::Label("label ids are not contiguous from 0".into()));
                }
                Some(k)
            }
            None => None,
        };
        Ok(Self {
            name,
            samples,
            labels,
            k_hint,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn vars(&self) -> usize {
        self.samples[0].vars()
    }

    /// Common series length, or `None` when lengths differ.
    pub fn equal_length(&self) -> Option<usize> {
        let t = self.samples[0].len();
        self.samples.iter().all(|s| s.len() == t).then_some(t)
    }

    pub fn znormalized(&self) -> Dataset {
        Dataset {
            name: self.name.clone(),
            samples: self.samples.iter().map(znormalize).collect(),
            labels: self.labels.clone(),
            k_hint: self.k_hint,
        }
    }

    /// Applies `f` to every sample, keeping labels.
    pub fn map_samples(&self, f: impl Fn(&TimeSeries) -> TimeSeries) -> Dataset {
        Dataset {
            name: self.name.clone(),
            samples: self.samples.iter().map(f).collect(),
            labels: self.labels.clone(),
            k_hint: self.k_hint,
        }
    }

    /// Content hash over shapes and exact value bits, used as a cache key.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.samples.len() as u64).to_le_bytes());
        for s in &self.samples {
            h.update((s.vars() as u64).to_le_bytes());
            h.update((s.len() as u64).to_le_bytes());
            for v in s.values() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        let digest = h.finalize();
        let mut out = String::with_capacity(32);
        for b in &digest[..16] {
            let _ = write!(out, "{b:02x}");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Delimiter {
    #[default]
    Auto,
    Comma,
    Tab,
    /// Runs of spaces; older archive releases used this layout.
    Whitespace,
}

impl FromStr for Delimiter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Delimiter::Auto),
            "comma" | "csv" => Ok(Delimiter::Comma),
            "tab" | "tsv" => Ok(Delimiter::Tab),
            "whitespace" | "space" => Ok(Delimiter::Whitespace),
            other => Err(Error::Config(format!("unknown delimiter {other:?}"))),
        }
    }
}

impl Delimiter {
    fn detect(first_line: &str) -> Delimiter {
        if first_line.contains('\t') {
            Delimiter::Tab
        } else if first_line.contains(',') {
            Delimiter::Comma
        } else {
            Delimiter::Whitespace
        }
    }

    fn split<'a>(self, line: &'a str) -> Box<dyn Iterator<Item = &'a str> + 'a> {
        match self {
            Delimiter::Comma => Box::new(line.split(',').map(str::trim)),
            Delimiter::Tab => Box::new(line.split('\t').map(str::trim)),
            Delimiter::Whitespace | Delimiter::Auto => Box::new(line.split_whitespace()),
        }
    }
}

fn parse_cell(token: &str, line: usize) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        token: token.to_string(),
    })?;
    if !v.is_finite() {
        return Err(Error::Format {
            line,
            message: format!("non-finite value {token:?}"),
        });
    }
    Ok(v)
}

/// Maps raw class tokens to dense ids `0..k`. Numeric tokens are ordered
/// numerically, anything else lexicographically.
fn remap_labels(raw: &[String]) -> Vec<usize> {
    let numeric: Option<Vec<f64>> = raw.iter().map(|s| s.parse::<f64>().ok()).collect();
    let mut distinct: Vec<&String> = raw.iter().collect();
    match &numeric {
        Some(nums) => {
            let mut pairs: Vec<(f64, &String)> = nums.iter().copied().zip(raw.iter()).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            pairs.dedup_by(|a, b| a.0 == b.0);
            let ids: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            nums.iter()
                .map(|v| ids.iter().position(|x| x == v).unwrap())
                .collect()
        }
        None => {
            distinct.sort();
            distinct.dedup();
            let ids: HashMap<&String, usize> =
                distinct.into_iter().enumerate().map(|(i, s)| (s, i)).collect();
            raw.iter().map(|s| ids[s]).collect()
        }
    }
}

/// Loads a UCR-archive flat file: one univariate sample per line, class label
/// first.
pub fn load_ucr(path: impl AsRef<Path>, delimiter: Delimiter) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_ucr(&text, delimiter, &name)
}

pub fn parse_ucr(text: &str, delimiter: Delimiter, name: &str) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();
    let Some(&(_, first)) = lines.peek() else {
        return Err(Error::EmptyDataset(name.to_string()));
    };
    let delim = match delimiter {
        Delimiter::Auto => Delimiter::detect(first),
        d => d,
    };

    let mut raw_labels = Vec::new();
    let mut samples = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in lines {
        let mut cells = delim.split(line);
        let label = cells.next().unwrap_or_default().to_string();
        let values = cells
            .map(|c| parse_cell(c, lineno))
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Format {
                    line: lineno,
                    message: format!("expected {w} values, found {}", values.len()),
                })
            }
            _ => {}
        }
        if values.len() < 2 {
            return Err(Error::Format {
                line: lineno,
                message: "a sample needs at least two timesteps".into(),
            });
        }
        let id = samples.len();
        samples.push(TimeSeries::univariate(id, values).map_err(|e| match e {
            Error::Format { message, .. } => Error::Format {
                line: lineno,
                message,
            },
            other => other,
        })?);
        raw_labels.push(label);
    }
    let labels = remap_labels(&raw_labels);
    Dataset::new(name, samples, Some(labels))
}

fn format_f64(v: f64) -> String {
    // `Display` for f64 prints the shortest string that parses back to the
    // same bits.
    format!("{v}")
}

/// Writes a univariate labeled dataset in UCR layout (comma-separated).
pub fn save_ucr(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if ds.vars() != 1 {
        return Err(Error::Unsupported(
            "UCR flat files hold univariate series only".into(),
        ));
    }
    let mut out = String::new();
    for (i, s) in ds.samples.iter().enumerate() {
        let label = ds.labels.as_ref().map_or(0, |l| l[i]);
        out.push_str(&label.to_string());
        for v in s.values() {
            out.push(',');
            out.push_str(&format_f64(*v));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub const LABELS_FILE: &str = "labels.csv";

/// Loads a directory with one CSV per sample (rows are variables, columns
/// timesteps) and a `labels.csv` of `filename,label` rows.
pub fn load_multivariate(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let labels_path = dir.join(LABELS_FILE);
    let labels_text = fs::read_to_string(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
    let mut label_of: BTreeMap<String, String> = BTreeMap::new();
    for (i, line) in labels_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((file, label)) = line.split_once(',') else {
            return Err(Error::Format {
                line: i + 1,
                message: format!("{LABELS_FILE} rows must be `filename,label`"),
            });
        };
        let (file, label) = (file.trim(), label.trim());
        if i == 0 && file == "filename" && label == "label" {
            continue;
        }
        label_of.insert(file.to_string(), label.to_string());
    }

    let mut files: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv") && n != LABELS_FILE)
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyDataset(dir.display().to_string()));
    }

    let mut samples = Vec::with_capacity(files.len());
    let mut raw_labels = Vec::with_capacity(files.len());
    for (id, file) in files.iter().enumerate() {
        let label = label_of
            .get(file)
            .ok_or_else(|| Error::Label(format!("no entry for {file} in {LABELS_FILE}")))?;
        let path = dir.join(file);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let delim = Delimiter::detect(line);
            let row = delim
                .split(line)
                .map(|c| parse_cell(c, i + 1))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        let ts = TimeSeries::from_rows(id, rows).map_err(|e| Error::Shape(format!("{file}: {e}")))?;
        if let Some(first) = samples.first() {
            let first: &TimeSeries = first;
            if first.vars() != ts.vars() {
                return Err(Error::Shape(format!(
                    "{file} has {} variables but {} has {}",
                    ts.vars(),
                    files[0],
                    first.vars()
                )));
            }
        }
        samples.push(ts);
        raw_labels.push(label.clone());
    }
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(name, samples, Some(remap_labels(&raw_labels)))
}

/// Writes the directory layout read by [`load_multivariate`].
pub fn save_multivariate(ds: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let width = ds.len().to_string().len();
    let mut labels = String::from("filename,label\n");
    for (i, s) in ds.samples.iter().enumerate() {
        let file = format!("sample_{i:0width$}.csv");
        let mut body = String::new();
        for row in s.rows() {
            let line: Vec<String> = row.iter().map(|v| format_f64(*v)).collect();
            body.push_str(&line.join(","));
            body.push('\n');
        }
        let path = dir.join(&file);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        let label = ds.labels.as_ref().map_or(0, |l| l[i]);
        let _ = writeln!(labels, "{file},{label}");
    }
    let path = dir.join(LABELS_FILE);
    fs::write(&path, labels).map_err(|e| Error::io(&path, e))
}

/// Z-normalizes one row with the population standard deviation. Constant
/// rows become all zeros.
pub fn znormalize_row(row: &[f64]) -> Vec<f64> {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std <= f64::EPSILON * mean.abs().max(1.0) {
        return vec![0.0; row.len()];
    }
    row.iter().map(|v| (v - mean) / std).collect()
}

/// Per-variable z-normalization.
pub fn znormalize(ts: &TimeSeries) -> TimeSeries {
    let values = ts.rows().flat_map(znormalize_row).collect();
    TimeSeries {
        id: ts.id,
        vars: ts.vars,
        len: ts.len,
        values,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Waveform {
    Sine,
    Square,
    Trend,
}

impl FromStr for Waveform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine" => Ok(Waveform::Sine),
            "square" => Ok(Waveform::Square),
            "trend" => Ok(Waveform::Trend),
            other => Err(Error::Config(format!("unknown waveform {other:?}"))),
        }
    }
}

fn default_cycles() -> f64 {
    5.0
}

/// One class of the synthetic generator.
///
/// `phase_jitter` is a fraction of one cycle: every sample is shifted by a
/// phase drawn uniformly from `[-phase_jitter, phase_jitter]` cycles. For
/// `trend` the same shift moves the ramp along the time axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub waveform: Waveform,
    pub noise_std: f64,
    pub phase_jitter: f64,
    #[serde(default = "default_cycles")]
    pub cycles: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: Vec<ClassSpec>,
    pub n_per_class: usize,
    pub length: usize,
}

impl SynthSpec {
    /// Parses the JSON generator document. Unknown waveforms and malformed
    /// documents are configuration errors.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SynthSpec = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::Config("generator needs at least one class".into()));
        }
        if self.n_per_class < 1 {
            return Err(Error::Config("n_per_class must be at least 1".into()));
        }
        if self.length < 8 {
            return Err(Error::Config("length must be at least 8".into()));
        }
        for c in &self.classes {
            if !(c.noise_std >= 0.0 && c.phase_jitter >= 0.0 && c.cycles > 0.0) {
                return Err(Error::Config(format!("invalid class parameters {c:?}")));
            }
        }
        Ok(())
    }

    /// Sine, square and trend classes with noise 0.1 and phases spread over a
    /// whole cycle; 100 samples per class of length 128.
    pub fn three_class_benchmark() -> Self {
        let class = |waveform| ClassSpec {
            waveform,
            noise_std: 0.1,
            phase_jitter: 0.5,
            cycles: default_cycles(),
        };
        SynthSpec {
            classes: vec![
                class(Waveform::Sine),
                class(Waveform::Square),
                class(Waveform::Trend),
            ],
            n_per_class: 100,
            length: 128,
        }
    }

    pub fn with_size(mut self, n_per_class: usize, length: usize) -> Self {
        self.n_per_class = n_per_class;
        self.length = length;
        self
    }
}

fn waveform_value(w: Waveform, cycles: f64, x: f64, shift: f64) -> f64 {
    let phase = std::f64::consts::TAU * (cycles * x + shift);
    match w {
        Waveform::Sine => phase.sin(),
        Waveform::Square => {
            if phase.sin() >= 0.0 {
                1.0
            } else {
                -1.0
            }
        }
        Waveform::Trend => 2.0 * (x + shift / cycles) - 1.0,
    }
}

/// Generates `n_per_class` samples per class, in class blocks.
pub fn synth_generate(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = stream_rng(seed, Stream::Synth);
    let mut samples = Vec::with_capacity(spec.classes.len() * spec.n_per_class);
    let mut labels = Vec::with_capacity(samples.capacity());
    for (class_id, class) in spec.classes.iter().enumerate() {
        let noise =
            Normal::new(0.0, class.noise_std).map_err(|e| Error::Config(format!("noise_std: {e}")))?;
        for _ in 0..spec.n_per_class {
            let shift = if class.phase_jitter > 0.0 {
                rng.gen_range(-class.phase_jitter..=class.phase_jitter)
            } else {
                0.0
            };
            let values = (0..spec.length)
                .map(|t| {
                    let x = t as f64 / spec.length as f64;
                    let clean = waveform_value(class.waveform, class.cycles, x, shift);
                    if class.noise_std > 0.0 {
                        clean + noise.sample(&mut rng)
                    } else {
                        clean
                    }
                })
                .collect();
            samples.push(TimeSeries::univariate(samples.len(), values)?);
            labels.push(class_id);
        }
    }
    Dataset::new("synthetic", samples, Some(labels))
}
