use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pipeline::{run_pipeline, PipelineConfig, RunReport};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Accuracy statistics over repeated runs of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub config: PipelineConfig,
    pub mean: f64,
    /// Sample standard deviation; zero for a single run.
    pub std: f64,
    pub runs: Vec<RunReport>,
}

impl BenchmarkResult {
    pub fn accuracies(&self) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.accuracy).collect()
    }
}

/// Standard deviation with the `n - 1` denominator; zero when `n < 2`.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Gain of a method over the better of the two baselines, in the units of
/// the inputs. Negative gains are reported as is.
pub fn improvement(candidate: f64, os: f64, ls: f64) -> f64 {
    candidate - os.max(ls)
}

/// Runs `cfg` `runs` times with seeds `cfg.seed + i`. Runs execute in
/// parallel; results are ordered by run index.
pub fn benchmark(ds: &Dataset, cfg: &PipelineConfig, runs: usize) -> Result<BenchmarkResult> {
    if runs == 0 {
        return Err(Error::Parameter("runs must be at least 1".into()));
    }
    if ds.labels.is_none() {
        return Err(Error::Label(format!(
            "{} has no labels to score against",
            ds.name
        )));
    }
    cfg.validate()?;
    let reports: Vec<RunReport> = (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let mut c = cfg.clone();
            c.seed = cfg.seed.wrapping_add(i);
            run_pipeline(ds, &c)
        })
        .collect::<Result<_>>()?;
    let acc: Vec<f64> = reports.iter().map(|r| r.accuracy.expect("labelled")).collect();
    Ok(BenchmarkResult {
        config: cfg.clone(),
        mean: acc.iter().sum::<f64>() / acc.len() as f64,
        std: sample_std(&acc),
        runs: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_generate, SynthSpec};
    use crate::evaluation::Pipeline;

    #[test]
    fn improvement_example() {
        assert!((improvement(66.7, 55.2, 55.0) - 11.5).abs() < 1e-9);
        assert!(improvement(50.0, 55.2, 53.0) < 0.0);
    }

    #[test]
    fn std_conventions() {
        assert_eq!(sample_std(&[0.7]), 0.0);
        assert!((sample_std(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn runs_are_reseeded_and_reproducible() {
        let ds = synth_generate(&SynthSpec::three_class_benchmark().with_size(8, 32), 1).unwrap();
        let cfg = PipelineConfig::new(Pipeline::Pr, 3).with_pivots(4).with_seed(10);
        let a = benchmark(&ds, &cfg, 3).unwrap();
        assert_eq!(a.runs.len(), 3);
        let seeds: Vec<u64> = a.runs.iter().map(|r| r.config.seed).collect();
        assert_eq!(seeds, vec![10, 11, 12]);
        let b = benchmark(&ds, &cfg, 3).unwrap();
        assert_eq!(a.accuracies(), b.accuracies());
        assert_eq!((a.mean, a.std), (b.mean, b.std));
        assert_eq!(benchmark(&ds, &cfg, 1).unwrap().std, 0.0);
    }
}
