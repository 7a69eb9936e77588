//! Repeated runs with mean and standard deviation, plus the improvement
//! over the better baseline.
//!
//! cargo run --release --example benchmark

use tempoproj::dataset::{synth_generate, SynthSpec};
use tempoproj::evaluation::{benchmark, improvement, Algorithm, Pipeline, PipelineConfig};

fn main() -> tempoproj::Result<()> {
    let ds = synth_generate(&SynthSpec::three_class_benchmark(), 0)?;
    let runs = 5;
    let mut means = Vec::new();
    for pipeline in [Pipeline::Os, Pipeline::Ls, Pipeline::Pr] {
        let cfg = PipelineConfig::new(pipeline, 3)
            .with_algorithm(Algorithm::Kmeans)
            .with_epochs(50);
        let r = benchmark(&ds, &cfg, runs)?;
        println!(
            "{:<4} {:.3} ± {:.3}  {:?}",
            pipeline.display_name(),
            r.mean,
            r.std,
            r.accuracies()
        );
        means.push(r.mean);
    }
    println!("Pr improvement {:+.3}", improvement(means[2], means[0], means[1]));
    Ok(())
}
