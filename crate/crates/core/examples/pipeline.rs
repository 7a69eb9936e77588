//! One run of each pipeline on the synthetic benchmark.
//!
//! cargo run --release --example pipeline

use tempoproj::dataset::{synth_generate, SynthSpec};
use tempoproj::evaluation::{run_pipeline, Pipeline, PipelineConfig};

fn main() -> tempoproj::Result<()> {
    let ds = synth_generate(&SynthSpec::three_class_benchmark(), 7)?;
    for pipeline in [Pipeline::Os, Pipeline::Ls, Pipeline::Pr, Pipeline::PrLs] {
        let cfg = PipelineConfig::new(pipeline, 3).with_seed(7).with_epochs(50);
        let r = run_pipeline(&ds, &cfg)?;
        println!(
            "{:<6} accuracy {:.3}  project {:.2}s train {:.2}s cluster {:.2}s",
            pipeline.display_name(),
            r.accuracy.unwrap(),
            r.times.project,
            r.times.train,
            r.times.cluster
        );
    }
    Ok(())
}
