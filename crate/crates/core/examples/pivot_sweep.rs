//! Accuracy spread as the number of pivots grows.
//!
//! cargo run --release --example pivot_sweep

use tempoproj::dataset::{synth_generate, SynthSpec};
use tempoproj::evaluation::{benchmark, Pipeline, PipelineConfig};

fn main() -> tempoproj::Result<()> {
    let ds = synth_generate(&SynthSpec::three_class_benchmark(), 0)?;
    println!("pivots  mean   std");
    for p in [2, 4, 8, 16, 32] {
        let r = benchmark(&ds, &PipelineConfig::new(Pipeline::Pr, 3).with_pivots(p), 10)?;
        println!("{p:>6}  {:.3}  {:.3}", r.mean, r.std);
    }
    Ok(())
}
