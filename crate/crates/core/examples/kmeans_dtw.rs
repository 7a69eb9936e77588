//! k-means with DTW distances and DBA centroids, directly on the series.

use tempoproj::clustering::{kmeans_dtw, DEFAULT_MAX_ITER};
use tempoproj::dataset::{synth_generate, SynthSpec};
use tempoproj::evaluation::clustering_accuracy;

fn main() -> tempoproj::Result<()> {
    // DBA is quadratic in the series length, so keep the set small
    let ds = synth_generate(&SynthSpec::three_class_benchmark().with_size(15, 64), 3)?;
    let truth = ds.labels.clone().unwrap();
    for band in [None, Some(6)] {
        let start = std::time::Instant::now();
        let a = kmeans_dtw(&ds, 3, 0, DEFAULT_MAX_ITER, band)?;
        println!(
            "band {band:?}: accuracy {:.3}, cost {:.2}, {:.2}s",
            clustering_accuracy(&a.labels, &truth)?,
            a.score.unwrap_or(f64::NAN),
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
