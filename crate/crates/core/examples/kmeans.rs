//! k-means on pivot projections, scored against the generator labels.

use tempoproj::clustering::{kmeans, DEFAULT_MAX_ITER};
use tempoproj::dataset::{synth_generate, SynthSpec};
use tempoproj::evaluation::clustering_accuracy;
use tempoproj::metrics::MetricKind;
use tempoproj::projection::{gen_proj_space, prepare_for_metric, select_pivots};

fn main() -> tempoproj::Result<()> {
    let ds = synth_generate(&SynthSpec::three_class_benchmark(), 7)?;
    let truth = ds.labels.clone().unwrap();
    let prepared = prepare_for_metric(&ds, MetricKind::Sbd, None);
    let x = gen_proj_space(&prepared, &select_pivots(&prepared, 16, 1)?, MetricKind::Sbd)?.features();

    for seed in 0..3 {
        let a = kmeans(&x, 3, seed, DEFAULT_MAX_ITER)?;
        println!(
            "seed {seed}: inertia {:.4}, accuracy {:.3}",
            a.score.unwrap(),
            clustering_accuracy(&a.labels, &truth)?
        );
    }

    // raw series for comparison
    let raw: Vec<Vec<f64>> = ds.samples.iter().map(|s| s.values().to_vec()).collect();
    let a = kmeans(&raw, 3, 0, DEFAULT_MAX_ITER)?;
    println!(
        "raw series: accuracy {:.3}",
        clustering_accuracy(&a.labels, &truth)?
    );
    Ok(())
}
