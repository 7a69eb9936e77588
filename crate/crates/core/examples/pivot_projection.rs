//! Project a dataset onto random pivots and reuse the on-disk cache.

use tempoproj::dataset::{synth_generate, SynthSpec};
use tempoproj::metrics::MetricKind;
use tempoproj::projection::{load_or_compute, normalize_projection, prepare_for_metric};

fn main() -> tempoproj::Result<()> {
    let ds = synth_generate(&SynthSpec::three_class_benchmark(), 7)?;
    let metric = MetricKind::Sbd;
    // SBD projections work on z-normalized series
    let prepared = prepare_for_metric(&ds, metric, None);
    let cache = std::env::temp_dir().join("tempoproj-example").join("cache");

    for attempt in 0..2 {
        let start = std::time::Instant::now();
        let (pm, cached, path) = load_or_compute(&cache, &prepared, 16, 0, metric)?;
        println!(
            "attempt {attempt}: {}x{}x{} in {:.3}s ({}) {}",
            pm.n(),
            pm.p(),
            pm.w(),
            start.elapsed().as_secs_f64(),
            if cached { "cached" } else { "computed" },
            path.display()
        );
        if attempt == 1 {
            println!("pivots {:?}", pm.pivot_set.indices());
            let unit = normalize_projection(&pm);
            let row: Vec<String> = unit.block(0).iter().map(|v| format!("{v:.3}")).collect();
            println!("sample 0, unit norm: {}", row.join(" "));
        }
    }
    Ok(())
}
