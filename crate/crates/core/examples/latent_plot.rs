//! PCA scatter of projection features, one colour per class.

use tempoproj::cli::{pca_2d, scatter_svg};
use tempoproj::dataset::{synth_generate, SynthSpec};
use tempoproj::metrics::MetricKind;
use tempoproj::projection::{gen_proj_space, prepare_for_metric, select_pivots};

fn main() -> tempoproj::Result<()> {
    let ds = synth_generate(&SynthSpec::three_class_benchmark(), 7)?;
    let prepared = prepare_for_metric(&ds, MetricKind::Sbd, None);
    let x = gen_proj_space(&prepared, &select_pivots(&prepared, 16, 0)?, MetricKind::Sbd)?.features();
    let points = pca_2d(&x)?;
    let svg = scatter_svg(&points, ds.labels.as_deref());
    let path = std::env::temp_dir().join("tempoproj-projection.svg");
    std::fs::write(&path, svg).map_err(|e| tempoproj::Error::io(&path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}
