//! k-shape clustering and shape extraction.

use tempoproj::clustering::{extract_shape, kshape, DEFAULT_MAX_ITER};
use tempoproj::dataset::{synth_generate, SynthSpec};
use tempoproj::evaluation::clustering_accuracy;
use tempoproj::metrics::sbd;

fn main() -> tempoproj::Result<()> {
    let ds = synth_generate(&SynthSpec::three_class_benchmark().with_size(30, 96), 5)?.znormalized();
    let truth = ds.labels.clone().unwrap();
    let a = kshape(&ds, 3, 0, DEFAULT_MAX_ITER)?;
    println!("k-shape accuracy {:.3}", clustering_accuracy(&a.labels, &truth)?);

    // centroid of the first class, refined once against itself
    let members: Vec<&[f64]> = ds
        .samples
        .iter()
        .zip(&truth)
        .filter(|(_, &l)| l == 0)
        .map(|(s, _)| s.values())
        .collect();
    let first = extract_shape(&members, &vec![0.0; 96])?;
    let refined = extract_shape(&members, &first)?;
    let mean_sbd = |c: &[f64]| members.iter().map(|m| sbd(c, m).unwrap()).sum::<f64>() / members.len() as f64;
    println!(
        "mean SBD to members: first pass {:.4}, refined {:.4}",
        mean_sbd(&first),
        mean_sbd(&refined)
    );
    Ok(())
}
