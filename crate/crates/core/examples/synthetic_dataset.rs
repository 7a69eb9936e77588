//! Generate the three-class benchmark, write it as a UCR file and read it back.
//!
//! cargo run --example synthetic_dataset

use tempoproj::dataset::{load_ucr, save_ucr, synth_generate, Delimiter, SynthSpec};

fn main() -> tempoproj::Result<()> {
    let ds = synth_generate(&SynthSpec::three_class_benchmark(), 7)?;
    println!(
        "{}: {} samples, length {:?}, k={:?}",
        ds.name,
        ds.len(),
        ds.equal_length(),
        ds.k_hint
    );

    let dir = std::env::temp_dir().join("tempoproj-example");
    std::fs::create_dir_all(&dir).map_err(|e| tempoproj::Error::io(&dir, e))?;
    let path = dir.join("three_class.tsv");
    save_ucr(&ds, &path)?;
    let back = load_ucr(&path, Delimiter::Auto)?;
    println!(
        "reloaded {} samples, same fingerprint: {}",
        back.len(),
        back.fingerprint() == ds.fingerprint()
    );

    // first few points of one sample per class
    let labels = ds.labels.as_ref().unwrap();
    for class in 0..3 {
        let i = labels.iter().position(|&l| l == class).unwrap();
        let head: Vec<String> = ds.samples[i].values()[..8]
            .iter()
            .map(|v| format!("{v:+.2}"))
            .collect();
        println!("class {class}: {}", head.join(" "));
    }
    Ok(())
}
