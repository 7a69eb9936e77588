//! Train the CNN-GRU autoencoder on a 16-pivot projection and look at the
//! latent space.
//!
//! cargo run --release --example train_autoencoder

use tempoproj::autoencoder::{build_cnn_gru, encode, train_with_progress, CnnGruConfig, InputShape};
use tempoproj::dataset::{synth_generate, SynthSpec};
use tempoproj::metrics::MetricKind;
use tempoproj::projection::{gen_proj_space, prepare_for_metric, select_pivots};

fn main() -> tempoproj::Result<()> {
    let ds = synth_generate(&SynthSpec::three_class_benchmark(), 7)?;
    let prepared = prepare_for_metric(&ds, MetricKind::Sbd, None);
    let pivots = select_pivots(&prepared, 16, 7)?;
    let x = gen_proj_space(&prepared, &pivots, MetricKind::Sbd)?.features();

    let cfg = CnnGruConfig {
        epochs: 60,
        seed: 7,
        ..Default::default()
    };
    let mut model = build_cnn_gru(InputShape::new(16, 1, 1), &cfg)?;
    println!("{} parameters", model.num_parameters());
    let history = train_with_progress(&mut model, &x, |epoch, loss| {
        if epoch % 10 == 0 {
            println!("epoch {epoch:>3}  loss {loss:.6}");
        }
    })?;
    println!("final loss {:.6}", history.last().unwrap());

    let z = encode(&model, &x)?;
    let labels = ds.labels.as_ref().unwrap();
    for class in 0..3 {
        let members: Vec<&Vec<f64>> = z
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == class)
            .map(|(v, _)| v)
            .collect();
        let centroid: Vec<String> = (0..model.latent_dim())
            .map(|j| {
                format!(
                    "{:+.3}",
                    members.iter().map(|v| v[j]).sum::<f64>() / members.len() as f64
                )
            })
            .collect();
        println!("class {class} latent mean: {}", centroid.join(" "));
    }
    Ok(())
}
