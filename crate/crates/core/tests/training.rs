use tempoproj::autoencoder::{
    build_cnn_gru, build_dense_dae, encode, load_checkpoint, reconstruct, save_checkpoint, train,
    CnnGruConfig, DenseDaeConfig, InputShape,
};
use tempoproj::dataset::{synth_generate, SynthSpec};
use tempoproj::metrics::MetricKind;
use tempoproj::projection::{gen_proj_space, select_pivots};

fn small_cnn(epochs: usize) -> CnnGruConfig {
    CnnGruConfig {
        filters: [4, 8, 8],
        latent_dim: 4,
        batch_size: 16,
        epochs,
        seed: 7,
        ..Default::default()
    }
}

#[test]
fn constant_dataset_is_learned() {
    // 256 samples in batches of 16: sixteen Adam steps per epoch
    let samples = vec![vec![0.5; 16]; 256];
    let mut model = build_cnn_gru(InputShape::new(16, 1, 1), &small_cnn(200)).unwrap();
    let loss = train(&mut model, &samples).unwrap();
    let best = loss.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(best < 1e-6, "best loss {best:.3e}");
}

#[test]
fn loss_drops_on_synthetic_projections() {
    let ds = synth_generate(&SynthSpec::three_class_benchmark().with_size(20, 64), 7).unwrap();
    let ds = ds.znormalized();
    let pivots = select_pivots(&ds, 16, 7).unwrap();
    let x = gen_proj_space(&ds, &pivots, MetricKind::Sbd).unwrap().features();
    let mut model = build_cnn_gru(InputShape::new(16, 1, 1), &small_cnn(30)).unwrap();
    let loss = train(&mut model, &x).unwrap();
    assert!(loss.last().unwrap() < &loss[0], "{loss:?}");
}

#[test]
fn untrained_models_give_finite_output() {
    let x: Vec<Vec<f64>> = (0..5)
        .map(|i| (0..32).map(|j| ((i * j) as f64).sin()).collect())
        .collect();
    let cnn = build_cnn_gru(InputShape::new(16, 2, 1), &CnnGruConfig::default()).unwrap();
    let dae = build_dense_dae(32, &DenseDaeConfig::default()).unwrap();
    for model in [&cnn, &dae] {
        let z = encode(model, &x).unwrap();
        let r = reconstruct(model, &x).unwrap();
        assert!(z
            .iter()
            .flatten()
            .chain(r.iter().flatten())
            .all(|v| v.is_finite()));
        assert_eq!(r[0].len(), 32);
    }
}

#[test]
fn checkpoint_roundtrip_encodes_identically() {
    let x: Vec<Vec<f64>> = (0..8)
        .map(|i| (0..16).map(|j| (i as f64 - j as f64) / 9.0).collect())
        .collect();
    let mut model = build_cnn_gru(InputShape::new(16, 1, 1), &small_cnn(3)).unwrap();
    train(&mut model, &x).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&path, &model).unwrap();
    let back = load_checkpoint(&path).unwrap();
    let (a, b) = (encode(&model, &x).unwrap(), encode(&back, &x).unwrap());
    for (ra, rb) in a.iter().zip(&b) {
        for (va, vb) in ra.iter().zip(rb) {
            assert_eq!(va.to_bits(), vb.to_bits());
        }
    }
}
