//! Time-series clustering on pivot-distance projections.
//!
//! Every sample is re-represented by its distances (Euclidean, DTW or
//! shape-based distance) to `p` randomly drawn pivot samples. The projected
//! samples are compressed by a CNN-GRU autoencoder and the latent vectors are
//! clustered with a classic algorithm (k-means, spectral, DBSCAN).
//!
//! The crate also ships the comparison pipelines used to judge the approach:
//! clustering on the raw series (`OS`), on dense denoising autoencoder latents
//! (`LS`), and on the projections directly (`Pr`).
//!
//! ```no_run
//! use tempoproj::dataset::{synth_generate, SynthSpec};
//! use tempoproj::evaluation::{run_pipeline, PipelineConfig, Pipeline};
//!
//! let ds = synth_generate(&SynthSpec::three_class_benchmark(), 7).unwrap();
//! let cfg = PipelineConfig::new(Pipeline::PrLs, 3).with_seed(7);
//! let report = run_pipeline(&ds, &cfg).unwrap();
//! println!("accuracy {:.3}", report.accuracy.unwrap());
//! ```

pub mod autoencoder;
pub mod cli;
pub mod clustering;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod metrics;
pub mod parallel;
pub mod projection;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
