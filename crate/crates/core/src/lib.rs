//! Motion subtlety index (MSI) and wearable activity recognition evaluation.
//!
//! The crate covers the whole desk-scale workflow:
//!
//! - [`data`]: flow/pose/IMU containers, their file formats, manifests and resampling
//! - [`flow`]: frame-size normalization of optical flow and a Horn–Schunck estimator
//! - [`msi`]: per-frame and per-window MSI, and the per-class KDE mode (cMSI)
//! - [`pipeline`]: virtual IMU calibration, sliding windows, ECDF and moment features
//! - [`model`]: random forest, F1 scores and stratified k-fold splits
//! - [`moments`]: DBSCAN aggregation of positive windows into eating moments
//! - [`analysis`]: cut-off sweeps, spline and line fits, Pearson statistics
//! - [`experiment`]: configuration and report-writing workflows used by the CLI
//! - [`synth`]: the synthetic fixture generator
//!
//! With the default `parallel` feature, data-parallel loops run on rayon.
//! Results are identical with and without it.

pub mod analysis;
pub mod data;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod model;
pub mod moments;
pub mod msi;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};

/// Toolkit version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
