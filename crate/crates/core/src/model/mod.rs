//! Classification back-end: CART trees grown into a random forest, F1
//! metrics and stratified k-fold splits.
//!
//! All randomness comes from [`SplitMix64`](crate::rng::SplitMix64) streams
//! derived from one seed, and every tie is broken deterministically (lowest
//! feature index, then lowest threshold, then smallest class id), so
//! training is reproducible bit for bit and independent of thread count.

mod cv;
mod forest;
mod metrics;
mod tree;

pub use cv::stratified_kfold;
pub use forest::{train_forest, FeatureRule, Forest, ForestParams, MaxFeatures, FOREST_FORMAT_VERSION};
pub use metrics::{f1_scores, per_class_f1, F1Mode};
pub use tree::Tree;
