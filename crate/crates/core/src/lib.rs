//! Cluster-driven feature ordering for tabular data.
//!
//! The crate is organised as a pipeline:
//!
//! 1. [`data`] loads a CSV table, splits it and scales it.
//! 2. [`cluster`] partitions samples (or features) with k-means or DBSCAN.
//! 3. [`ordering`] turns the clusters into local feature orders and combines
//!    them into one global permutation of the columns.
//! 4. [`nn`] trains a multi-head attention denoising autoencoder on the
//!    reordered table and a small classifier on its latent code.
//! 5. [`eval`] scores the classifier (accuracy, ROC AUC).
//! 6. [`experiment`] wires everything into reproducible multi-seed runs and
//!    ablation grids, and backs the `tabseq` binary.

pub mod cluster;
pub mod data;
pub mod eval;
pub mod experiment;
pub mod nn;
pub mod ordering;

mod rng;

pub use cluster::ClusteringResult;
pub use data::Dataset;
pub use ordering::Permutation;
