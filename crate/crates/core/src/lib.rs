//! Onset-based validity for clustering time-ordered event features.
//!
//! Events (acoustic emission hits, for instance) carry a feature vector and a
//! position on a monotone axis. A partition is judged by *when* its clusters
//! first appear: clusters that open at evenly spread times score well. The
//! crate provides datasets and preprocessing, K-means and Gustafson–Kessel
//! clustering, onset and shape validity indices, exhaustive feature-subset
//! sweeps with histogram evidence accumulation, a shape-index voting
//! baseline, streaming onset tracking and a synthetic data generator.

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod dataset;
pub mod error;
pub mod search;
pub mod stream;
pub mod synth;
pub mod validity;

pub use clustering::{Engine, Partition, Points};
pub use dataset::{Dataset, FeatureSubset};
pub use error::{Error, Result};
pub use search::{run_search, SearchConfig, SearchResult};
pub use validity::{onset_cvi, CviKind, CviScore, OnsetDistribution, PriorOnsets};
