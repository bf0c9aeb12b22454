//! Optimum-path forest classifiers used as rankers.
//!
//! Two supervised OPF variants are trained over labeled feature vectors:
//! the complete-graph forest ([`opf_cg`]) and the k-nn graph forest
//! ([`opf_knn`]). A query is ranked by sorting the path costs every training
//! node offers to it ([`ranking`]). Rankings are scored with NDCG and MAP
//! and compared with a Wilcoxon signed-rank test ([`evaluation`]), and
//! [`harness`] runs the hold-out protocol end to end.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod forest;
pub mod harness;
pub mod metricspace;
pub mod opf_cg;
pub mod opf_knn;
pub mod ranking;

pub use dataset::{Dataset, LabeledSample, SplitPair};
pub use error::{Error, Result};
pub use forest::{Classification, DensityField, ForestVariant, PrototypeSet, TrainedForest};
pub use metricspace::Metric;
pub use ranking::{Polarity, RankingList};
