//! Decomposition of a monolith's class call graph into candidate
//! microservices with an adapted boosted mean shift clustering.
//!
//! The usual pipeline is [`ingest`] (load or scan a graph), [`encode`]
//! (feature rows for one of six configurations), [`bmsc::decompose`], then
//! [`metrics::summarize`] and, with a reference decomposition,
//! [`gteval::evaluate`]. [`harness`] strings these together.

pub mod bmsc;
pub mod cluster;
pub mod encode;
pub mod error;
pub mod gteval;
pub mod harness;
pub mod ingest;
pub mod lexicon;
pub mod matrix;
pub mod metrics;
pub mod simfuncs;
pub mod synth;

pub use bmsc::{BmscOutcome, BmscParams, IMode, IterationRecord};
pub use encode::{Configuration, FeatureMatrix};
pub use error::{Error, Result};
pub use gteval::{GroundTruth, GroundTruthReport};
pub use harness::{Algorithm, RunConfig, RunOutput, SweepParam, SweepSpec};
pub use ingest::{CallEdge, ClassNode, LoadSummary, MonolithGraph, RawEdge};
pub use lexicon::{StopList, TermBag, Vocabulary};
pub use matrix::Matrix;
pub use metrics::{Decomposition, MetricsReport, Microservice};
pub use simfuncs::SimilarityWeights;
