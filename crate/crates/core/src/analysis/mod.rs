//! Analyses built on the symbolic representation: integrated gradients,
//! exact decision regions and partition-vertex enumeration.

mod decision;
mod ig;
mod vertices;

use thiserror::Error;

use crate::network::NetworkError;
use crate::symbolic::EngineError;

pub use decision::{decision_regions, decision_regions_json, decision_regions_with, LabeledRegion};
pub use ig::{exact_ig, exact_ig_batch, sampled_ig, Attribution, Scheme};
pub use vertices::enumerate_vertices;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("output index {index} out of range for {outputs} outputs")]
    LabelOutOfRange { index: usize, outputs: usize },
    #[error("decision regions need at least 2 outputs, network has {0}")]
    TooFewOutputs(usize),
    #[error("sample count must be at least 1")]
    NoSamples,
}

impl From<NetworkError> for AnalysisError {
    fn from(e: NetworkError) -> Self {
        AnalysisError::Engine(e.into())
    }
}

impl From<crate::geometry::GeometryError> for AnalysisError {
    fn from(e: crate::geometry::GeometryError) -> Self {
        AnalysisError::Engine(e.into())
    }
}

pub type Result<T, E = AnalysisError> = std::result::Result<T, E>;
