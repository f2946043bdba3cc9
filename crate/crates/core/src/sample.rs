use serde::{Deserialize, Serialize};

use crate::estimate::EstimateStats;

/// Where a point of S or L came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    UniformSample,
    LsoIterate { run_id: u64 },
}

/// A location with its objective estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub x: Vec<f64>,
    pub stats: EstimateStats,
    pub origin: Origin,
    /// Cumulative evaluation count when the point was created.
    pub eval_index: u64,
}
