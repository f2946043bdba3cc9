//! Multistart optimization for noisy nonconvex objectives on boxes.

pub mod benchmarks;
pub mod domain;
pub mod driver;
pub mod error;
pub mod estimate;
pub mod eval;
pub mod local_search;
pub mod objective;
pub mod qaoa;
pub mod rng;
pub mod sample;
pub mod start_rules;

pub use domain::BoxDomain;
pub use driver::{run_to_budget, MansoConfig, MansoState, RunReport};
pub use error::{Error, Result};
pub use objective::StochasticObjective;
