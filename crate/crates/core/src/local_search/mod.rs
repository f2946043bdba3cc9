//! Local stochastic optimization (LSO) runs.
//!
//! A run advances one iterate per call to [`LocalSolver::step`]. The driver
//! owns the runs, debits their evaluations from the global budget and
//! decides termination; solvers only report what happened.

mod spsa;
mod trust_region;

pub use spsa::{spsa_gradient_estimate, SpsaConfig, SpsaSolver};
pub use trust_region::{minimize_separable_model, TrustRegionConfig, TrustRegionSolver};

use serde::{Deserialize, Serialize};

use crate::domain::{distance, BoxDomain};
use crate::error::{Error, Result};
use crate::estimate::EstimateStats;
use crate::objective::StochasticObjective;
use crate::rng::{run_noise_stream, run_solver_stream, RngStream};

#[derive(Debug, Clone, PartialEq)]
pub struct LsoStepResult {
    pub new_iterate: Vec<f64>,
    pub evals_consumed: u64,
    /// Trust-region radius, or the length of the last move for step-size
    /// methods.
    pub internal_radius: f64,
    pub proposed_converged: bool,
    /// Offset within this step's evaluations of the first evaluation of
    /// `new_iterate`, when the step evaluated it.
    pub iterate_eval_offset: Option<u64>,
    /// Set when the solver hit a numerical failure; the run is then retired.
    pub failure: Option<String>,
}

/// One local stochastic optimization method.
pub trait LocalSolver: Send {
    fn name(&self) -> &'static str;

    fn iterate(&self) -> &[f64];

    /// Current estimate of the objective at the iterate.
    fn iterate_value(&self) -> f64;

    fn internal_radius(&self) -> f64;

    /// Upper bound on the evaluations the next step will consume.
    fn next_step_cost(&self) -> u64;

    fn step(
        &mut self,
        objective: &dyn StochasticObjective,
        rng: &mut RngStream,
        noise: &mut RngStream,
    ) -> LsoStepResult;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SolverConfig {
    TrustRegion(TrustRegionConfig),
    Spsa(SpsaConfig),
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::TrustRegion(TrustRegionConfig::default())
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            SolverConfig::TrustRegion(c) => c.validate(),
            SolverConfig::Spsa(c) => c.validate(),
        }
    }

    /// Builds a solver positioned at `start`, whose estimate (taken with the
    /// global sampling effort `n`) is `start_stats`.
    pub fn build(
        &self,
        domain: &BoxDomain,
        start: &[f64],
        start_stats: EstimateStats,
        n: u64,
    ) -> Box<dyn LocalSolver> {
        match self {
            SolverConfig::TrustRegion(c) => {
                Box::new(TrustRegionSolver::new(c.clone(), domain.clone(), start.to_vec(), start_stats, n))
            }
            SolverConfig::Spsa(c) => {
                Box::new(SpsaSolver::new(c.clone(), domain.clone(), start.to_vec(), start_stats, n))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentificationConfig {
    pub omega: f64,
    /// Number of trailing iterates that must cluster.
    pub window: usize,
    /// Internal radius below which a clustered run counts as settled.
    /// `None` means 1e-3 times the smallest box width.
    pub min_internal_radius: Option<f64>,
}

impl IdentificationConfig {
    pub fn new(omega: f64) -> Self {
        Self {
            omega,
            window: 10,
            min_internal_radius: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) {
            return Err(Error::config("identification.omega", "must be positive"));
        }
        if self.window < 2 {
            return Err(Error::config("identification.window", "must be at least 2"));
        }
        if let Some(r) = self.min_internal_radius {
            if !(r > 0.0) {
                return Err(Error::config("identification.min_internal_radius", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn radius_threshold(&self, domain: &BoxDomain) -> f64 {
        self.min_internal_radius.unwrap_or(1e-3 * domain.min_width())
    }
}

/// Returns the centroid of the last `window` iterates when they span a set
/// of diameter below omega and the solver's internal radius has dropped
/// below `radius_threshold`.
pub fn detect_identification(
    history: &[Vec<f64>],
    internal_radius: f64,
    window: usize,
    omega: f64,
    radius_threshold: f64,
) -> Option<Vec<f64>> {
    if window < 2 || history.len() < window || internal_radius >= radius_threshold {
        return None;
    }
    let tail = &history[history.len() - window..];
    for (i, p) in tail.iter().enumerate() {
        for q in &tail[i + 1..] {
            if distance(p, q) >= omega {
                return None;
            }
        }
    }
    let d = tail[0].len();
    let mut center = vec![0.0; d];
    for p in tail {
        for (c, v) in center.iter_mut().zip(p) {
            *c += v;
        }
    }
    for c in &mut center {
        *c /= window as f64;
    }
    Some(center)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunStatus {
    Active,
    TerminatedByProximity,
    Identified { center: Vec<f64> },
    Failed { reason: String },
}

/// One local run started from a sampled point.
pub struct LsoRun {
    pub run_id: u64,
    /// Index of the start point in the sample set.
    pub start_index: usize,
    pub history: Vec<Vec<f64>>,
    pub status: RunStatus,
    pub solver: Box<dyn LocalSolver>,
    pub rng: RngStream,
    pub noise: RngStream,
    pub evals: u64,
    pub(crate) evals_since_check: u64,
    pub(crate) last_radius: f64,
}

impl LsoRun {
    pub fn new(run_id: u64, start_index: usize, start: Vec<f64>, solver: Box<dyn LocalSolver>, master_seed: u64) -> Self {
        let last_radius = solver.internal_radius();
        Self {
            run_id,
            start_index,
            history: vec![start],
            status: RunStatus::Active,
            solver,
            rng: RngStream::new(master_seed, run_solver_stream(run_id)),
            noise: RngStream::new(master_seed, run_noise_stream(run_id)),
            evals: 0,
            evals_since_check: 0,
            last_radius,
        }
    }

    pub fn is_active(&self) -> bool {
        self.status == RunStatus::Active
    }

    pub fn current(&self) -> &[f64] {
        self.history.last().expect("history starts with the start point")
    }

    /// Advances the run by one step and appends the new iterate.
    pub fn step(&mut self, objective: &dyn StochasticObjective) -> LsoStepResult {
        let result = self.solver.step(objective, &mut self.rng, &mut self.noise);
        debug_assert!(result.evals_consumed >= 1);
        debug_assert!(objective.domain().contains(&result.new_iterate));
        self.evals += result.evals_consumed;
        self.evals_since_check += result.evals_consumed;
        self.last_radius = result.internal_radius;
        self.history.push(result.new_iterate.clone());
        if let Some(reason) = &result.failure {
            self.status = RunStatus::Failed { reason: reason.clone() };
        }
        result
    }

    pub fn identification(&self, cfg: &IdentificationConfig, domain: &BoxDomain) -> Option<Vec<f64>> {
        // history[0] is the start point, not an iterate
        detect_identification(
            &self.history[1..],
            self.last_radius,
            cfg.window,
            cfg.omega,
            cfg.radius_threshold(domain),
        )
    }
}
