//! The stochastic objective interface shared by benchmarks, QAOA and solvers.

use crate::domain::BoxDomain;
use crate::estimate::EstimateStats;
use crate::rng::RngStream;

/// A noisy objective F(x, xi) on a box domain. One call to [`sample`] is one
/// raw function evaluation and is what the evaluation budget counts.
///
/// [`sample`]: StochasticObjective::sample
pub trait StochasticObjective: Sync {
    fn domain(&self) -> &BoxDomain;

    fn sample(&self, x: &[f64], rng: &mut RngStream) -> f64;

    fn dim(&self) -> usize {
        self.domain().dim()
    }
}

/// Estimates f(x) from `n` raw evaluations.
pub fn estimate<O: StochasticObjective + ?Sized>(
    objective: &O,
    x: &[f64],
    n: u64,
    rng: &mut RngStream,
) -> EstimateStats {
    let samples: Vec<f64> = (0..n).map(|_| objective.sample(x, rng)).collect();
    EstimateStats::from_samples(&samples)
}

/// Wraps a deterministic function as a (noise-free) stochastic objective.
pub struct Deterministic<F> {
    domain: BoxDomain,
    f: F,
}

impl<F> Deterministic<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(domain: BoxDomain, f: F) -> Self {
        Self { domain, f }
    }
}

impl<F> StochasticObjective for Deterministic<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn sample(&self, x: &[f64], _rng: &mut RngStream) -> f64 {
        (self.f)(x)
    }
}
