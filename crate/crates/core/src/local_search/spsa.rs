//! Simultaneous perturbation stochastic approximation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LocalSolver, LsoStepResult};
use crate::domain::{distance, BoxDomain};
use crate::error::{Error, Result};
use crate::estimate::EstimateStats;
use crate::objective::{estimate, StochasticObjective};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpsaConfig {
    /// Gain numerator: `a_t = a / (t + stability)^alpha`.
    pub a: f64,
    /// Perturbation size as a fraction of the smallest box width:
    /// `c_t = c * width / t^gamma`.
    pub c: f64,
    pub stability: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// Longest allowed move per step, as a fraction of the smallest width.
    pub max_step_fraction: f64,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        Self {
            a: 0.05,
            c: 0.01,
            stability: 10.0,
            alpha: 0.602,
            gamma: 0.101,
            max_step_fraction: 0.1,
        }
    }
}

impl SpsaConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("solver.a", self.a), ("solver.c", self.c), ("solver.max_step_fraction", self.max_step_fraction)] {
            if !(v > 0.0) {
                return Err(Error::config(name, "must be positive"));
            }
        }
        if !(self.stability >= 0.0) {
            return Err(Error::config("solver.stability", "must be nonnegative"));
        }
        Ok(())
    }
}

/// One simultaneous-perturbation gradient estimate at `x` with perturbation
/// size `c`, using `n` evaluations at each of the two perturbed points.
pub fn spsa_gradient_estimate(
    objective: &dyn StochasticObjective,
    x: &[f64],
    c: f64,
    n: u64,
    rng: &mut RngStream,
    noise: &mut RngStream,
) -> Vec<f64> {
    let domain = objective.domain();
    let delta: Vec<f64> = (0..x.len())
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let mut plus: Vec<f64> = x.iter().zip(&delta).map(|(xi, di)| xi + c * di).collect();
    let mut minus: Vec<f64> = x.iter().zip(&delta).map(|(xi, di)| xi - c * di).collect();
    domain.project(&mut plus);
    domain.project(&mut minus);
    let yp = estimate(objective, &plus, n, noise).mean();
    let ym = estimate(objective, &minus, n, noise).mean();
    plus.iter()
        .zip(&minus)
        .map(|(p, m)| {
            let span = p - m;
            if span == 0.0 {
                0.0
            } else {
                (yp - ym) / span
            }
        })
        .collect()
}

pub struct SpsaSolver {
    cfg: SpsaConfig,
    domain: BoxDomain,
    x: Vec<f64>,
    stats: EstimateStats,
    n: u64,
    t: u64,
    last_move: f64,
}

impl SpsaSolver {
    pub fn new(cfg: SpsaConfig, domain: BoxDomain, start: Vec<f64>, start_stats: EstimateStats, n: u64) -> Self {
        let last_move = cfg.max_step_fraction * domain.min_width();
        Self {
            cfg,
            domain,
            x: start,
            stats: start_stats,
            n: n.max(1),
            t: 0,
            last_move,
        }
    }

    pub fn gain(&self, t: u64) -> f64 {
        self.cfg.a / (t as f64 + self.cfg.stability).powf(self.cfg.alpha)
    }

    pub fn perturbation(&self, t: u64) -> f64 {
        self.cfg.c * self.domain.min_width() / (t as f64).powf(self.cfg.gamma)
    }
}

impl LocalSolver for SpsaSolver {
    fn name(&self) -> &'static str {
        "spsa"
    }

    fn iterate(&self) -> &[f64] {
        &self.x
    }

    fn iterate_value(&self) -> f64 {
        self.stats.mean()
    }

    fn internal_radius(&self) -> f64 {
        self.last_move
    }

    fn next_step_cost(&self) -> u64 {
        2 * self.n
    }

    fn step(&mut self, objective: &dyn StochasticObjective, rng: &mut RngStream, noise: &mut RngStream) -> LsoStepResult {
        self.t += 1;
        let c = self.perturbation(self.t);
        let a = self.gain(self.t);
        let grad = spsa_gradient_estimate(objective, &self.x, c, self.n, rng, noise);
        let mut step: Vec<f64> = grad.iter().map(|g| -a * g).collect();
        let len = step.iter().map(|s| s * s).sum::<f64>().sqrt();
        let cap = self.cfg.max_step_fraction * self.domain.min_width();
        if len > cap {
            for s in &mut step {
                *s *= cap / len;
            }
        }
        let mut next: Vec<f64> = self.x.iter().zip(&step).map(|(x, s)| x + s).collect();
        self.domain.project(&mut next);
        self.last_move = distance(&next, &self.x);
        if self.last_move > 0.0 {
            // the pair straddles the old iterate; the new one is not evaluated
            self.stats = EstimateStats::default();
        }
        self.x = next;
        LsoStepResult {
            new_iterate: self.x.clone(),
            evals_consumed: 2 * self.n,
            internal_radius: self.last_move,
            proposed_converged: false,
            iterate_eval_offset: None,
            failure: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Deterministic;

    #[test]
    fn gradient_estimate_on_parabola() {
        let dom = BoxDomain::cube(1, -10.0, 10.0).unwrap();
        let obj = Deterministic::new(dom, |x: &[f64]| x[0] * x[0]);
        let mut rng = RngStream::new(3, 0);
        let mut noise = RngStream::new(3, 1);
        let reps = 10_000;
        let mean: f64 = (0..reps)
            .map(|_| spsa_gradient_estimate(&obj, &[3.0], 0.1, 1, &mut rng, &mut noise)[0])
            .sum::<f64>()
            / reps as f64;
        assert!((mean - 6.0).abs() < 0.3, "mean = {mean}");
    }

    #[test]
    fn linear_estimates_are_symmetric() {
        // g_i = (a . delta) / delta_i, so flipping delta leaves the estimate
        // unchanged and every coordinate has magnitude |a . delta|
        let dom = BoxDomain::cube(2, -10.0, 10.0).unwrap();
        let obj = Deterministic::new(dom, |x: &[f64]| 2.0 * x[0] - 3.0 * x[1]);
        let mut rng = RngStream::new(4, 0);
        let mut noise = RngStream::new(4, 1);
        for _ in 0..64 {
            let g = spsa_gradient_estimate(&obj, &[0.0, 0.0], 0.5, 1, &mut rng, &mut noise);
            assert!((g[0].abs() - g[1].abs()).abs() < 1e-12);
            assert!((g[0].abs() - 1.0).abs() < 1e-12 || (g[0].abs() - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_objective_does_not_move() {
        let dom = BoxDomain::cube(2, 0.0, 1.0).unwrap();
        let obj = Deterministic::new(dom.clone(), |_: &[f64]| 4.0);
        let mut s = SpsaSolver::new(SpsaConfig::default(), dom, vec![0.4, 0.6], EstimateStats::default(), 2);
        let mut rng = RngStream::new(1, 0);
        let mut noise = RngStream::new(1, 1);
        for t in 1..=20 {
            let before = s.iterate().to_vec();
            let r = s.step(&obj, &mut rng, &mut noise);
            assert!(distance(&before, &r.new_iterate) <= s.gain(t) * 1e-12 + 1e-15);
        }
    }

    #[test]
    fn corner_start_stays_inside() {
        let dom = BoxDomain::cube(2, 0.0, 1.0).unwrap();
        let obj = Deterministic::new(dom.clone(), |x: &[f64]| -(x[0] + x[1]) * 50.0);
        let mut s = SpsaSolver::new(SpsaConfig::default(), dom.clone(), vec![1.0, 1.0], EstimateStats::default(), 1);
        let mut rng = RngStream::new(1, 0);
        let mut noise = RngStream::new(1, 1);
        for _ in 0..50 {
            let r = s.step(&obj, &mut rng, &mut noise);
            assert!(dom.contains(&r.new_iterate));
        }
    }

    #[test]
    fn sphere_converges_with_fixed_seed() {
        let dom = BoxDomain::cube(2, -2.0, 2.0).unwrap();
        let obj = Deterministic::new(dom.clone(), |x: &[f64]| x[0] * x[0] + x[1] * x[1]);
        let mut s = SpsaSolver::new(SpsaConfig::default(), dom, vec![1.0, 1.0], EstimateStats::default(), 1);
        let mut rng = RngStream::new(2, 0);
        let mut noise = RngStream::new(2, 1);
        for _ in 0..3000 {
            s.step(&obj, &mut rng, &mut noise);
        }
        assert!(distance(s.iterate(), &[0.0, 0.0]) < 0.05, "x = {:?}", s.iterate());
    }
}
