//! Adaptive-sampling derivative-free trust region.
//!
//! Each iteration re-estimates the centre, samples the 2d points
//! `centre +/- radius * e_i` and fits a separable quadratic (gradient plus
//! diagonal Hessian) through them. The model step is tested with the usual
//! ratio of actual to predicted decrease. A very successful step expands
//! the radius; a merely accepted one pulls it toward the step length, never
//! below `shrink * radius`. Every estimate uses at least
//! `max(n, ceil(ln(t + 1)^2))` samples and keeps sampling until its
//! standard error is at most `kappa * radius^2`, up to `max_samples`.

use serde::{Deserialize, Serialize};

use super::{LocalSolver, LsoStepResult};
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::estimate::EstimateStats;
use crate::objective::{estimate, StochasticObjective};
use crate::rng::RngStream;

const KAPPA: f64 = 1.0;
const MAX_SAMPLES: u64 = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrustRegionConfig {
    /// Initial radius as a fraction of the smallest box width.
    pub initial_radius_fraction: f64,
    /// Radius cap as a fraction of the smallest box width.
    pub max_radius_fraction: f64,
    /// Acceptance threshold on the decrease ratio.
    pub eta1: f64,
    /// Expansion threshold on the decrease ratio.
    pub eta2: f64,
    pub expand: f64,
    pub shrink: f64,
    /// Adaptive-sampling constant; 0 keeps the fixed sample-size schedule.
    pub kappa: f64,
    /// Cap on the samples spent on one estimate.
    pub max_samples: u64,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        Self {
            initial_radius_fraction: 0.1,
            max_radius_fraction: 0.5,
            eta1: 0.1,
            eta2: 0.75,
            expand: 2.0,
            shrink: 0.5,
            kappa: KAPPA,
            max_samples: MAX_SAMPLES,
        }
    }
}

impl TrustRegionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_radius_fraction > 0.0) {
            return Err(Error::config("solver.initial_radius_fraction", "must be positive"));
        }
        if !(self.max_radius_fraction >= self.initial_radius_fraction) {
            return Err(Error::config(
                "solver.max_radius_fraction",
                "must be at least initial_radius_fraction",
            ));
        }
        if !(self.eta1 > 0.0 && self.eta1 <= self.eta2 && self.eta2 < 1.0) {
            return Err(Error::config("solver.eta1", "need 0 < eta1 <= eta2 < 1"));
        }
        if !(self.expand > 1.0) {
            return Err(Error::config("solver.expand", "must exceed 1"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::config("solver.shrink", "must lie in (0, 1)"));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::config("solver.kappa", "must be finite and non-negative"));
        }
        if self.max_samples < 1 {
            return Err(Error::config("solver.max_samples", "must be at least 1"));
        }
        Ok(())
    }
}

fn model_value(g: &[f64], h: &[f64], s: &[f64]) -> f64 {
    g.iter()
        .zip(h)
        .zip(s)
        .map(|((gi, hi), si)| gi * si + 0.5 * hi * si * si)
        .sum()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Extends `stats` at `x` to at least `min_n` samples, then keeps sampling
/// while the standard error exceeds `target` and fewer than `max_n` samples
/// are held. Returns the new summary and the evaluations spent.
fn adaptive_estimate(
    objective: &dyn StochasticObjective,
    x: &[f64],
    mut stats: EstimateStats,
    min_n: u64,
    target: f64,
    max_n: u64,
    noise: &mut RngStream,
) -> (EstimateStats, u64) {
    let start = stats.n();
    if stats.n() < min_n {
        stats = stats.merge(&estimate(objective, x, min_n - stats.n(), noise));
    }
    while stats.n() < max_n && stats.n() >= 2 && stats.var_of_mean().sqrt() > target {
        let needed = (stats.sample_variance() / (target * target)).ceil() as u64;
        let add = needed.saturating_sub(stats.n()).clamp(1, max_n - stats.n());
        stats = stats.merge(&estimate(objective, x, add, noise));
    }
    (stats, stats.n() - start)
}

fn shifted_newton(g: &[f64], h: &[f64], lambda: f64) -> Vec<f64> {
    g.iter().zip(h).map(|(gi, hi)| -gi / (hi + lambda)).collect()
}

/// Approximately minimizes `g.s + 0.5 * sum(h_i s_i^2)` over the ball
/// `|s| <= radius` intersected with the box shifted to `center`.
///
/// Returns the step and its predicted decrease `-m(s)`.
pub fn minimize_separable_model(
    g: &[f64],
    h: &[f64],
    radius: f64,
    center: &[f64],
    domain: &BoxDomain,
) -> (Vec<f64>, f64) {
    let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(2);

    let h_min = h.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_lo = (-h_min).max(0.0);
    let newton_ok = h_min > 0.0 && {
        let s = shifted_newton(g, h, 0.0);
        let inside = norm(&s) <= radius;
        if inside {
            candidates.push(s);
        }
        inside
    };
    if !newton_ok {
        // boundary solution: find lambda > lambda_lo with |s(lambda)| = radius
        let scale = 1.0 + h.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let mut lo = lambda_lo + 1e-12 * scale;
        if norm(&shifted_newton(g, h, lo)) > radius {
            let mut hi = lo + scale;
            while norm(&shifted_newton(g, h, hi)) > radius {
                hi = lo + 2.0 * (hi - lo);
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if norm(&shifted_newton(g, h, mid)) > radius {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            candidates.push(shifted_newton(g, h, hi));
        }
    }

    let gnorm = norm(g);
    if gnorm > 0.0 {
        let curvature: f64 = g.iter().zip(h).map(|(gi, hi)| hi * gi * gi).sum();
        let t_max = radius / gnorm;
        let t = if curvature > 0.0 {
            (gnorm * gnorm / curvature).min(t_max)
        } else {
            t_max
        };
        candidates.push(g.iter().map(|gi| -t * gi).collect());
    }

    let mut best = vec![0.0; g.len()];
    let mut best_val = 0.0;
    for s in candidates {
        let mut x: Vec<f64> = center.iter().zip(&s).map(|(c, si)| c + si).collect();
        domain.project(&mut x);
        let s: Vec<f64> = x.iter().zip(center).map(|(xi, c)| xi - c).collect();
        let val = model_value(g, h, &s);
        if val < best_val {
            best_val = val;
            best = s;
        }
    }
    (best, -best_val)
}

pub struct TrustRegionSolver {
    cfg: TrustRegionConfig,
    domain: BoxDomain,
    center: Vec<f64>,
    center_stats: EstimateStats,
    radius: f64,
    max_radius: f64,
    n_min: u64,
    steps: u64,
    /// Number of coordinates where one interpolation point collapsed onto
    /// the centre and the model fell back to a linear term.
    pub degenerate_directions: u64,
}

impl TrustRegionSolver {
    pub fn new(cfg: TrustRegionConfig, domain: BoxDomain, start: Vec<f64>, start_stats: EstimateStats, n: u64) -> Self {
        let w = domain.min_width();
        Self {
            radius: cfg.initial_radius_fraction * w,
            max_radius: cfg.max_radius_fraction * w,
            cfg,
            domain,
            center: start,
            center_stats: start_stats,
            n_min: n.max(1),
            steps: 0,
            degenerate_directions: 0,
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Per-point sample size at (1-based) iteration `t`.
    pub fn sample_size(&self, t: u64) -> u64 {
        let l = ((t + 1) as f64).ln();
        self.n_min.max((l * l).ceil() as u64)
    }

    fn max_samples(&self, nt: u64) -> u64 {
        self.cfg.max_samples.max(nt)
    }

    fn target_error(&self) -> f64 {
        self.cfg.kappa * self.radius * self.radius
    }

    fn stencil(&self) -> Vec<(Option<Vec<f64>>, Option<Vec<f64>>)> {
        (0..self.center.len())
            .map(|i| {
                let mut plus = self.center.clone();
                plus[i] += self.radius;
                self.domain.project(&mut plus);
                let mut minus = self.center.clone();
                minus[i] -= self.radius;
                self.domain.project(&mut minus);
                let p = (plus[i] > self.center[i]).then_some(plus);
                let m = (minus[i] < self.center[i]).then_some(minus);
                (p, m)
            })
            .collect()
    }
}

impl LocalSolver for TrustRegionSolver {
    fn name(&self) -> &'static str {
        "trust-region"
    }

    fn iterate(&self) -> &[f64] {
        &self.center
    }

    fn iterate_value(&self) -> f64 {
        self.center_stats.mean()
    }

    fn internal_radius(&self) -> f64 {
        self.radius
    }

    fn next_step_cost(&self) -> u64 {
        let nt = self.sample_size(self.steps + 1);
        let per_point = if self.cfg.kappa > 0.0 { self.max_samples(nt) } else { nt };
        let top_up = per_point.saturating_sub(self.center_stats.n());
        let points: u64 = self
            .stencil()
            .iter()
            .map(|(p, m)| p.is_some() as u64 + m.is_some() as u64)
            .sum();
        top_up + (points + 1) * per_point
    }

    fn step(&mut self, objective: &dyn StochasticObjective, _rng: &mut RngStream, noise: &mut RngStream) -> LsoStepResult {
        self.steps += 1;
        let nt = self.sample_size(self.steps);
        let (target, cap) = if self.cfg.kappa > 0.0 {
            (self.target_error(), self.max_samples(nt))
        } else {
            (f64::INFINITY, nt)
        };
        let mut evals = 0u64;

        let (stats, used) = adaptive_estimate(objective, &self.center, self.center_stats, nt, target, cap, noise);
        self.center_stats = stats;
        evals += used;
        let f0 = self.center_stats.mean();

        let d = self.center.len();
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d];
        for (i, (plus, minus)) in self.stencil().into_iter().enumerate() {
            let mut sample = |x: &Vec<f64>| {
                let (st, used) = adaptive_estimate(objective, x, EstimateStats::default(), nt, target, cap, noise);
                evals += used;
                st.mean()
            };
            let fp = plus.as_ref().map(|x| (x[i] - self.center[i], sample(x)));
            let fm = minus.as_ref().map(|x| (self.center[i] - x[i], sample(x)));
            match (fp, fm) {
                (Some((hp, vp)), Some((hm, vm))) => {
                    let denom = hp * hm * (hp + hm);
                    g[i] = (vp * hm * hm - vm * hp * hp - f0 * (hm * hm - hp * hp)) / denom;
                    h[i] = 2.0 * (vp * hm + vm * hp - f0 * (hp + hm)) / denom;
                }
                (Some((hp, vp)), None) => {
                    self.degenerate_directions += 1;
                    g[i] = (vp - f0) / hp;
                }
                (None, Some((hm, vm))) => {
                    self.degenerate_directions += 1;
                    g[i] = (f0 - vm) / hm;
                }
                (None, None) => self.degenerate_directions += 1,
            }
        }

        if g.iter().chain(&h).any(|v| !v.is_finite()) {
            return LsoStepResult {
                new_iterate: self.center.clone(),
                evals_consumed: evals.max(1),
                internal_radius: self.radius,
                proposed_converged: false,
                iterate_eval_offset: None,
                failure: Some("non-finite interpolation model".into()),
            };
        }

        let (s, predicted) = minimize_separable_model(&g, &h, self.radius, &self.center, &self.domain);
        let mut offset = None;
        if predicted > 0.0 {
            let mut candidate: Vec<f64> = self.center.iter().zip(&s).map(|(c, si)| c + si).collect();
            self.domain.project(&mut candidate);
            let cand_offset = evals;
            let (cand_stats, used) =
                adaptive_estimate(objective, &candidate, EstimateStats::default(), nt, target, cap, noise);
            evals += used;
            let rho = (f0 - cand_stats.mean()) / predicted;
            if rho >= self.cfg.eta1 {
                self.center = candidate;
                self.center_stats = cand_stats;
                offset = Some(cand_offset);
                self.radius = if rho >= self.cfg.eta2 {
                    (self.radius * self.cfg.expand).min(self.max_radius)
                } else {
                    (self.radius * self.cfg.shrink).max(norm(&s))
                };
            } else {
                self.radius *= self.cfg.shrink;
            }
        } else {
            self.radius *= self.cfg.shrink;
        }

        LsoStepResult {
            new_iterate: self.center.clone(),
            evals_consumed: evals.max(1),
            internal_radius: self.radius,
            proposed_converged: self.radius < 1e-10 * self.domain.min_width(),
            iterate_eval_offset: offset,
            failure: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{branin, branin_minima};
    use crate::domain::distance;
    use crate::objective::Deterministic;

    fn run(obj: &dyn StochasticObjective, start: &[f64], steps: usize) -> TrustRegionSolver {
        let mut noise = RngStream::new(1, 1);
        let mut rng = RngStream::new(1, 0);
        let stats = estimate(obj, start, 2, &mut noise);
        let mut s = TrustRegionSolver::new(TrustRegionConfig::default(), obj.domain().clone(), start.to_vec(), stats, 2);
        for _ in 0..steps {
            let before = s.next_step_cost();
            let r = s.step(obj, &mut rng, &mut noise);
            assert!(r.evals_consumed <= before);
            assert!(obj.domain().contains(&r.new_iterate));
        }
        s
    }

    #[test]
    fn model_minimizer_is_exact_for_separable_quadratic() {
        let dom = BoxDomain::cube(3, -5.0, 5.0).unwrap();
        let c = [0.3, -0.2, 0.1];
        let a = [1.0, 3.0, 0.5];
        let x = [0.0, 0.0, 0.0];
        // gradient and diagonal Hessian of sum a_i (x_i - c_i)^2 at x
        let g: Vec<f64> = (0..3).map(|i| 2.0 * a[i] * (x[i] - c[i])).collect();
        let h: Vec<f64> = a.iter().map(|ai| 2.0 * ai).collect();
        let (s, _) = minimize_separable_model(&g, &h, 1.0, &x, &dom);
        for i in 0..3 {
            assert!((x[i] + s[i] - c[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn boundary_step_has_radius_length() {
        let dom = BoxDomain::cube(2, -5.0, 5.0).unwrap();
        let (s, pred) = minimize_separable_model(&[1.0, -2.0], &[-1.0, 0.5], 0.3, &[0.0, 0.0], &dom);
        assert!((norm(&s) - 0.3).abs() < 1e-9);
        assert!(pred > 0.0);
    }

    #[test]
    fn ratio_is_one_on_noiseless_quadratic() {
        let dom = BoxDomain::cube(2, -5.0, 5.0).unwrap();
        let f = |x: &[f64]| 2.0 * (x[0] - 1.0).powi(2) + 0.5 * (x[1] + 2.0).powi(2);
        let obj = Deterministic::new(dom.clone(), f);
        let center = [3.0, 1.0];
        let mut noise = RngStream::new(0, 0);
        let stats = estimate(&obj, &center, 2, &mut noise);
        let mut solver = TrustRegionSolver::new(TrustRegionConfig::default(), dom.clone(), center.to_vec(), stats, 2);
        let r0 = solver.radius();
        let res = solver.step(&obj, &mut RngStream::new(0, 1), &mut noise);
        // exact model means the step is accepted with ratio 1, which expands
        assert!((solver.radius() - 2.0 * r0).abs() < 1e-12);
        let moved = distance(&res.new_iterate, &center);
        assert!((moved - r0).abs() < 1e-9);
        // model decrease equals true decrease
        let pred = f(&center) - f(&res.new_iterate);
        assert!(pred > 0.0);
    }

    #[test]
    fn sphere_converges() {
        let dom = BoxDomain::cube(2, -5.0, 5.0).unwrap();
        let obj = Deterministic::new(dom, |x: &[f64]| x[0] * x[0] + x[1] * x[1]);
        let s = run(&obj, &[1.0, 1.0], 200);
        assert!(norm(s.iterate()) < 0.1, "iterate = {:?}", s.iterate());
    }

    #[test]
    fn branin_converges_to_a_minimum() {
        let dom = BoxDomain::new(vec![-5.0, 0.0], vec![10.0, 15.0]).unwrap();
        let obj = Deterministic::new(dom, |x: &[f64]| branin(x));
        let s = run(&obj, &[2.5, 7.5], 500);
        let best = branin_minima().iter().map(|m| distance(m, s.iterate())).fold(f64::INFINITY, f64::min);
        assert!(best < 0.05, "iterate = {:?}", s.iterate());
    }

    #[test]
    fn corner_start_stays_feasible() {
        let dom = BoxDomain::cube(2, 0.0, 1.0).unwrap();
        let obj = Deterministic::new(dom, |x: &[f64]| -(x[0] + x[1]));
        let s = run(&obj, &[1.0, 1.0], 30);
        assert_eq!(s.iterate(), &[1.0, 1.0]);
        assert!(s.degenerate_directions > 0);
    }

    #[test]
    fn sample_size_grows() {
        let dom = BoxDomain::cube(1, 0.0, 1.0).unwrap();
        let s = TrustRegionSolver::new(TrustRegionConfig::default(), dom, vec![0.5], EstimateStats::default(), 5);
        assert_eq!(s.sample_size(1), 5);
        assert_eq!(s.sample_size(100), 22);
    }
}
