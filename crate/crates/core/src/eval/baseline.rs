//! Uniform random search.

use crate::domain::uniform_sample;
use crate::driver::{Event, EventKind};
use crate::objective::{estimate, StochasticObjective};
use crate::rng::{RngStream, SAMPLER_STREAM, SAMPLE_NOISE_STREAM};

/// Draws uniform points, spending `n` evaluations on each, until fewer than
/// `n` evaluations of `budget` remain. Returns one sample event per point.
pub fn random_search_events(objective: &dyn StochasticObjective, budget: u64, n: u64, seed: u64) -> Vec<Event> {
    let mut sampler = RngStream::new(seed, SAMPLER_STREAM);
    let mut noise = RngStream::new(seed, SAMPLE_NOISE_STREAM);
    let mut used = 0;
    let mut events = Vec::new();
    while used + n <= budget {
        let x = uniform_sample(objective.domain(), &mut sampler);
        let stats = estimate(objective, &x, n, &mut noise);
        events.push(Event {
            event: EventKind::Sample,
            k: events.len() as u64,
            eval_index: used + 1,
            run_id: None,
            x,
            value: Some(stats.mean()),
            variance: Some(stats.var_of_mean()),
        });
        used += n;
    }
    events
}

/// Evaluation set of a random search with the given budget.
pub fn random_search_baseline(
    objective: &dyn StochasticObjective,
    budget: u64,
    n: u64,
    seed: u64,
) -> super::EvaluationSet {
    super::EvaluationSet::from_events(&random_search_events(objective, budget, n, seed))
        .expect("random search indices increase")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::BenchmarkProblem;
    use crate::domain::BoxDomain;
    use crate::eval::{first_hit_time, identification_radius};
    use crate::objective::Deterministic;

    #[test]
    fn point_count() {
        let p = BenchmarkProblem::branin(1.0);
        assert_eq!(random_search_baseline(&p, 10, 5, 1).len(), 2);
        assert_eq!(random_search_baseline(&p, 14, 5, 1).len(), 2);
        assert_eq!(random_search_baseline(&p, 4, 5, 1).len(), 0);
    }

    #[test]
    fn replayable() {
        let p = BenchmarkProblem::branin(1.0);
        assert_eq!(random_search_baseline(&p, 500, 5, 3), random_search_baseline(&p, 500, 5, 3));
        assert_ne!(random_search_baseline(&p, 500, 5, 3), random_search_baseline(&p, 500, 5, 4));
    }

    #[test]
    fn hit_rate_matches_binomial() {
        let dom = BoxDomain::cube(2, 0.0, 1.0).unwrap();
        let obj = Deterministic::new(dom, |_: &[f64]| 0.0);
        let zeta = 1e-3;
        let rho = identification_radius(2, 1.0, zeta);
        let (budget, n, reps) = (1000, 5, 1000);
        let hits = (0..reps)
            .filter(|&s| first_hit_time(&random_search_baseline(&obj, budget, n, s), &[0.5, 0.5], rho).is_some())
            .count() as f64;
        let p = 1.0 - (1.0 - zeta).powi((budget / n) as i32);
        let sd = (reps as f64 * p * (1.0 - p)).sqrt();
        assert!((hits - reps as f64 * p).abs() <= 3.0 * sd, "hits {hits}, expected {}", reps as f64 * p);
    }
}
