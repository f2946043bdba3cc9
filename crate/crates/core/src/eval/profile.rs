//! Identification radius, first-hit times and data profiles.

use serde::{Deserialize, Serialize};

use crate::domain::{ball_radius_for_volume, distance};
use crate::driver::{Event, EventKind};
use crate::error::{Error, Result};

/// Radius of the ball whose volume is `zeta` times `volume`.
pub fn identification_radius(d: usize, volume: f64, zeta: f64) -> f64 {
    assert!(zeta > 0.0, "zeta must be positive, got {zeta}");
    ball_radius_for_volume(d, volume * zeta)
}

/// Volume of the d-ball of radius `r`.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    let d = d as f64;
    (0.5 * d * std::f64::consts::PI.ln() + d * r.ln() - libm::lgamma(1.0 + 0.5 * d)).exp()
}

/// Evaluated points in order, each keyed by the index of its first
/// evaluation. A point evaluated m times occupies indices
/// `eval_index..eval_index + m`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSet {
    entries: Vec<(u64, Vec<f64>)>,
}

impl EvaluationSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a point; `eval_index` must exceed every earlier index.
    pub fn push(&mut self, eval_index: u64, x: Vec<f64>) -> Result<()> {
        if let Some((last, _)) = self.entries.last() {
            if eval_index <= *last {
                return Err(Error::InvalidArgument(format!(
                    "eval index {eval_index} does not exceed previous index {last}"
                )));
            }
        }
        if eval_index == 0 {
            return Err(Error::InvalidArgument("eval indices start at 1".into()));
        }
        self.entries.push((eval_index, x));
        Ok(())
    }

    /// Sample and step events of a run's event log.
    pub fn from_events(events: &[Event]) -> Result<Self> {
        let mut set = Self::new();
        for e in events {
            if matches!(e.event, EventKind::Sample | EventKind::Step) {
                set.push(e.eval_index, e.x.clone())?;
            }
        }
        Ok(set)
    }

    pub fn entries(&self) -> &[(u64, Vec<f64>)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Smallest eval index whose point lies within `rho` of `x_star`.
pub fn first_hit_time(set: &EvaluationSet, x_star: &[f64], rho: f64) -> Option<u64> {
    set.entries
        .iter()
        .find(|(_, x)| distance(x, x_star) <= rho)
        .map(|(t, _)| *t)
}

/// `e`-grid of `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataProfile {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub problem_count: usize,
}

impl DataProfile {
    /// Profile value at the largest grid point.
    pub fn final_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Fraction of problems whose first hit happened by each grid value.
pub fn data_profile(hits: &[Option<u64>], grid: &[f64]) -> Result<DataProfile> {
    if hits.is_empty() {
        return Err(Error::InvalidArgument("data profile needs at least one problem".into()));
    }
    let p = hits.len() as f64;
    let values = grid
        .iter()
        .map(|&e| hits.iter().filter(|t| t.is_some_and(|t| t as f64 <= e)).count() as f64 / p)
        .collect();
    Ok(DataProfile {
        grid: grid.to_vec(),
        values,
        problem_count: hits.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn branin_radius() {
        let rho = identification_radius(2, 225.0, 1e-3);
        let expected = (225.0f64 * 1e-3).sqrt() / std::f64::consts::PI.sqrt();
        assert!((rho - expected).abs() < 1e-14);
        assert!((rho - 0.267_618_617_422_915_65).abs() < 1e-15);
    }

    #[test]
    fn whole_interval() {
        assert!((identification_radius(1, 7.0, 1.0) - 3.5).abs() < 1e-14);
    }

    #[test]
    fn volume_round_trip() {
        for d in 1..=12 {
            let rho = identification_radius(d, 1e4, 1e-4);
            assert!((ball_volume(d, rho) / 1e4 - 1e-4).abs() < 1e-4 * 1e-10, "d = {d}");
        }
    }

    fn set(points: &[(u64, f64)]) -> EvaluationSet {
        let mut s = EvaluationSet::new();
        for (t, x) in points {
            s.push(*t, vec![*x]).unwrap();
        }
        s
    }

    #[test]
    fn hit_times() {
        let s = set(&[(1, 5.0), (6, 3.0), (37, 0.05), (40, 0.0)]);
        assert_eq!(first_hit_time(&s, &[0.0], 0.1), Some(37));
        assert_eq!(first_hit_time(&s, &[5.0], 0.1), Some(1));
        assert_eq!(first_hit_time(&s, &[9.0], 0.1), None);
    }

    #[test]
    fn indices_must_increase() {
        let mut s = set(&[(3, 0.0)]);
        assert!(s.push(3, vec![1.0]).is_err());
        assert!(EvaluationSet::new().push(0, vec![1.0]).is_err());
    }

    #[test]
    fn profile_counts() {
        let p = data_profile(&[Some(10), Some(20), None, None], &[15.0, 25.0, 1e9]).unwrap();
        assert_eq!(p.values, vec![0.25, 0.5, 0.5]);
        let all = data_profile(&[Some(1); 3], &[1.0, 10.0]).unwrap();
        assert_eq!(all.values, vec![1.0, 1.0]);
        assert!(data_profile(&[], &[1.0]).is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(5.0, 20_000.0, 200);
        assert_eq!(g.len(), 200);
        assert!((g[0] - 5.0).abs() < 1e-12);
        assert_eq!(g[199], 20_000.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    proptest! {
        #[test]
        fn profile_is_monotone(hits in prop::collection::vec(prop::option::of(1u64..1000), 1..20)) {
            let p = data_profile(&hits, &log_grid(1.0, 1000.0, 50)).unwrap();
            prop_assert!(p.values.windows(2).all(|w| w[0] <= w[1]));
            for v in &p.values {
                let scaled = v * hits.len() as f64;
                prop_assert!((scaled - scaled.round()).abs() < 1e-9);
            }
        }

        #[test]
        fn hit_is_first_within_radius(xs in prop::collection::vec(-1.0f64..1.0, 1..40), rho in 0.01f64..0.5) {
            let s = set(&xs.iter().enumerate().map(|(i, x)| (i as u64 * 3 + 1, *x)).collect::<Vec<_>>());
            match first_hit_time(&s, &[0.0], rho) {
                Some(t) => {
                    let pos = s.entries().iter().position(|(i, _)| *i == t).unwrap();
                    prop_assert!(s.entries()[pos].1[0].abs() <= rho);
                    prop_assert!(s.entries()[..pos].iter().all(|(_, x)| x[0].abs() > rho));
                }
                None => prop_assert!(xs.iter().all(|x| x.abs() > rho)),
            }
        }
    }
}
