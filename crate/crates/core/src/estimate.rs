//! Running estimates of a noisy objective at a fixed point.

use serde::{Deserialize, Serialize};

/// Sample count, sample mean and centred second moment of the raw
/// evaluations taken at one point.
///
/// Pooling uses the pairwise (Chan et al.) merge of `(count, mean, M2)`
/// triples, so the result does not depend on how the raw samples were
/// batched.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimateStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl EstimateStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        Self::default().update(samples)
    }

    /// Summary with `n` samples of the given mean and unbiased variance.
    pub fn from_moments(n: u64, mean: f64, sample_variance: f64) -> Self {
        let m2 = if n < 2 { 0.0 } else { sample_variance * (n - 1) as f64 };
        Self { n, mean, m2 }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Sample mean, the estimate of f(x).
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance of a single raw evaluation. Zero when n < 2.
    pub fn sample_variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Estimated variance of the mean, s^2 / n. Zero when n < 2; callers
    /// that consume it keep n >= 2.
    pub fn var_of_mean(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.sample_variance() / self.n as f64
        }
    }

    pub fn update(&self, samples: &[f64]) -> Self {
        if samples.is_empty() {
            return *self;
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let m2 = samples.iter().map(|s| (s - mean) * (s - mean)).sum();
        self.merge(&Self {
            n: samples.len() as u64,
            mean,
            m2,
        })
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let (na, nb, nt) = (self.n as f64, other.n as f64, n as f64);
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * nb / nt;
        let m2 = self.m2 + other.m2 + delta * delta * na * nb / nt;
        Self { n, mean, m2 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pooled_three_samples() {
        let s = EstimateStats::from_samples(&[1.0, 3.0]).update(&[5.0]);
        assert_eq!(s.n(), 3);
        assert!((s.mean() - 3.0).abs() < 1e-15);
        assert!((s.sample_variance() - 4.0).abs() < 1e-14);
        assert!((s.var_of_mean() - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn moments_round_trip() {
        let s = EstimateStats::from_samples(&[1.0, 2.0, 6.0]);
        let t = EstimateStats::from_moments(3, s.mean(), s.sample_variance());
        assert!((t.var_of_mean() - s.var_of_mean()).abs() < 1e-15);
        assert_eq!(t.mean(), 3.0);
    }

    #[test]
    fn constant_samples_have_zero_variance() {
        let s = EstimateStats::default().update(&[2.5; 7]);
        assert_eq!(s.mean(), 2.5);
        assert_eq!(s.var_of_mean(), 0.0);
    }

    #[test]
    fn order_invariance() {
        let a = EstimateStats::from_samples(&[1.0, 3.0]).update(&[5.0]);
        let b = EstimateStats::from_samples(&[5.0]).update(&[1.0, 3.0]);
        assert!((a.mean() - b.mean()).abs() < 1e-12);
        assert!((a.var_of_mean() - b.var_of_mean()).abs() < 1e-12);
    }

    #[test]
    fn empty_update_is_identity() {
        let a = EstimateStats::from_samples(&[1.0, 2.0]);
        assert_eq!(a.update(&[]), a);
    }

    proptest! {
        #[test]
        fn partition_invariance(
            raw in prop::collection::vec(-1e3f64..1e3, 2..60),
            cuts in prop::collection::vec(0usize..60, 0..6),
        ) {
            let whole = EstimateStats::from_samples(&raw);
            let mut bounds: Vec<usize> = cuts.into_iter().map(|c| c % raw.len()).collect();
            bounds.push(0);
            bounds.push(raw.len());
            bounds.sort_unstable();
            bounds.dedup();
            let mut pooled = EstimateStats::default();
            for w in bounds.windows(2) {
                pooled = pooled.update(&raw[w[0]..w[1]]);
            }
            prop_assert_eq!(pooled.n(), whole.n());
            let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
            prop_assert!(rel(pooled.mean(), whole.mean()) < 1e-10 || (pooled.mean() - whole.mean()).abs() < 1e-10);
            prop_assert!(rel(pooled.var_of_mean(), whole.var_of_mean()) < 1e-10 || (pooled.var_of_mean() - whole.var_of_mean()).abs() < 1e-10);
        }
    }
}
