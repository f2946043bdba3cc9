//! Box-shaped search domains and the radius formulas built on them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Smallest `sigma` accepted by [`radius_schedule`]. Finitely many local
/// starts are only guaranteed for `sigma > 4`.
pub const MIN_SIGMA: f64 = 4.0;

/// Axis-aligned box `[lower, upper]` in R^d with `lower[i] < upper[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidDomain("dimension must be at least 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidDomain(format!(
                "bound lengths differ ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidDomain(format!(
                    "coordinate {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| hi - lo)
    }

    pub fn min_width(&self) -> f64 {
        self.widths().fold(f64::INFINITY, f64::min)
    }

    /// Lebesgue measure m(D).
    pub fn volume(&self) -> f64 {
        self.widths().product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Euclidean projection onto the box (coordinatewise clamp).
    pub fn project(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Distance from an interior point to the boundary of the box.
    pub fn boundary_slack(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| (v - lo).min(hi - v))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }
}

/// Draws a point uniformly from the box; coordinates are independent.
pub fn uniform_sample(domain: &BoxDomain, rng: &mut RngStream) -> Vec<f64> {
    domain
        .lower
        .iter()
        .zip(&domain.upper)
        .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
        .collect()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    distance_sq(a, b).sqrt()
}

pub fn distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Radius of the d-ball whose volume equals `volume_fraction_times_m` after
/// scaling, i.e. `(1/sqrt(pi)) * (Gamma(1 + d/2) * q)^(1/d)`.
///
/// Evaluated in log space; `lgamma` is exact to rounding at the integer and
/// half-integer arguments used here.
pub(crate) fn ball_radius_for_volume(d: usize, q: f64) -> f64 {
    let d = d as f64;
    let log_gamma = libm::lgamma(1.0 + 0.5 * d);
    ((log_gamma + q.ln()) / d).exp() / std::f64::consts::PI.sqrt()
}

/// Critical radius r_k used by the neighbourhood start test.
///
/// `r = (1/sqrt(pi)) * (Gamma(1 + d/2) * m(D) * sigma * ln|S| / |S|)^(1/d)`
pub fn radius_schedule(num_sampled: usize, d: usize, volume: f64, sigma: f64) -> Result<f64> {
    if num_sampled < 2 {
        return Err(Error::InvalidArgument(format!(
            "radius schedule needs at least 2 sampled points, got {num_sampled}"
        )));
    }
    if !(sigma > MIN_SIGMA) {
        return Err(Error::config(
            "sigma",
            format!("must exceed {MIN_SIGMA} for finitely many local starts, got {sigma}"),
        ));
    }
    if d == 0 || !(volume > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need d >= 1 and positive volume, got d = {d}, volume = {volume}"
        )));
    }
    let n = num_sampled as f64;
    Ok(ball_radius_for_volume(d, volume * sigma * n.ln() / n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> BoxDomain {
        BoxDomain::cube(2, 0.0, 1.0).unwrap()
    }

    #[test]
    fn rejects_degenerate_width() {
        assert!(BoxDomain::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(BoxDomain::new(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(BoxDomain::new(vec![], vec![]).is_err());
    }

    #[test]
    fn volume_and_slack() {
        let d = BoxDomain::new(vec![-5.0, 0.0], vec![10.0, 15.0]).unwrap();
        assert_eq!(d.volume(), 225.0);
        assert_eq!(d.boundary_slack(&[0.0, 1.0]), 1.0);
        let mut x = vec![11.0, -1.0];
        d.project(&mut x);
        assert_eq!(x, vec![10.0, 0.0]);
    }

    #[test]
    fn samples_stay_in_box() {
        let d = unit_square();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..1000 {
            assert!(d.contains(&uniform_sample(&d, &mut rng)));
        }
    }

    #[test]
    fn sample_mean_matches_center() {
        let d = BoxDomain::cube(1, 0.0, 10.0).unwrap();
        let mut rng = RngStream::new(5, 0);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| uniform_sample(&d, &mut rng)[0]).sum::<f64>() / n as f64;
        assert!((mean - 5.0).abs() < 0.05, "mean = {mean}");
    }

    #[test]
    fn sampling_replays_per_stream() {
        let d = unit_square();
        let mut a = RngStream::new(9, 2);
        let mut b = RngStream::new(9, 2);
        for _ in 0..10 {
            assert_eq!(uniform_sample(&d, &mut a), uniform_sample(&d, &mut b));
        }
    }

    #[test]
    fn radius_reference_value() {
        // (1/sqrt(pi)) * sqrt(1 * 225 * 5 * ln(100) / 100)
        let r = radius_schedule(100, 2, 225.0, 5.0).unwrap();
        assert!((r - 4.060_917_504).abs() < 1e-8, "r = {r}");
    }

    #[test]
    fn radius_one_dimensional() {
        // Gamma(3/2) = sqrt(pi)/2, so r = (1/2) * 5 * ln 8 / 8
        let r = radius_schedule(8, 1, 1.0, 5.0).unwrap();
        let expected = 0.5 * 5.0 * 8f64.ln() / 8.0;
        assert!((r - expected).abs() < 1e-14 * expected);
    }

    #[test]
    fn radius_shrinks() {
        let big = radius_schedule(1_000, 3, 8.0, 5.0).unwrap();
        let small = radius_schedule(1_000_000, 3, 8.0, 5.0).unwrap();
        assert!(small < big);
    }

    #[test]
    fn radius_argument_guards() {
        assert!(radius_schedule(1, 2, 1.0, 5.0).is_err());
        assert!(radius_schedule(10, 2, 1.0, 4.0).is_err());
        assert!(radius_schedule(10, 2, 1.0, 3.0).is_err());
    }

    #[test]
    fn radius_scales_with_volume_root() {
        for d in 1..=6 {
            let a = radius_schedule(50, d, 3.0, 5.0).unwrap();
            let b = radius_schedule(50, d, 6.0, 5.0).unwrap();
            let ratio = b / a;
            let expected = 2f64.powf(1.0 / d as f64);
            assert!((ratio - expected).abs() < 1e-12, "d = {d}");
        }
    }
}
