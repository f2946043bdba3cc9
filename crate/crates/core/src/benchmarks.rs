//! Noisy synthetic test problems and their registries of true minima.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::domain::{distance, BoxDomain};
use crate::error::{Error, Result};
use crate::objective::StochasticObjective;
use crate::rng::RngStream;

/// Weights of the ten Shekel terms; the smallest marks the global minimum.
pub const SHEKEL_WEIGHTS: [f64; 10] = [0.1, 0.2, 0.2, 0.4, 0.4, 0.6, 0.3, 0.7, 0.5, 0.5];

/// Classical four-dimensional Shekel centres, one row per term.
pub const SHEKEL_CENTERS_4D: [[f64; 4]; 10] = [
    [4.0, 4.0, 4.0, 4.0],
    [1.0, 1.0, 1.0, 1.0],
    [8.0, 8.0, 8.0, 8.0],
    [6.0, 6.0, 6.0, 6.0],
    [3.0, 7.0, 3.0, 7.0],
    [2.0, 9.0, 2.0, 9.0],
    [5.0, 5.0, 3.0, 3.0],
    [8.0, 1.0, 8.0, 1.0],
    [6.0, 2.0, 6.0, 2.0],
    [7.0, 3.6, 7.0, 3.6],
];

/// Default omega used when checking that registered minima are separated.
pub const DEFAULT_OMEGA: f64 = 0.05;

/// Gradient norm (central differences) below which a point counts as
/// stationary.
pub const STATIONARITY_TOL: f64 = 1e-6;

const BRANIN_B: f64 = 5.1 / (4.0 * PI * PI);
const BRANIN_C: f64 = 5.0 / PI;
const BRANIN_T: f64 = 1.0 / (8.0 * PI);

/// Branin-Hoo function on R^2.
pub fn branin(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let q = x2 - BRANIN_B * x1 * x1 + BRANIN_C * x1 - 6.0;
    q * q + 10.0 * (1.0 - BRANIN_T) * x1.cos() + 10.0
}

/// The three global minimizers of Branin-Hoo, all with value 10/(8 pi).
pub fn branin_minima() -> Vec<Vec<f64>> {
    vec![vec![-PI, 12.275], vec![PI, 2.275], vec![3.0 * PI, 2.475]]
}

pub fn branin_domain() -> BoxDomain {
    BoxDomain::new(vec![-5.0, 0.0], vec![10.0, 15.0]).expect("static bounds")
}

/// Shekel function with centres `centers[i]` and weights `weights[i]`,
/// scaled by `2^(4 - d)` so that basin widths grow with dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ShekelFunction {
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    scale: f64,
}

impl ShekelFunction {
    pub fn new(centers: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if centers.is_empty() || centers.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "need one weight per centre, got {} centres and {} weights",
                centers.len(),
                weights.len()
            )));
        }
        let d = centers[0].len();
        if d == 0 || centers.iter().any(|c| c.len() != d) {
            return Err(Error::InvalidArgument("centres must share a positive dimension".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
            return Err(Error::InvalidArgument(format!("Shekel weights must be positive, got {w}")));
        }
        Ok(Self {
            scale: 2f64.powi(4 - d as i32),
            centers,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        -self
            .centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| 1.0 / (self.scale * crate::domain::distance_sq(x, c) + w))
            .sum::<f64>()
    }

    fn gradient_hessian(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = x.len();
        let mut g = vec![0.0; d];
        let mut h = vec![vec![0.0; d]; d];
        let s = self.scale;
        for (c, w) in self.centers.iter().zip(&self.weights) {
            let diff: Vec<f64> = x.iter().zip(c).map(|(a, b)| a - b).collect();
            let u = s * diff.iter().map(|v| v * v).sum::<f64>() + w;
            let u2 = u * u;
            for i in 0..d {
                g[i] += 2.0 * s * diff[i] / u2;
                h[i][i] += 2.0 * s / u2;
                for j in 0..d {
                    h[i][j] -= 8.0 * s * s * diff[i] * diff[j] / (u2 * u);
                }
            }
        }
        (g, h)
    }

    /// Newton iteration from `start` towards the nearby stationary point.
    fn refine(&self, start: &[f64]) -> Option<Vec<f64>> {
        let mut x = start.to_vec();
        for _ in 0..100 {
            let (g, h) = self.gradient_hessian(&x);
            if g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-14 {
                break;
            }
            let step = solve(h, g)?;
            for (xi, si) in x.iter_mut().zip(&step) {
                *xi -= si;
            }
        }
        let (g, h) = self.gradient_hessian(&x);
        let converged = g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-10;
        (converged && cholesky_ok(h)).then_some(x)
    }
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// True when the symmetric matrix is positive definite.
fn cholesky_ok(mut a: Vec<Vec<f64>>) -> bool {
    let n = a.len();
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / d;
        }
    }
    true
}

/// Central-difference gradient norm.
pub fn numerical_gradient_norm<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> f64 {
    let h = 1e-5;
    let mut y = x.to_vec();
    let mut sq = 0.0;
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let fp = f(&y);
        y[i] = x[i] - h;
        let fm = f(&y);
        y[i] = x[i];
        let g = (fp - fm) / (2.0 * h);
        sq += g * g;
    }
    sq.sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub enum BenchmarkKind {
    Branin,
    Shekel(ShekelFunction),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub location: Vec<f64>,
    pub value: f64,
}

/// A noisy benchmark: deterministic part plus N(0, noise_sigma^2) per raw
/// evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkProblem {
    pub name: String,
    pub domain: BoxDomain,
    pub kind: BenchmarkKind,
    pub noise_sigma: f64,
    pub minima: Vec<Minimum>,
}

impl BenchmarkProblem {
    pub fn branin(noise_sigma: f64) -> Self {
        let minima = branin_minima()
            .into_iter()
            .map(|location| Minimum {
                value: branin(&location),
                location,
            })
            .collect();
        Self {
            name: "branin".into(),
            domain: branin_domain(),
            kind: BenchmarkKind::Branin,
            noise_sigma,
            minima,
        }
    }

    /// Shekel problem on `[0, 10]^d` with ten terms.
    ///
    /// For d = 4 the classical centres are used. Larger d repeats each
    /// centre's 4-pattern cyclically. If any centre then fails to refine to
    /// a distinct interior local minimum, the centres are re-drawn with
    /// Gaussian jitter from a fixed seed until all ten pass.
    pub fn shekel(d: usize, noise_sigma: f64) -> Result<Self> {
        if d < 1 {
            return Err(Error::InvalidArgument("Shekel dimension must be positive".into()));
        }
        let domain = BoxDomain::cube(d, 0.0, 10.0)?;
        let base: Vec<Vec<f64>> = SHEKEL_CENTERS_4D
            .iter()
            .map(|row| (0..d).map(|j| row[j % 4]).collect())
            .collect();
        let mut jitter_rng = RngStream::new(0x5eed_5eed, d as u64);
        let mut centers = base.clone();
        for attempt in 0..200 {
            let f = ShekelFunction::new(centers.clone(), SHEKEL_WEIGHTS.to_vec())?;
            if let Some(minima) = shekel_minima(&f, &domain) {
                return Ok(Self {
                    name: format!("shekel{d}"),
                    domain,
                    kind: BenchmarkKind::Shekel(f),
                    noise_sigma,
                    minima,
                });
            }
            let spread = 0.25 * (1 + attempt / 10) as f64;
            centers = base
                .iter()
                .map(|c| {
                    c.iter()
                        .map(|v| (v + spread * jitter_rng.sample::<f64, _>(StandardNormal)).clamp(1.0, 9.0))
                        .collect()
                })
                .collect();
        }
        Err(Error::InvalidArgument(format!("could not build a separated Shekel instance for d = {d}")))
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn noiseless(&self, x: &[f64]) -> f64 {
        match &self.kind {
            BenchmarkKind::Branin => branin(x),
            BenchmarkKind::Shekel(f) => f.eval(x),
        }
    }

    pub fn minima_locations(&self) -> Vec<Vec<f64>> {
        self.minima.iter().map(|m| m.location.clone()).collect()
    }

    /// Smallest pairwise distance between registered minima.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.minima.iter().enumerate() {
            for b in &self.minima[i + 1..] {
                best = best.min(distance(&a.location, &b.location));
            }
        }
        best
    }

    /// Rejects an omega that is not below half the minimum separation.
    pub fn check_omega(&self, omega: f64) -> Result<()> {
        let eta = self.min_separation();
        if !(2.0 * omega < eta) {
            return Err(Error::config(
                "omega",
                format!("2 * omega = {} must be below the minimum separation {eta} of {}", 2.0 * omega, self.name),
            ));
        }
        Ok(())
    }

    /// `|f(x_i*) + 1/c_i|` for each Shekel minimum; empty for other kinds.
    pub fn weight_fidelity(&self) -> Vec<f64> {
        match &self.kind {
            BenchmarkKind::Shekel(f) => self
                .minima
                .iter()
                .zip(f.weights())
                .map(|(m, w)| (m.value + 1.0 / w).abs())
                .collect(),
            BenchmarkKind::Branin => Vec::new(),
        }
    }

    /// Stationarity, interiority and separation of the registry.
    pub fn validate_registry(&self) -> Result<()> {
        for (i, m) in self.minima.iter().enumerate() {
            if self.domain.boundary_slack(&m.location) <= 0.0 {
                return Err(Error::InvalidArgument(format!("minimum {i} is not interior")));
            }
            let g = numerical_gradient_norm(|x| self.noiseless(x), &m.location);
            if !(g < STATIONARITY_TOL) {
                return Err(Error::InvalidArgument(format!("minimum {i} is not stationary (|grad| = {g:e})")));
            }
        }
        self.check_omega(DEFAULT_OMEGA)
    }

    /// Serializes the problem as a plain-text registry table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "name {}", self.name);
        let _ = writeln!(out, "dim {}", self.dim());
        let _ = writeln!(out, "noise_sigma {:?}", self.noise_sigma);
        let _ = writeln!(out, "lower {}", fmt(self.domain.lower()));
        let _ = writeln!(out, "upper {}", fmt(self.domain.upper()));
        match &self.kind {
            BenchmarkKind::Branin => {
                let _ = writeln!(out, "kind branin");
            }
            BenchmarkKind::Shekel(f) => {
                let _ = writeln!(out, "kind shekel");
                for c in f.centers() {
                    let _ = writeln!(out, "center {}", fmt(c));
                }
                let _ = writeln!(out, "weights {}", fmt(f.weights()));
            }
        }
        for m in &self.minima {
            let _ = writeln!(out, "minimum {} value {:?}", fmt(&m.location), m.value);
        }
        out
    }

    /// Parses a table written by [`to_table`](Self::to_table).
    pub fn from_table(text: &str) -> Result<Self> {
        let mut name = None;
        let mut noise_sigma = None;
        let mut lower = None;
        let mut upper = None;
        let mut kind = None;
        let mut centers = Vec::new();
        let mut weights = None;
        let mut minima = Vec::new();
        let mut dim = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| Error::Parse { line: lineno + 1, reason };
            let (key, rest) = line.split_once(' ').ok_or_else(|| err(format!("missing value in `{line}`")))?;
            let nums = |s: &str| -> Result<Vec<f64>> {
                s.split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|e| err(format!("bad number `{t}`: {e}"))))
                    .collect()
            };
            match key {
                "name" => name = Some(rest.trim().to_string()),
                "dim" => dim = Some(rest.trim().parse::<usize>().map_err(|e| err(e.to_string()))?),
                "noise_sigma" => noise_sigma = Some(nums(rest)?.first().copied().ok_or_else(|| err("empty".into()))?),
                "lower" => lower = Some(nums(rest)?),
                "upper" => upper = Some(nums(rest)?),
                "kind" => kind = Some(rest.trim().to_string()),
                "center" => centers.push(nums(rest)?),
                "weights" => weights = Some(nums(rest)?),
                "minimum" => {
                    let (loc, value) = rest
                        .split_once(" value ")
                        .ok_or_else(|| err("minimum needs `value`".into()))?;
                    let value = nums(value)?.first().copied().ok_or_else(|| err("empty value".into()))?;
                    minima.push(Minimum { location: nums(loc)?, value });
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        let missing = |what: &str| Error::Parse { line: 0, reason: format!("missing `{what}`") };
        let domain = BoxDomain::new(lower.ok_or_else(|| missing("lower"))?, upper.ok_or_else(|| missing("upper"))?)?;
        if let Some(d) = dim {
            if d != domain.dim() {
                return Err(Error::Parse { line: 0, reason: format!("dim {d} does not match bounds") });
            }
        }
        let kind = match kind.as_deref() {
            Some("branin") => BenchmarkKind::Branin,
            Some("shekel") => BenchmarkKind::Shekel(ShekelFunction::new(centers, weights.ok_or_else(|| missing("weights"))?)?),
            Some(other) => return Err(Error::Parse { line: 0, reason: format!("unknown kind `{other}`") }),
            None => return Err(missing("kind")),
        };
        Ok(Self {
            name: name.ok_or_else(|| missing("name"))?,
            domain,
            kind,
            noise_sigma: noise_sigma.ok_or_else(|| missing("noise_sigma"))?,
            minima,
        })
    }
}

fn shekel_minima(f: &ShekelFunction, domain: &BoxDomain) -> Option<Vec<Minimum>> {
    let mut minima: Vec<Minimum> = Vec::with_capacity(f.centers().len());
    for c in f.centers() {
        let x = f.refine(c)?;
        if domain.boundary_slack(&x) <= 0.0 || distance(&x, c) > 1.0 {
            return None;
        }
        if numerical_gradient_norm(|y| f.eval(y), &x) >= STATIONARITY_TOL {
            return None;
        }
        if minima.iter().any(|m| distance(&m.location, &x) <= 2.0 * DEFAULT_OMEGA) {
            return None;
        }
        minima.push(Minimum { value: f.eval(&x), location: x });
    }
    Some(minima)
}

/// Noiseless value plus one draw of N(0, noise_sigma^2).
pub fn noisy_eval(problem: &BenchmarkProblem, x: &[f64], rng: &mut RngStream) -> f64 {
    let base = problem.noiseless(x);
    if problem.noise_sigma == 0.0 {
        return base;
    }
    base + problem.noise_sigma * rng.sample::<f64, _>(StandardNormal)
}

impl StochasticObjective for BenchmarkProblem {
    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn sample(&self, x: &[f64], rng: &mut RngStream) -> f64 {
        noisy_eval(self, x, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branin_origin() {
        let expected = 36.0 + 10.0 * (1.0 - 1.0 / (8.0 * PI)) + 10.0;
        assert!((branin(&[0.0, 0.0]) - expected).abs() < 1e-12);
        assert!((branin(&[0.0, 0.0]) - 55.6021).abs() < 1e-3);
    }

    #[test]
    fn branin_minima_share_value() {
        for m in branin_minima() {
            assert!((branin(&m) - 0.397_887_357_729_738).abs() < 1e-12);
            assert!(numerical_gradient_norm(branin, &m) < STATIONARITY_TOL);
        }
    }

    #[test]
    fn branin_quadratic_term_vanishes_on_parabola() {
        for &x1 in &[-4.0, -1.0, 0.5, 2.0, 7.0] {
            let x2 = BRANIN_B * x1 * x1 - BRANIN_C * x1 + 6.0;
            let expected = 10.0 * (1.0 - BRANIN_T) * f64::cos(x1) + 10.0;
            assert!((branin(&[x1, x2]) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn shekel_direct_sum_at_first_center() {
        let p = BenchmarkProblem::shekel(4, 1.0).unwrap();
        let BenchmarkKind::Shekel(f) = &p.kind else { unreachable!() };
        let x = f.centers()[0].clone();
        let direct: f64 = -f
            .centers()
            .iter()
            .zip(SHEKEL_WEIGHTS)
            .map(|(c, w)| 1.0 / (c.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() + w))
            .sum::<f64>();
        assert_eq!(f.eval(&x), direct);
        assert!(f.eval(&x) <= -10.0);
    }

    #[test]
    fn shekel_4d_keeps_classical_centers() {
        let p = BenchmarkProblem::shekel(4, 1.0).unwrap();
        let BenchmarkKind::Shekel(f) = &p.kind else { unreachable!() };
        for (c, row) in f.centers().iter().zip(SHEKEL_CENTERS_4D) {
            assert_eq!(c.as_slice(), row.as_slice());
        }
        assert_eq!(f.scale, 1.0);
    }

    #[test]
    fn shekel_increases_away_from_centers() {
        let p = BenchmarkProblem::shekel(4, 1.0).unwrap();
        let far = [20.0; 4];
        let farther = [40.0; 4];
        let a = p.noiseless(&far);
        let b = p.noiseless(&farther);
        assert!(a < b && b < 0.0);
    }

    #[test]
    fn shekel_rejects_nonpositive_weight() {
        assert!(ShekelFunction::new(vec![vec![1.0]], vec![0.0]).is_err());
    }

    #[test]
    fn registries_are_valid() {
        BenchmarkProblem::branin(1.0).validate_registry().unwrap();
        for d in [4, 6, 8] {
            let p = BenchmarkProblem::shekel(d, 1.0).unwrap();
            assert_eq!(p.minima.len(), 10, "d = {d}");
            p.validate_registry().unwrap();
        }
    }

    #[test]
    fn shekel_ten_has_no_separated_instance() {
        // at scale 2^-6 the shallowest wells merge into their neighbours
        assert!(BenchmarkProblem::shekel(10, 1.0).is_err());
    }

    #[test]
    fn registry_table_round_trip() {
        for p in [BenchmarkProblem::branin(1.0), BenchmarkProblem::shekel(6, 0.5).unwrap()] {
            let back = BenchmarkProblem::from_table(&p.to_table()).unwrap();
            assert_eq!(back, p);
        }
    }

    #[test]
    fn noise_free_eval_is_exact() {
        let p = BenchmarkProblem::branin(0.0);
        let mut rng = RngStream::new(1, 1);
        assert_eq!(noisy_eval(&p, &[1.0, 2.0], &mut rng), branin(&[1.0, 2.0]));
    }

    #[test]
    fn noise_moments() {
        let p = BenchmarkProblem::branin(1.0);
        let mut rng = RngStream::new(12, 1);
        let x = [1.0, 2.0];
        let draws: Vec<f64> = (0..10_000).map(|_| noisy_eval(&p, &x, &mut rng)).collect();
        let stats = crate::estimate::EstimateStats::from_samples(&draws);
        assert!((stats.mean() - branin(&x)).abs() < 0.05);
        assert!((stats.sample_variance() - 1.0).abs() < 0.1);
    }
}
