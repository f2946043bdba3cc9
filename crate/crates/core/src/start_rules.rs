//! The four start conditions checked before a local run is launched from a
//! sampled point a:
//!
//! * S1: no point z of S within r_k of a is probabilistically better than a.
//! * S2: a is farther than omega from every identified minimum.
//! * S3: a is at least tau away from the boundary of the domain.
//! * S4: a has not started a local run before.

use serde::{Deserialize, Serialize};

use crate::domain::{distance, BoxDomain};
use crate::driver::MansoState;
use crate::error::{Error, Result};
use crate::sample::SamplePoint;

/// Relative slack on the `bound <= beta` comparison so that an exact tie in
/// the means is classified as "better" despite rounding in sqrt/square.
const BOUND_TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartRuleConfig {
    pub beta: f64,
    pub omega: f64,
    pub tau: f64,
    /// Raw evaluations per sampled point.
    pub n: u64,
    /// Multiplier on the Chebyshev threshold epsilon. 1 gives the plain rule.
    #[serde(default = "default_margin")]
    pub epsilon_multiplier: f64,
}

fn default_margin() -> f64 {
    1.0
}

impl StartRuleConfig {
    pub fn new(beta: f64, omega: f64, tau: f64, n: u64) -> Result<Self> {
        let cfg = Self {
            beta,
            omega,
            tau,
            n,
            epsilon_multiplier: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 0.5) {
            return Err(Error::config("beta", format!("must lie in (0, 1/2), got {}", self.beta)));
        }
        if !(self.omega > 0.0) {
            return Err(Error::config("omega", format!("must be positive, got {}", self.omega)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::config("tau", format!("must be positive, got {}", self.tau)));
        }
        if self.n < 2 {
            return Err(Error::config(
                "n",
                format!("need at least 2 samples per point to estimate a variance, got {}", self.n),
            ));
        }
        if !(self.epsilon_multiplier > 0.0) {
            return Err(Error::config(
                "epsilon_multiplier",
                format!("must be positive, got {}", self.epsilon_multiplier),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StartRule {
    S1,
    S2,
    S3,
    S4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StartDecision {
    pub start: bool,
    pub rejected_by: Option<StartRule>,
    /// Index of the point that defeated S1.
    pub witness: Option<usize>,
}

impl StartDecision {
    pub fn accept() -> Self {
        Self {
            start: true,
            rejected_by: None,
            witness: None,
        }
    }

    pub fn reject(rule: StartRule) -> Self {
        Self {
            start: false,
            rejected_by: Some(rule),
            witness: None,
        }
    }
}

/// Chebyshev upper bound on `P(fz - fa > eps)` with the plug-in threshold
/// `eps = sqrt(var_diff / beta)`.
pub fn chebyshev_prob_bound(mean_diff: f64, var_diff: f64, beta: f64) -> Result<f64> {
    chebyshev_prob_bound_with_margin(mean_diff, var_diff, beta, 1.0)
}

/// As [`chebyshev_prob_bound`] with `eps = margin * sqrt(var_diff / beta)`.
pub fn chebyshev_prob_bound_with_margin(
    mean_diff: f64,
    var_diff: f64,
    beta: f64,
    margin: f64,
) -> Result<f64> {
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::InvalidArgument(format!("beta must lie in (0, 1/2), got {beta}")));
    }
    if !(var_diff >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "variance of the difference must be nonnegative, got {var_diff}"
        )));
    }
    if var_diff == 0.0 {
        return Ok(if mean_diff <= 0.0 { 0.0 } else { 1.0 });
    }
    let eps = margin * (var_diff / beta).sqrt();
    if mean_diff >= eps {
        return Ok(1.0);
    }
    let gap = eps - mean_diff;
    Ok((var_diff / (gap * gap)).min(1.0))
}

/// True when `z` is probabilistically better than `a`. Estimates at distinct
/// points come from independent noise, so the covariance term is zero.
pub fn is_probabilistically_better(a: &SamplePoint, z: &SamplePoint, cfg: &StartRuleConfig) -> bool {
    let mean_diff = z.stats.mean() - a.stats.mean();
    let var_diff = z.stats.var_of_mean() + a.stats.var_of_mean();
    match chebyshev_prob_bound_with_margin(mean_diff, var_diff, cfg.beta, cfg.epsilon_multiplier) {
        Ok(bound) => bound <= cfg.beta * (1.0 + BOUND_TIE_RTOL),
        Err(_) => false,
    }
}

/// S1 against an explicit candidate list. `a` itself is skipped if it is
/// part of `candidates`.
pub fn check_s1(a: &SamplePoint, candidates: &[SamplePoint], r_k: f64, cfg: &StartRuleConfig) -> StartDecision {
    for (i, z) in candidates.iter().enumerate() {
        if std::ptr::eq(z, a) {
            continue;
        }
        if distance(&z.x, &a.x) <= r_k && is_probabilistically_better(a, z, cfg) {
            return StartDecision {
                start: false,
                rejected_by: Some(StartRule::S1),
                witness: Some(i),
            };
        }
    }
    StartDecision::accept()
}

/// S2: `a` lies outside every closed omega-ball around identified minima.
pub fn check_s2<'a, I>(a: &[f64], identified: I, omega: f64) -> bool
where
    I: IntoIterator<Item = &'a [f64]>,
{
    identified.into_iter().all(|x| distance(a, x) > omega)
}

/// S3: `a` lies outside the open tau-neighbourhood of the boundary.
pub fn check_s3(a: &[f64], domain: &BoxDomain, tau: f64) -> bool {
    domain.boundary_slack(a) >= tau
}

/// Applies S4, S3, S2, S1 in that order to point `index` of `state`'s
/// sample set.
pub fn evaluate_start_conditions(
    index: usize,
    state: &MansoState,
    r_k: f64,
    cfg: &StartRuleConfig,
) -> StartDecision {
    let record = &state.samples()[index];
    if record.started {
        return StartDecision::reject(StartRule::S4);
    }
    let a = &record.point;
    if !check_s3(&a.x, state.domain(), cfg.tau) {
        return StartDecision::reject(StartRule::S3);
    }
    if !check_s2(&a.x, state.identified().iter().map(|m| m.center.as_slice()), cfg.omega) {
        return StartDecision::reject(StartRule::S2);
    }
    for (i, z) in state.samples().iter().enumerate() {
        if i == index {
            continue;
        }
        if distance(&z.point.x, &a.x) <= r_k && is_probabilistically_better(a, &z.point, cfg) {
            return StartDecision {
                start: false,
                rejected_by: Some(StartRule::S1),
                witness: Some(i),
            };
        }
    }
    StartDecision::accept()
}
