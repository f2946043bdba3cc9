//! Experiment configuration files.
//!
//! ```toml
//! name = "branin"
//! seed = 1
//! instances = 10
//! budget = 20000
//! zeta = 1e-3
//!
//! [problem]
//! kind = "branin"          # "branin" | "shekel" | "qaoa"
//! noise_sigma = 1.0        # branin, shekel
//! # dim = 4                # shekel
//! # depth = 1              # qaoa
//! # shots = 256            # qaoa
//! # graph = "petersen"     # qaoa: "petersen", "complete:<k>" or an edge-list path
//!
//! [[method]]
//! name = "manso"
//! kind = "manso"
//! beta = 0.1
//! omega = 0.05
//! tau = 0.01
//! n = 5
//! sigma = 5.0
//! max_active_runs = 10
//! solver = { kind = "trust-region" }
//!
//! [[method]]
//! name = "random"
//! kind = "random-search"
//! n = 5
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::driver::MansoConfig;
use crate::error::{Error, Result};
use crate::local_search::SolverConfig;
use crate::start_rules::StartRuleConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub instances: u64,
    pub budget: u64,
    pub zeta: f64,
    pub problem: ProblemConfig,
    #[serde(rename = "method")]
    pub methods: Vec<MethodConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemConfig {
    Branin(BraninProblem),
    Shekel(ShekelProblem),
    Qaoa(QaoaProblem),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BraninProblem {
    #[serde(default = "unit_noise")]
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShekelProblem {
    pub dim: usize,
    #[serde(default = "unit_noise")]
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaoaProblem {
    pub depth: usize,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default = "default_graph")]
    pub graph: String,
}

fn unit_noise() -> f64 {
    1.0
}

fn default_shots() -> u64 {
    crate::qaoa::DEFAULT_SHOTS
}

fn default_graph() -> String {
    "petersen".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MethodConfig {
    Manso(MansoMethod),
    RandomSearch(RandomSearchMethod),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MansoMethod {
    pub name: String,
    pub beta: f64,
    pub omega: f64,
    pub tau: f64,
    pub n: u64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_cap")]
    pub max_active_runs: usize,
    #[serde(default = "default_margin")]
    pub epsilon_multiplier: f64,
    #[serde(default = "default_window")]
    pub identification_window: usize,
    #[serde(default)]
    pub min_internal_radius: Option<f64>,
    #[serde(default)]
    pub proximity_check_every_evals: Option<u64>,
    #[serde(default)]
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSearchMethod {
    pub name: String,
    pub n: u64,
}

fn default_sigma() -> f64 {
    5.0
}

fn default_cap() -> usize {
    10
}

fn default_margin() -> f64 {
    1.0
}

fn default_window() -> usize {
    10
}

impl MethodConfig {
    pub fn name(&self) -> &str {
        match self {
            MethodConfig::Manso(m) => &m.name,
            MethodConfig::RandomSearch(m) => &m.name,
        }
    }

    /// Evaluations per sampled point.
    pub fn n(&self) -> u64 {
        match self {
            MethodConfig::Manso(m) => m.n,
            MethodConfig::RandomSearch(m) => m.n,
        }
    }
}

impl MansoMethod {
    /// Driver configuration for one instance.
    pub fn driver_config(&self, budget: u64, seed: u64) -> MansoConfig {
        MansoConfig {
            rules: StartRuleConfig {
                beta: self.beta,
                omega: self.omega,
                tau: self.tau,
                n: self.n,
                epsilon_multiplier: self.epsilon_multiplier,
            },
            sigma: self.sigma,
            max_active_runs: self.max_active_runs,
            evals_budget: budget,
            solver: self.solver.clone(),
            identification_window: self.identification_window,
            min_internal_radius: self.min_internal_radius,
            proximity_check_every_evals: self.proximity_check_every_evals,
            seed,
        }
    }
}

fn prefix(err: Error, path: &str) -> Error {
    match err {
        Error::InvalidConfig { field, reason } => Error::InvalidConfig {
            field: format!("{path}.{field}"),
            reason,
        },
        other => other,
    }
}

fn check_name(name: &str, field: &str) -> Result<()> {
    let ok = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, format!("`{name}` must be non-empty and use only [A-Za-z0-9_-]")))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start].lines().count().max(1));
            Error::Parse {
                line,
                reason: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Checks everything that does not need the problem instance.
    pub fn validate(&self) -> Result<()> {
        check_name(&self.name, "name")?;
        if self.instances < 1 {
            return Err(Error::config("instances", "must be at least 1"));
        }
        if self.budget < 1 {
            return Err(Error::config("budget", "must be at least 1"));
        }
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return Err(Error::config("zeta", format!("must lie in (0, 1], got {}", self.zeta)));
        }
        match &self.problem {
            ProblemConfig::Branin(p) => check_noise(p.noise_sigma)?,
            ProblemConfig::Shekel(p) => {
                check_noise(p.noise_sigma)?;
                if p.dim < 1 {
                    return Err(Error::config("problem.dim", "must be at least 1"));
                }
            }
            ProblemConfig::Qaoa(p) => {
                if p.depth < 1 {
                    return Err(Error::config("problem.depth", "must be at least 1"));
                }
                if p.shots < 1 {
                    return Err(Error::config("problem.shots", "must be at least 1"));
                }
            }
        }
        if self.methods.is_empty() {
            return Err(Error::config("method", "at least one method is required"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            let path = format!("method[{i}]");
            check_name(m.name(), &format!("{path}.name"))?;
            if self.methods[..i].iter().any(|o| o.name() == m.name()) {
                return Err(Error::config(format!("{path}.name"), format!("duplicate method name `{}`", m.name())));
            }
            match m {
                MethodConfig::Manso(mm) => mm.driver_config(self.budget, self.seed).validate().map_err(|e| prefix(e, &path))?,
                MethodConfig::RandomSearch(r) => {
                    if r.n < 1 {
                        return Err(Error::config(format!("{path}.n"), "must be at least 1"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_noise(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::config("problem.noise_sigma", format!("must be finite and non-negative, got {sigma}")));
    }
    Ok(())
}
