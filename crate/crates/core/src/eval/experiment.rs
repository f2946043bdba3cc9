//! Running experiments and turning event logs into artifacts.
//!
//! Layout of an artifact directory:
//!
//! ```text
//! config.toml                          copy of the experiment config
//! problem.txt                          problem registry (minima, or QAOA graph)
//! runs/<method>/instance_<p>/events.jsonl
//! hits.csv                             method,problem_instance,minimum_id,first_hit
//! summary.csv                          one row per (method, instance)
//! profiles/<method>__min<id>.csv       method,problem_instance,minimum_id,e,d_value
//! plots/<problem>__min<id>.svg
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::baseline::random_search_events;
use super::config::{ExperimentConfig, MethodConfig, ProblemConfig};
use super::plot::profile_svg;
use super::profile::{data_profile, first_hit_time, identification_radius, log_grid, DataProfile, EvaluationSet};
use crate::benchmarks::BenchmarkProblem;
use crate::driver::{read_event_log, run_to_budget, write_event_log, Event, EventKind};
use crate::error::{Error, Result};
use crate::objective::StochasticObjective;
use crate::qaoa::{Graph, QaoaObjective};
use crate::rng::instance_seed;

/// Points on the e axis of every profile.
pub const PROFILE_GRID_POINTS: usize = 200;

pub enum Problem {
    Benchmark(BenchmarkProblem),
    Qaoa(QaoaObjective),
}

impl Problem {
    /// Builds the problem; relative graph paths resolve against `base`.
    pub fn build(cfg: &ProblemConfig, base: &Path) -> Result<Self> {
        Ok(match cfg {
            ProblemConfig::Branin(p) => Problem::Benchmark(BenchmarkProblem::branin(p.noise_sigma)),
            ProblemConfig::Shekel(p) => Problem::Benchmark(BenchmarkProblem::shekel(p.dim, p.noise_sigma)?),
            ProblemConfig::Qaoa(p) => {
                let graph = if p.graph == "petersen" {
                    Graph::petersen()
                } else if let Some(k) = p.graph.strip_prefix("complete:") {
                    let k = k
                        .parse()
                        .map_err(|_| Error::config("problem.graph", format!("bad vertex count in `{}`", p.graph)))?;
                    Graph::complete(k)
                } else {
                    Graph::from_edge_list(&fs::read_to_string(base.join(&p.graph))?)?
                };
                Problem::Qaoa(QaoaObjective::new(graph, p.depth, p.shots)?)
            }
        })
    }

    pub fn objective(&self) -> &dyn StochasticObjective {
        match self {
            Problem::Benchmark(b) => b,
            Problem::Qaoa(q) => q,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Problem::Benchmark(b) => b.name.clone(),
            Problem::Qaoa(q) => format!("qaoa_p{}", q.depth()),
        }
    }

    /// Known minima; empty for QAOA.
    pub fn minima(&self) -> Vec<Vec<f64>> {
        match self {
            Problem::Benchmark(b) => b.minima_locations(),
            Problem::Qaoa(_) => Vec::new(),
        }
    }

    fn describe(&self, cfg: &ProblemConfig) -> String {
        match (self, cfg) {
            (Problem::Benchmark(b), _) => b.to_table(),
            (Problem::Qaoa(q), ProblemConfig::Qaoa(p)) => {
                let mut s = format!("depth {}\nshots {}\nvertices {}\n", q.depth(), p.shots, q.graph().vertices());
                for (u, v) in q.graph().edges() {
                    s.push_str(&format!("{u} {v}\n"));
                }
                s
            }
            _ => unreachable!("problem built from a different config"),
        }
    }
}

/// Rejects configs whose omega is too large for the problem's minima.
pub fn check_against_problem(cfg: &ExperimentConfig, problem: &Problem) -> Result<()> {
    if let Problem::Benchmark(b) = problem {
        for (i, m) in cfg.methods.iter().enumerate() {
            if let MethodConfig::Manso(mm) = m {
                b.check_omega(mm.omega).map_err(|_| {
                    Error::config(
                        format!("method[{i}].omega"),
                        format!(
                            "2 * omega = {} must be below the minimum separation {} of {}",
                            2.0 * mm.omega,
                            b.min_separation(),
                            b.name
                        ),
                    )
                })?;
            }
        }
    }
    Ok(())
}

/// Event log of one (method, instance) pair.
pub fn run_instance(problem: &Problem, method: &MethodConfig, cfg: &ExperimentConfig, instance: u64) -> Result<Vec<Event>> {
    let seed = instance_seed(cfg.seed, instance);
    Ok(match method {
        MethodConfig::Manso(m) => run_to_budget(problem.objective(), &m.driver_config(cfg.budget, seed))?.1.events,
        MethodConfig::RandomSearch(r) => random_search_events(problem.objective(), cfg.budget, r.n, seed),
    })
}

pub fn events_path(dir: &Path, method: &str, instance: u64) -> PathBuf {
    dir.join("runs").join(method).join(format!("instance_{instance:03}")).join("events.jsonl")
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs every (method, instance) pair of the config at `config_path` and
/// writes all artifacts under `output_root/<name>`. Pairs whose event log
/// already exists are not rerun.
pub fn run_experiment(config_path: &Path, output_root: &Path) -> Result<ExperimentOutcome> {
    let text = fs::read_to_string(config_path)?;
    let cfg = ExperimentConfig::parse(&text)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let problem = Problem::build(&cfg.problem, base)?;
    check_against_problem(&cfg, &problem)?;

    let dir = output_root.join(&cfg.name);
    let stored = dir.join("config.toml");
    if stored.exists() && fs::read_to_string(&stored)? != text {
        return Err(Error::config(
            "name",
            format!("{} already holds a different experiment; pick another name", dir.display()),
        ));
    }
    fs::create_dir_all(&dir)?;
    write_atomic(&stored, text.as_bytes())?;
    write_atomic(&dir.join("problem.txt"), problem.describe(&cfg.problem).as_bytes())?;

    let pairs: Vec<(&MethodConfig, u64)> = cfg
        .methods
        .iter()
        .flat_map(|m| (0..cfg.instances).map(move |p| (m, p)))
        .collect();
    pairs.par_iter().try_for_each(|&(m, p)| -> Result<()> {
        let path = events_path(&dir, m.name(), p);
        if path.exists() {
            return Ok(());
        }
        let events = run_instance(&problem, m, &cfg, p)?;
        let mut buf = Vec::new();
        write_event_log(&events, &mut buf)?;
        write_atomic(&path, &buf)
    })?;

    profile_artifacts(&dir)
}

fn load_stored(dir: &Path) -> Result<(ExperimentConfig, Problem)> {
    let cfg = ExperimentConfig::load(&dir.join("config.toml"))?;
    let table = fs::read_to_string(dir.join("problem.txt"))?;
    let problem = match &cfg.problem {
        ProblemConfig::Qaoa(p) => {
            let edges: String = table
                .lines()
                .filter(|l| !l.starts_with("depth") && !l.starts_with("shots"))
                .map(|l| format!("{l}\n"))
                .collect();
            Problem::Qaoa(QaoaObjective::new(Graph::from_edge_list(&edges)?, p.depth, p.shots)?)
        }
        _ => Problem::Benchmark(BenchmarkProblem::from_table(&table)?),
    };
    Ok((cfg, problem))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HitRow {
    pub method: String,
    pub problem_instance: u64,
    pub minimum_id: usize,
    pub first_hit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub problem_instance: u64,
    pub evals_used: u64,
    pub minima_hit: usize,
    /// Every known minimum was hit.
    pub solved_all: bool,
    /// Eval index by which every minimum had been hit.
    pub solved_at: Option<u64>,
    /// Estimated value of the reported solution.
    pub best_value: Option<f64>,
    /// Noise-free value of the reported solution (QAOA only).
    pub best_exact: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ProfileRow<'a> {
    method: &'a str,
    problem_instance: &'a str,
    minimum_id: usize,
    e: f64,
    d_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve {
    pub method: String,
    pub minimum_id: usize,
    pub profile: DataProfile,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub dir: PathBuf,
    pub problem_name: String,
    pub minima: Vec<Vec<f64>>,
    pub rho: f64,
    pub hits: Vec<HitRow>,
    pub summary: Vec<SummaryRow>,
    pub profiles: Vec<ProfileCurve>,
}

impl ExperimentOutcome {
    pub fn profile(&self, method: &str, minimum_id: usize) -> Option<&DataProfile> {
        self.profiles
            .iter()
            .find(|c| c.method == method && c.minimum_id == minimum_id)
            .map(|c| &c.profile)
    }
}

/// Point a method would report: the best-valued identified minimum or
/// final run iterate, else the best-valued sample.
pub fn reported_solution(events: &[Event]) -> Option<(Vec<f64>, f64)> {
    let mut last_step: BTreeMap<u64, &Event> = BTreeMap::new();
    let mut candidates: Vec<&Event> = Vec::new();
    for e in events {
        match e.event {
            EventKind::Identify => candidates.push(e),
            EventKind::Step => {
                last_step.insert(e.run_id.unwrap_or(0), e);
            }
            _ => {}
        }
    }
    candidates.extend(last_step.values());
    if candidates.is_empty() {
        candidates = events.iter().filter(|e| e.event == EventKind::Sample).collect();
    }
    candidates
        .into_iter()
        .filter_map(|e| e.value.map(|v| (e, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(e, v)| (e.x.clone(), v))
}

fn read_events(path: &Path) -> Result<Vec<Event>> {
    let file = fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    read_event_log(BufReader::new(file))
}

/// Computes hits, summaries and profiles from the stored event logs.
pub fn compute_outcome(dir: &Path) -> Result<ExperimentOutcome> {
    let (cfg, problem) = load_stored(dir)?;
    let domain = problem.objective().domain();
    let rho = identification_radius(domain.dim(), domain.volume(), cfg.zeta);
    let minima = problem.minima();
    let n_min = cfg.methods.iter().map(|m| m.n()).min().unwrap_or(1).max(1);
    let grid = log_grid(n_min as f64, (cfg.budget as f64).max(n_min as f64), PROFILE_GRID_POINTS);

    let mut hits = Vec::new();
    let mut summary = Vec::new();
    let mut profiles = Vec::new();
    for m in &cfg.methods {
        let mut per_min: Vec<Vec<Option<u64>>> = vec![Vec::new(); minima.len()];
        for p in 0..cfg.instances {
            let events = read_events(&events_path(dir, m.name(), p))?;
            let set = EvaluationSet::from_events(&events)?;
            let times: Vec<Option<u64>> = minima.iter().map(|x| first_hit_time(&set, x, rho)).collect();
            for (j, t) in times.iter().enumerate() {
                per_min[j].push(*t);
                hits.push(HitRow {
                    method: m.name().to_string(),
                    problem_instance: p,
                    minimum_id: j,
                    first_hit: *t,
                });
            }
            let solved_all = !minima.is_empty() && times.iter().all(Option::is_some);
            let best = reported_solution(&events);
            let best_exact = match (&problem, &best) {
                (Problem::Qaoa(q), Some((x, _))) => Some(q.exact(x)),
                _ => None,
            };
            let evals_used = match events.last() {
                Some(e) if e.event == EventKind::Sample => e.eval_index + m.n() - 1,
                Some(e) => e.eval_index,
                None => 0,
            };
            summary.push(SummaryRow {
                method: m.name().to_string(),
                problem_instance: p,
                evals_used,
                minima_hit: times.iter().filter(|t| t.is_some()).count(),
                solved_all,
                solved_at: if solved_all { times.iter().flatten().max().copied() } else { None },
                best_value: best.as_ref().map(|b| b.1),
                best_exact,
            });
        }
        for (j, ts) in per_min.iter().enumerate() {
            profiles.push(ProfileCurve {
                method: m.name().to_string(),
                minimum_id: j,
                profile: data_profile(ts, &grid)?,
            });
        }
    }
    Ok(ExperimentOutcome {
        dir: dir.to_path_buf(),
        problem_name: problem.name(),
        minima,
        rho,
        hits,
        summary,
        profiles,
    })
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Recomputes and writes the CSV tables and plots of an artifact directory.
pub fn profile_artifacts(dir: &Path) -> Result<ExperimentOutcome> {
    let out = compute_outcome(dir)?;
    write_atomic(&dir.join("hits.csv"), &csv_bytes(&out.hits)?)?;
    write_atomic(&dir.join("summary.csv"), &csv_bytes(&out.summary)?)?;
    for c in &out.profiles {
        let rows: Vec<ProfileRow> = c
            .profile
            .grid
            .iter()
            .zip(&c.profile.values)
            .map(|(&e, &d_value)| ProfileRow {
                method: &c.method,
                problem_instance: &out.problem_name,
                minimum_id: c.minimum_id,
                e,
                d_value,
            })
            .collect();
        let path = dir.join("profiles").join(format!("{}__min{}.csv", c.method, c.minimum_id));
        write_atomic(&path, &csv_bytes(&rows)?)?;
    }
    for (j, x) in out.minima.iter().enumerate() {
        let curves: Vec<(&str, &DataProfile)> = out
            .profiles
            .iter()
            .filter(|c| c.minimum_id == j)
            .map(|c| (c.method.as_str(), &c.profile))
            .collect();
        let at = x.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(", ");
        let title = format!("{} minimum {j} at ({at})", out.problem_name);
        let path = dir.join("plots").join(format!("{}__min{j}.svg", out.problem_name));
        write_atomic(&path, profile_svg(&title, &curves).as_bytes())?;
    }
    Ok(out)
}

/// Plain-text summary of an artifact directory.
pub fn report(dir: &Path) -> Result<String> {
    let out = compute_outcome(dir)?;
    let mut s = format!("problem {}  (rho = {:.6})\n", out.problem_name, out.rho);
    let methods: Vec<&str> = {
        let mut v: Vec<&str> = out.summary.iter().map(|r| r.method.as_str()).collect();
        v.dedup();
        v
    };
    if !out.minima.is_empty() {
        s.push_str("final profile value d(B) per minimum\n");
        for m in &methods {
            let vals: Vec<String> = (0..out.minima.len())
                .map(|j| format!("{:.2}", out.profile(m, j).map_or(0.0, DataProfile::final_value)))
                .collect();
            s.push_str(&format!("  {m:<16} {}\n", vals.join(" ")));
        }
    }
    for m in &methods {
        let rows: Vec<&SummaryRow> = out.summary.iter().filter(|r| r.method == *m).collect();
        let solved = rows.iter().filter(|r| r.solved_all).count();
        s.push_str(&format!("  {m:<16} all minima hit in {solved}/{} instances", rows.len()));
        let exact: Vec<f64> = rows.iter().filter_map(|r| r.best_exact).collect();
        if !exact.is_empty() {
            let mean = exact.iter().sum::<f64>() / exact.len() as f64;
            let best = exact.iter().copied().fold(f64::INFINITY, f64::min);
            s.push_str(&format!(", reported exact value mean {mean:.4} best {best:.4}"));
        }
        s.push('\n');
    }
    Ok(s)
}
