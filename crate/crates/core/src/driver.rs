//! The multistart outer loop.
//!
//! Each iteration samples a point (while fewer than `max_active_runs` runs
//! are active), starts local runs from every sampled point that passes the
//! start conditions, advances each active run by one step, retires runs
//! whose newest iterate comes within 2 omega of another run's earlier
//! iterates, and harvests identified minima.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{distance, radius_schedule, uniform_sample, BoxDomain, MIN_SIGMA};
use crate::error::{Error, Result};
use crate::local_search::{IdentificationConfig, LsoRun, LsoStepResult, RunStatus, SolverConfig};
use crate::objective::{estimate, StochasticObjective};
use crate::rng::{RngStream, SAMPLER_STREAM, SAMPLE_NOISE_STREAM};
use crate::sample::{Origin, SamplePoint};
use crate::start_rules::{check_s2, check_s3, is_probabilistically_better, StartRuleConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MansoConfig {
    pub rules: StartRuleConfig,
    pub sigma: f64,
    pub max_active_runs: usize,
    pub evals_budget: u64,
    pub solver: SolverConfig,
    /// Trailing iterates that must cluster within omega for identification.
    pub identification_window: usize,
    /// Internal-radius threshold for identification; `None` is 1e-3 times
    /// the smallest box width.
    pub min_internal_radius: Option<f64>,
    /// When set, a run is only tested against other runs' iterates once it
    /// has spent this many evaluations since its last test.
    pub proximity_check_every_evals: Option<u64>,
    pub seed: u64,
}

impl MansoConfig {
    pub fn new(rules: StartRuleConfig, evals_budget: u64, seed: u64) -> Self {
        Self {
            rules,
            sigma: 5.0,
            max_active_runs: 10,
            evals_budget,
            solver: SolverConfig::default(),
            identification_window: 10,
            min_internal_radius: None,
            proximity_check_every_evals: None,
            seed,
        }
    }

    pub fn identification(&self) -> IdentificationConfig {
        IdentificationConfig {
            omega: self.rules.omega,
            window: self.identification_window,
            min_internal_radius: self.min_internal_radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rules.validate()?;
        if !(self.sigma > MIN_SIGMA) {
            return Err(Error::config(
                "sigma",
                format!("must exceed {MIN_SIGMA} (finitely many local starts need sigma > 4), got {}", self.sigma),
            ));
        }
        if self.max_active_runs < 1 {
            return Err(Error::config("max_active_runs", "must be at least 1"));
        }
        if self.evals_budget < 1 {
            return Err(Error::config("budget", "must be at least 1"));
        }
        if let Some(0) = self.proximity_check_every_evals {
            return Err(Error::config("proximity_check_every_evals", "must be positive"));
        }
        self.solver.validate()?;
        self.identification().validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Sample,
    Start,
    Step,
    Terminate,
    Identify,
}

/// One line of the event log.
///
/// `eval_index` is the 1-based index of the first evaluation of `x` in this
/// event when the event evaluated it, and otherwise the cumulative number
/// of evaluations spent when the event happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub event: EventKind,
    pub k: u64,
    pub eval_index: u64,
    pub run_id: Option<u64>,
    pub x: Vec<f64>,
    pub value: Option<f64>,
    pub variance: Option<f64>,
}

pub fn write_event_log<W: Write>(events: &[Event], mut out: W) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_event_log<R: BufRead>(input: R) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(events)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiedMinimum {
    pub center: Vec<f64>,
    pub value: f64,
    pub run_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DedupDecision {
    Accepted,
    /// Merged into entry `into`; `replaced` when the candidate had the lower
    /// value and took the entry's place.
    Merged { into: usize, replaced: bool },
}

/// Adds `candidate` to `identified` unless an entry lies within omega, in
/// which case the two are merged and the lower-valued one is kept.
pub fn dedup_minimum(candidate: IdentifiedMinimum, identified: &mut Vec<IdentifiedMinimum>, omega: f64) -> DedupDecision {
    let nearest = identified
        .iter()
        .enumerate()
        .map(|(i, m)| (i, distance(&m.center, &candidate.center)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    match nearest {
        Some((i, d)) if d <= omega => {
            let clear_of_others = identified
                .iter()
                .enumerate()
                .all(|(j, m)| j == i || distance(&m.center, &candidate.center) > omega);
            let replaced = candidate.value < identified[i].value && clear_of_others;
            if replaced {
                identified[i] = candidate;
            }
            DedupDecision::Merged { into: i, replaced }
        }
        _ => {
            identified.push(candidate);
            DedupDecision::Accepted
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Candidacy {
    /// Not yet started; `nearest_witness` is the distance to the closest
    /// probabilistically better sampled point.
    Pending { nearest_witness: f64 },
    /// Failed S2 or S3; neither can recover.
    Excluded,
    Started,
}

#[derive(Debug, Clone)]
pub struct SampleRecord {
    pub point: SamplePoint,
    pub started: bool,
    pub(crate) candidacy: Candidacy,
}

/// A point of L: an iterate produced by a local run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IteratePoint {
    pub run_id: u64,
    pub x: Vec<f64>,
    pub eval_index: u64,
}

/// Uniform grid over (at most) the first three coordinates, used to find
/// L-points near a query without scanning all of L.
struct ProximityGrid {
    cell: f64,
    axes: usize,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl ProximityGrid {
    fn new(cell: f64, dim: usize) -> Self {
        Self {
            cell,
            axes: dim.min(3),
            cells: HashMap::new(),
        }
    }

    fn key(&self, x: &[f64]) -> Vec<i64> {
        x[..self.axes].iter().map(|v| (v / self.cell).floor() as i64).collect()
    }

    fn insert(&mut self, x: &[f64], idx: usize) {
        let key = self.key(x);
        self.cells.entry(key).or_default().push(idx);
    }

    /// Indices whose projected cell is within `radius` of `x`'s cell; a
    /// superset of the points within `radius`.
    fn candidates(&self, x: &[f64], radius: f64) -> Vec<usize> {
        let span = (radius / self.cell).ceil() as i64;
        let base = self.key(x);
        let mut out = Vec::new();
        let mut offset = vec![-span; self.axes];
        loop {
            let key: Vec<i64> = base.iter().zip(&offset).map(|(b, o)| b + o).collect();
            if let Some(v) = self.cells.get(&key) {
                out.extend_from_slice(v);
            }
            let mut i = 0;
            loop {
                if i == self.axes {
                    return out;
                }
                offset[i] += 1;
                if offset[i] <= span {
                    break;
                }
                offset[i] = -span;
                i += 1;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapKey(f64, usize);

impl Eq for HeapKey {}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(other.1.cmp(&self.1))
    }
}

/// State of a run: the sets S, A, L and the identified minima, plus the
/// budget ledger and the event trace.
pub struct MansoState {
    domain: BoxDomain,
    samples: Vec<SampleRecord>,
    runs: Vec<LsoRun>,
    active: Vec<u64>,
    iterates: Vec<IteratePoint>,
    identified: Vec<IdentifiedMinimum>,
    k: u64,
    evals_used: u64,
    evals_budget: u64,
    trace: Vec<Event>,
    starts_per_iteration: Vec<u32>,
    halted: bool,
    sampler: RngStream,
    sample_noise: RngStream,
    grid: ProximityGrid,
    pending: BinaryHeap<HeapKey>,
}

impl MansoState {
    pub fn new(domain: BoxDomain, cfg: &MansoConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = ProximityGrid::new(2.0 * cfg.rules.omega, domain.dim());
        Ok(Self {
            domain,
            samples: Vec::new(),
            runs: Vec::new(),
            active: Vec::new(),
            iterates: Vec::new(),
            identified: Vec::new(),
            k: 0,
            evals_used: 0,
            evals_budget: cfg.evals_budget,
            trace: Vec::new(),
            starts_per_iteration: Vec::new(),
            halted: false,
            sampler: RngStream::new(cfg.seed, SAMPLER_STREAM),
            sample_noise: RngStream::new(cfg.seed, SAMPLE_NOISE_STREAM),
            grid,
            pending: BinaryHeap::new(),
        })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn samples(&self) -> &[SampleRecord] {
        &self.samples
    }

    pub fn runs(&self) -> &[LsoRun] {
        &self.runs
    }

    /// Ids of active runs, ascending.
    pub fn active(&self) -> &[u64] {
        &self.active
    }

    pub fn iterates(&self) -> &[IteratePoint] {
        &self.iterates
    }

    pub fn identified(&self) -> &[IdentifiedMinimum] {
        &self.identified
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn evals_used(&self) -> u64 {
        self.evals_used
    }

    pub fn evals_budget(&self) -> u64 {
        self.evals_budget
    }

    pub fn trace(&self) -> &[Event] {
        &self.trace
    }

    pub fn starts_per_iteration(&self) -> &[u32] {
        &self.starts_per_iteration
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    fn remaining(&self) -> u64 {
        self.evals_budget - self.evals_used
    }

    /// Current r_k, or `None` while fewer than two points are sampled.
    pub fn current_radius(&self, cfg: &MansoConfig) -> Option<f64> {
        radius_schedule(self.samples.len(), self.domain.dim(), self.domain.volume(), cfg.sigma).ok()
    }

    fn push_event(&mut self, event: EventKind, eval_index: u64, run_id: Option<u64>, x: Vec<f64>, value: Option<f64>, variance: Option<f64>) {
        self.trace.push(Event {
            event,
            k: self.k,
            eval_index,
            run_id,
            x,
            value,
            variance,
        });
    }

    fn sample_point(&mut self, objective: &dyn StochasticObjective, cfg: &MansoConfig) {
        let x = uniform_sample(&self.domain, &mut self.sampler);
        let stats = estimate(objective, &x, cfg.rules.n, &mut self.sample_noise);
        let first_eval = self.evals_used + 1;
        self.evals_used += cfg.rules.n;
        self.push_event(EventKind::Sample, first_eval, None, x.clone(), Some(stats.mean()), Some(stats.var_of_mean()));
        let point = SamplePoint {
            x,
            stats,
            origin: Origin::UniformSample,
            eval_index: first_eval - 1,
        };
        let idx = self.samples.len();

        // the new point may be a witness against earlier pending points
        for (i, rec) in self.samples.iter_mut().enumerate() {
            if let Candidacy::Pending { nearest_witness } = &mut rec.candidacy {
                if is_probabilistically_better(&rec.point, &point, &cfg.rules) {
                    let d = distance(&rec.point.x, &point.x);
                    if d < *nearest_witness {
                        *nearest_witness = d;
                        self.pending.push(HeapKey(d, i));
                    }
                }
            }
        }

        let candidacy = if !check_s3(&point.x, &self.domain, cfg.rules.tau)
            || !check_s2(&point.x, self.identified.iter().map(|m| m.center.as_slice()), cfg.rules.omega)
        {
            Candidacy::Excluded
        } else {
            let nearest = self
                .samples
                .iter()
                .filter(|z| is_probabilistically_better(&point, &z.point, &cfg.rules))
                .map(|z| distance(&z.point.x, &point.x))
                .fold(f64::INFINITY, f64::min);
            self.pending.push(HeapKey(nearest, idx));
            Candidacy::Pending { nearest_witness: nearest }
        };
        self.samples.push(SampleRecord {
            point,
            started: false,
            candidacy,
        });
    }

    /// Sampled points that currently pass all four start conditions.
    fn eligible(&mut self, r_k: f64, cfg: &MansoConfig) -> Vec<usize> {
        let mut out = Vec::new();
        while let Some(&HeapKey(d, i)) = self.pending.peek() {
            if d <= r_k {
                break;
            }
            self.pending.pop();
            let rec = &mut self.samples[i];
            let Candidacy::Pending { nearest_witness } = rec.candidacy else { continue };
            if nearest_witness != d {
                continue;
            }
            if !check_s2(&rec.point.x, self.identified.iter().map(|m| m.center.as_slice()), cfg.rules.omega) {
                rec.candidacy = Candidacy::Excluded;
                continue;
            }
            out.push(i);
        }
        out
    }

    fn start_runs(&mut self, cfg: &MansoConfig) -> u32 {
        if self.samples.len() < 2 {
            return 0;
        }
        let r_k = match self.current_radius(cfg) {
            Some(r) => r,
            None => return 0,
        };
        let mut eligible = self.eligible(r_k, cfg);
        eligible.sort_by(|&a, &b| {
            self.samples[a]
                .point
                .stats
                .mean()
                .total_cmp(&self.samples[b].point.stats.mean())
                .then(a.cmp(&b))
        });
        let mut started = 0;
        for i in eligible {
            if self.active.len() >= cfg.max_active_runs {
                // over the cap: stays pending for a later iteration
                if let Candidacy::Pending { nearest_witness } = self.samples[i].candidacy {
                    self.pending.push(HeapKey(nearest_witness, i));
                }
                continue;
            }
            debug_assert!(crate::start_rules::evaluate_start_conditions(i, self, r_k, &cfg.rules).start);
            let run_id = self.runs.len() as u64;
            let rec = &mut self.samples[i];
            rec.started = true;
            rec.candidacy = Candidacy::Started;
            let solver = cfg.solver.build(&self.domain, &rec.point.x, rec.point.stats, cfg.rules.n);
            let x = rec.point.x.clone();
            let value = rec.point.stats.mean();
            let variance = rec.point.stats.var_of_mean();
            self.runs.push(LsoRun::new(run_id, i, x.clone(), solver, cfg.seed));
            self.active.push(run_id);
            self.push_event(EventKind::Start, self.evals_used, Some(run_id), x, Some(value), Some(variance));
            started += 1;
        }
        started
    }

    fn step_runs(&mut self, objective: &dyn StochasticObjective) -> Vec<(u64, LsoStepResult, u64)> {
        let mut selected = Vec::new();
        let mut reserved = 0u64;
        for &id in &self.active {
            let cost = self.runs[id as usize].solver.next_step_cost();
            if reserved + cost > self.remaining() {
                self.halted = true;
                break;
            }
            reserved += cost;
            selected.push(id);
        }
        let mut results: Vec<(u64, LsoStepResult)> = self
            .runs
            .par_iter_mut()
            .filter(|r| selected.binary_search(&r.run_id).is_ok())
            .map(|r| (r.run_id, r.step(objective)))
            .collect();
        results.sort_by_key(|(id, _)| *id);

        let mut out = Vec::with_capacity(results.len());
        for (id, res) in results {
            let base = self.evals_used;
            self.evals_used += res.evals_consumed;
            let eval_index = match res.iterate_eval_offset {
                Some(off) => base + off + 1,
                None => self.evals_used,
            };
            let value = self.runs[id as usize].solver.iterate_value();
            self.push_event(EventKind::Step, eval_index, Some(id), res.new_iterate.clone(), Some(value), None);
            out.push((id, res, eval_index));
        }
        out
    }

    fn proximity_terminations(&mut self, stepped: &[(u64, LsoStepResult, u64)], cfg: &MansoConfig) -> Vec<u64> {
        let radius = 2.0 * cfg.rules.omega;
        let mut hits: HashMap<u64, Vec<u64>> = HashMap::new();
        for (id, res, _) in stepped {
            let run = &mut self.runs[*id as usize];
            if !run.is_active() {
                continue;
            }
            if let Some(every) = cfg.proximity_check_every_evals {
                if run.evals_since_check < every {
                    continue;
                }
                run.evals_since_check = 0;
            }
            let mut others: Vec<u64> = self
                .grid
                .candidates(&res.new_iterate, radius)
                .into_iter()
                .filter_map(|j| {
                    let p = &self.iterates[j];
                    let dup = self.runs[p.run_id as usize].status == RunStatus::TerminatedByProximity;
                    (p.run_id != *id && !dup && distance(&p.x, &res.new_iterate) <= radius).then_some(p.run_id)
                })
                .collect();
            if !others.is_empty() {
                others.sort_unstable();
                others.dedup();
                hits.insert(*id, others);
            }
        }
        let value = |id: u64| self.runs[id as usize].solver.iterate_value();
        // a run survives only if every run it touched also touched it and
        // lost the comparison (higher value, then higher id)
        let loses_to = |a: u64, b: u64| match value(a).total_cmp(&value(b)) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => a > b,
        };
        let mut terminated: Vec<u64> = hits
            .iter()
            .filter(|(a, touched)| {
                !touched
                    .iter()
                    .all(|b| hits.get(b).is_some_and(|back| back.contains(a)) && loses_to(*b, **a))
            })
            .map(|(a, _)| *a)
            .collect();
        terminated.sort_unstable();
        terminated
    }

    /// One iteration of the outer loop.
    pub fn iterate(&mut self, objective: &dyn StochasticObjective, cfg: &MansoConfig) {
        if self.halted {
            return;
        }
        // (1) sample while below the active-run cap
        if self.active.len() < cfg.max_active_runs {
            if self.remaining() >= cfg.rules.n {
                self.sample_point(objective, cfg);
            } else {
                self.halted = true;
            }
        }
        // (2)-(3) start runs from eligible points
        let started = self.start_runs(cfg);
        // (4) one step per active run
        let stepped = if self.halted { Vec::new() } else { self.step_runs(objective) };

        for (id, res, _) in &stepped {
            if let Some(reason) = &res.failure {
                let _ = reason;
                self.retire(*id);
                let run = &self.runs[*id as usize];
                let x = run.current().to_vec();
                let v = run.solver.iterate_value();
                self.push_event(EventKind::Terminate, self.evals_used, Some(*id), x, Some(v), None);
            }
        }

        // (5) proximity to other runs' earlier iterates
        let retired = self.proximity_terminations(&stepped, cfg);
        for &id in &retired {
            self.runs[id as usize].status = RunStatus::TerminatedByProximity;
            self.retire(id);
            let run = &self.runs[id as usize];
            let x = run.current().to_vec();
            let v = run.solver.iterate_value();
            self.push_event(EventKind::Terminate, self.evals_used, Some(id), x, Some(v), None);
        }
        for (id, res, eval_index) in &stepped {
            let idx = self.iterates.len();
            self.grid.insert(&res.new_iterate, idx);
            self.iterates.push(IteratePoint {
                run_id: *id,
                x: res.new_iterate.clone(),
                eval_index: *eval_index,
            });
        }

        // (6) harvest identified minima
        let ident = cfg.identification();
        for (id, _, _) in &stepped {
            let run = &self.runs[*id as usize];
            if !run.is_active() {
                continue;
            }
            let Some(center) = run.identification(&ident, &self.domain) else { continue };
            let value = run.solver.iterate_value();
            if !check_s3(&center, &self.domain, cfg.rules.tau) {
                // settled against the boundary, not at a stationary point
                self.runs[*id as usize].status = RunStatus::Failed {
                    reason: "converged inside the boundary layer".into(),
                };
                self.retire(*id);
                self.push_event(EventKind::Terminate, self.evals_used, Some(*id), center, Some(value), None);
                continue;
            }
            self.runs[*id as usize].status = RunStatus::Identified { center: center.clone() };
            self.retire(*id);
            dedup_minimum(
                IdentifiedMinimum {
                    center: center.clone(),
                    value,
                    run_id: *id,
                },
                &mut self.identified,
                cfg.rules.omega,
            );
            self.push_event(EventKind::Identify, self.evals_used, Some(*id), center, Some(value), None);
        }

        // (7)
        self.starts_per_iteration.push(started);
        self.k += 1;
    }

    fn retire(&mut self, id: u64) {
        self.active.retain(|&a| a != id);
    }

    pub fn report(&self) -> RunReport {
        RunReport {
            samples: self.samples.iter().map(|r| r.point.clone()).collect(),
            iterates: self.iterates.clone(),
            identified: self.identified.clone(),
            events: self.trace.clone(),
            starts_per_iteration: self.starts_per_iteration.clone(),
            evals_used: self.evals_used,
            iterations: self.k,
        }
    }
}

/// Everything the evaluation harness needs from one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub samples: Vec<SamplePoint>,
    pub iterates: Vec<IteratePoint>,
    pub identified: Vec<IdentifiedMinimum>,
    pub events: Vec<Event>,
    /// Number of local runs started at each iteration (t_k).
    pub starts_per_iteration: Vec<u32>,
    pub evals_used: u64,
    pub iterations: u64,
}

impl RunReport {
    pub fn total_starts(&self) -> u64 {
        self.starts_per_iteration.iter().map(|&t| t as u64).sum()
    }

    /// Starts in the trailing `fraction` of iterations.
    pub fn late_starts(&self, fraction: f64) -> u64 {
        let n = self.starts_per_iteration.len();
        let tail = ((n as f64) * fraction).ceil() as usize;
        self.starts_per_iteration[n - tail.min(n)..].iter().map(|&t| t as u64).sum()
    }
}

/// Advances `state` by one iteration.
pub fn manso_iteration(state: &mut MansoState, objective: &dyn StochasticObjective, cfg: &MansoConfig) {
    state.iterate(objective, cfg)
}

/// Runs iterations until the evaluation budget is spent.
pub fn run_to_budget(objective: &dyn StochasticObjective, cfg: &MansoConfig) -> Result<(MansoState, RunReport)> {
    let mut state = MansoState::new(objective.domain().clone(), cfg)?;
    while !state.is_halted() && state.evals_used() < state.evals_budget() {
        state.iterate(objective, cfg);
    }
    let report = state.report();
    Ok((state, report))
}
