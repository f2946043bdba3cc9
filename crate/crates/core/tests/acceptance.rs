//! Acceptance criteria. Each test prints one `ACCEPTANCE <id> PASS|FAIL`
//! line and asserts the criterion at its stated tolerance.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use manso::benchmarks::{branin, branin_minima, numerical_gradient_norm, BenchmarkProblem, STATIONARITY_TOL};
use manso::domain::radius_schedule;
use manso::driver::{run_to_budget, MansoConfig};
use manso::estimate::EstimateStats;
use manso::eval::{
    data_profile, first_hit_time, identification_radius, log_grid, random_search_baseline, run_experiment,
    EvaluationSet, PROFILE_GRID_POINTS,
};
use manso::qaoa::{brute_force_maxcut, exact_expectation, statevector, Graph, QaoaCircuit, QaoaObjective};
use manso::rng::{instance_seed, RngStream};
use manso::sample::{Origin, SamplePoint};
use manso::start_rules::{check_s1, StartRuleConfig};
use rand::Rng;
use rayon::prelude::*;

fn verdict(id: &str, pass: bool, detail: String, started: Instant) {
    let line = format!(
        "ACCEPTANCE {id} {}: {detail} [{:.1}s]\n",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(pass, "criterion {id} failed: {detail}");
}

fn rules() -> StartRuleConfig {
    StartRuleConfig::new(0.1, 0.05, 0.01, 5).unwrap()
}

/// Gamma(1 + d/2) by the integer / half-integer recurrence.
fn gamma_half_step(d: usize) -> f64 {
    let (mut g, mut z) = if d % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt() / 2.0, 1.5) };
    while z < 1.0 + d as f64 / 2.0 - 1e-9 {
        g *= z;
        z += 1.0;
    }
    g
}

#[test]
fn criterion_1_radius_formulas() {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for d in 1..=12usize {
        for &vol in &[1.0, 225.0, 1e4, 1e10] {
            for &s in &[2usize, 10, 100, 12_345] {
                let sigma = 5.0;
                let arg = gamma_half_step(d) * vol * sigma * (s as f64).ln() / s as f64;
                let want = arg.powf(1.0 / d as f64) / PI.sqrt();
                let got = radius_schedule(s, d, vol, sigma).unwrap();
                worst = worst.max(((got - want) / want).abs());
            }
            for &zeta in &[1e-4, 1e-3, 1.0] {
                let want = (gamma_half_step(d) * vol * zeta).powf(1.0 / d as f64) / PI.sqrt();
                let got = identification_radius(d, vol, zeta);
                worst = worst.max(((got - want) / want).abs());
            }
        }
    }
    verdict("1", worst <= 1e-10 && t.elapsed().as_secs_f64() < 1.0, format!("max relative error {worst:.2e}"), t);
}

#[test]
fn criterion_2_s1_sign_test() {
    let t = Instant::now();
    let mut rng = RngStream::new(2024, 0);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let beta = rng.random_range(0.01..0.49);
        let cfg = StartRuleConfig::new(beta, 0.05, 0.01, 5).unwrap();
        let point = |x: f64, mean: f64, var: f64| SamplePoint {
            x: vec![x],
            stats: EstimateStats::from_moments(5, mean, var),
            origin: Origin::UniformSample,
            eval_index: 0,
        };
        let mean_a = rng.random_range(-10.0..10.0);
        let mean_z = if rng.random_bool(0.05) { mean_a } else { rng.random_range(-10.0..10.0) };
        let a = point(0.0, mean_a, rng.random_range(0.0..5.0));
        let z = point(0.1, mean_z, rng.random_range(0.0..5.0));
        let witnessed = !check_s1(&a, std::slice::from_ref(&z), 1.0, &cfg).start;
        if witnessed != (mean_z <= mean_a) {
            mismatches += 1;
        }
    }
    verdict("2", mismatches == 0 && t.elapsed().as_secs_f64() < 5.0, format!("{mismatches} mismatches in 10^4 tuples"), t);
}

#[test]
fn criterion_3_finite_starts() {
    let t = Instant::now();
    let problem = BenchmarkProblem::branin(1.0);
    let late: Vec<u64> = (0..10u64)
        .into_par_iter()
        .map(|s| {
            let cfg = MansoConfig::new(rules(), 100_000, instance_seed(3, s));
            run_to_budget(&problem, &cfg).unwrap().1.late_starts(0.2)
        })
        .collect();
    let quiet = late.iter().filter(|&&n| n == 0).count();
    verdict(
        "3",
        quiet >= 9 && t.elapsed().as_secs_f64() < 300.0,
        format!("{quiet}/10 seeds with no start in the final 20% of iterations (late starts {late:?})"),
        t,
    );
}

/// Per-minimum final profile values of MANSO and random search.
fn profile_comparison(problem: &BenchmarkProblem, zeta: f64, budget: u64, instances: u64, base_seed: u64) -> (Vec<f64>, Vec<f64>) {
    let rho = identification_radius(problem.dim(), problem.domain.volume(), zeta);
    let minima = problem.minima_locations();
    let grid = log_grid(5.0, budget as f64, PROFILE_GRID_POINTS);
    let sets: Vec<(EvaluationSet, EvaluationSet)> = (0..instances)
        .into_par_iter()
        .map(|p| {
            let seed = instance_seed(base_seed, p);
            let cfg = MansoConfig::new(rules(), budget, seed);
            let report = run_to_budget(problem, &cfg).unwrap().1;
            (EvaluationSet::from_events(&report.events).unwrap(), random_search_baseline(problem, budget, 5, seed))
        })
        .collect();
    let finals = |pick: fn(&(EvaluationSet, EvaluationSet)) -> &EvaluationSet| -> Vec<f64> {
        minima
            .iter()
            .map(|x| {
                let hits: Vec<Option<u64>> = sets.iter().map(|s| first_hit_time(pick(s), x, rho)).collect();
                data_profile(&hits, &grid).unwrap().final_value()
            })
            .collect()
    };
    (finals(|s| &s.0), finals(|s| &s.1))
}

#[test]
fn criterion_4_branin_profiles() {
    let t = Instant::now();
    let (manso, random) = profile_comparison(&BenchmarkProblem::branin(1.0), 1e-3, 20_000, 10, 4);
    let geq = manso.iter().zip(&random).all(|(m, r)| m >= r);
    let strict = manso.iter().zip(&random).filter(|(m, r)| m > r).count();
    verdict(
        "4",
        geq && strict >= 2 && t.elapsed().as_secs_f64() < 600.0,
        format!("d(B) MANSO {manso:?} vs random {random:?}; strictly greater for {strict}/3"),
        t,
    );
}

#[test]
fn criterion_5_shekel4_profiles() {
    let t = Instant::now();
    let problem = BenchmarkProblem::shekel(4, 1.0).unwrap();
    let (manso, random) = profile_comparison(&problem, 1e-4, 100_000, 10, 5);
    let (sm, sr): (f64, f64) = (manso.iter().sum(), random.iter().sum());
    verdict(
        "5",
        sm >= 1.2 * sr && t.elapsed().as_secs_f64() < 1800.0,
        format!("summed d(B) MANSO {sm:.2} vs random {sr:.2} (need >= {:.2})", 1.2 * sr),
        t,
    );
}

#[test]
fn criterion_6_benchmark_fidelity() {
    let t = Instant::now();
    let origin = branin(&[0.0, 0.0]);
    let stationary = branin_minima()
        .iter()
        .all(|x| numerical_gradient_norm(branin, x) < STATIONARITY_TOL);
    let shekel_worst = [4usize, 6, 8]
        .iter()
        .map(|&d| {
            BenchmarkProblem::shekel(d, 1.0)
                .unwrap()
                .weight_fidelity()
                .into_iter()
                .fold(0.0f64, f64::max)
        })
        .fold(0.0f64, f64::max);
    let pass = (origin - 55.6021).abs() <= 1e-3 && stationary && shekel_worst <= 0.02 && t.elapsed().as_secs_f64() < 10.0;
    verdict(
        "6",
        pass,
        format!(
            "branin(0,0) = {origin:.6}, Branin minima stationary: {stationary}, worst |f(x_i) + 1/c_i| over Shekel d=4,6,8 = {shekel_worst:.4} (tolerance 0.02)"
        ),
        t,
    );
}

#[test]
fn criterion_7_qaoa_oracles() {
    let t = Instant::now();
    let g = Graph::petersen();
    let maxcut = brute_force_maxcut(&g).unwrap();
    let zero = exact_expectation(&QaoaCircuit::new(g.clone(), vec![0.0, 0.0]).unwrap()).unwrap();
    let mut rng = RngStream::new(7, 0);
    let mut worst_norm: f64 = 0.0;
    for i in 0..100 {
        let p = 1 + i % 5;
        let mut params: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        params.extend((0..p).map(|_| rng.random_range(0.0..PI)));
        let psi = statevector(&QaoaCircuit::new(g.clone(), params).unwrap()).unwrap();
        let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        worst_norm = worst_norm.max((norm - 1.0).abs());
    }
    let pass = maxcut == 12 && (zero + 7.5).abs() <= 1e-9 && worst_norm <= 1e-10 && t.elapsed().as_secs_f64() < 30.0;
    verdict("7", pass, format!("maxcut {maxcut}, E(0) = {zero:.12}, max |norm - 1| = {worst_norm:.2e}"), t);
}

#[test]
fn criterion_8_qaoa_p1_search() {
    let t = Instant::now();
    let obj = QaoaObjective::new(Graph::petersen(), 1, 256).unwrap();
    let found: Vec<f64> = (0..10u64)
        .into_par_iter()
        .map(|s| {
            let mut cfg = MansoConfig::new(StartRuleConfig::new(0.1, 0.01, 0.01, 5).unwrap(), 50_000, instance_seed(8, s));
            cfg.proximity_check_every_evals = Some(500);
            let report = run_to_budget(&obj, &cfg).unwrap().1;
            let (x, _) = manso::eval::reported_solution(&report.events).expect("some evaluated point");
            obj.exact(&x)
        })
        .collect();
    let good = found.iter().filter(|&&v| v <= -8.4).count();
    verdict(
        "8",
        good >= 8 && t.elapsed().as_secs_f64() < 900.0,
        format!("{good}/10 seeds reach exact expectation <= -8.4 ({found:.3?})"),
        t,
    );
}

const DETERMINISM_CONFIG: &str = r#"
name = "determinism"
seed = 11
instances = 3
budget = 4000
zeta = 1e-3

[problem]
kind = "branin"
noise_sigma = 1.0

[[method]]
name = "manso"
kind = "manso"
beta = 0.1
omega = 0.05
tau = 0.01
n = 5

[[method]]
name = "random"
kind = "random-search"
n = 5
"#;

fn artifact_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_9_determinism() {
    let t = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("exp.toml");
    std::fs::write(&config, DETERMINISM_CONFIG).unwrap();
    let a_root = tmp.path().join("a");
    let b_root = tmp.path().join("b");
    let a = run_experiment(&config, &a_root).unwrap();
    let b = run_experiment(&config, &b_root).unwrap();
    let fa = artifact_bytes(&a.dir);
    let fb = artifact_bytes(&b.dir);
    let logs = fa.iter().filter(|(n, _)| n.ends_with("events.jsonl")).count();
    let csvs = fa.iter().filter(|(n, _)| n.ends_with(".csv")).count();
    verdict(
        "9",
        fa == fb && logs == 6 && csvs == 8,
        format!("{} files compared ({logs} event logs, {csvs} CSVs), identical: {}", fa.len(), fa == fb),
        t,
    );
}
