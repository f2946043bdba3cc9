//! Statevector QAOA for maximum cut.
//!
//! The cost of bitstring y is `h(y) = -cut(y)`, so minimizing the expected
//! cost maximizes the expected cut. Parameters are ordered
//! `(gamma_1..gamma_p, beta_1..beta_p)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::objective::StochasticObjective;
use crate::rng::RngStream;

/// Largest graph the statevector simulator accepts.
pub const MAX_STATEVECTOR_VERTICES: usize = 16;
/// Largest graph the exhaustive max-cut oracle accepts.
pub const MAX_BRUTE_FORCE_VERTICES: usize = 24;
pub const DEFAULT_SHOTS: u64 = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Simple undirected graph; self loops and repeated edges are rejected.
    pub fn new(vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut norm = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u >= vertices || v >= vertices {
                return Err(Error::InvalidArgument(format!("edge ({u}, {v}) out of range for {vertices} vertices")));
            }
            if u == v {
                return Err(Error::InvalidArgument(format!("self loop at vertex {u}")));
            }
            let e = (u.min(v), u.max(v));
            if !seen.insert(e) {
                return Err(Error::InvalidArgument(format!("repeated edge ({u}, {v})")));
            }
            norm.push(e);
        }
        Ok(Self { vertices, edges: norm })
    }

    /// The Petersen graph: 10 vertices, 15 edges, 3-regular, max cut 12.
    pub fn petersen() -> Self {
        let mut edges = Vec::with_capacity(15);
        for i in 0..5 {
            edges.push((i, (i + 1) % 5));
            edges.push((i, i + 5));
            edges.push((5 + i, 5 + (i + 2) % 5));
        }
        Self::new(10, edges).expect("static edge list")
    }

    pub fn complete(k: usize) -> Self {
        let edges = (0..k).flat_map(|u| (u + 1..k).map(move |v| (u, v))).collect();
        Self::new(k, edges).expect("complete graph")
    }

    /// Parses `u v` pairs, one edge per line; `#` starts a comment. The
    /// vertex count is one more than the largest index unless a
    /// `vertices N` line is given.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut declared = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| Error::Parse { line: lineno + 1, reason };
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["vertices", n] => declared = Some(n.parse::<usize>().map_err(|e| err(e.to_string()))?),
                [u, v] => edges.push((
                    u.parse::<usize>().map_err(|e| err(e.to_string()))?,
                    v.parse::<usize>().map_err(|e| err(e.to_string()))?,
                )),
                _ => return Err(err(format!("expected `u v`, got `{line}`"))),
            }
        }
        let inferred = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        Self::new(declared.unwrap_or(inferred), edges)
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    pub fn cut(&self, y: usize) -> u32 {
        self.edges
            .iter()
            .filter(|&&(u, v)| ((y >> u) ^ (y >> v)) & 1 == 1)
            .count() as u32
    }

    fn cut_table(&self) -> Vec<u32> {
        (0..1usize << self.vertices).map(|y| self.cut(y)).collect()
    }
}

/// Exhaustive maximum cut over all 2^V bitstrings.
pub fn brute_force_maxcut(graph: &Graph) -> Result<u32> {
    if graph.vertices() > MAX_BRUTE_FORCE_VERTICES {
        return Err(Error::GraphTooLarge {
            vertices: graph.vertices(),
            limit: MAX_BRUTE_FORCE_VERTICES,
        });
    }
    // y and its complement give the same cut
    let half = 1usize << graph.vertices().saturating_sub(1);
    Ok((0..half.max(1)).map(|y| graph.cut(y)).max().unwrap_or(0))
}

#[derive(Debug, Clone)]
pub struct QaoaCircuit {
    graph: Graph,
    depth: usize,
    params: Vec<f64>,
}

impl QaoaCircuit {
    pub fn new(graph: Graph, params: Vec<f64>) -> Result<Self> {
        if params.is_empty() || params.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "QAOA needs 2p parameters, got {}",
                params.len()
            )));
        }
        Ok(Self {
            depth: params.len() / 2,
            graph,
            params,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn gammas(&self) -> &[f64] {
        &self.params[..self.depth]
    }

    pub fn betas(&self) -> &[f64] {
        &self.params[self.depth..]
    }
}

fn check_size(graph: &Graph) -> Result<()> {
    if graph.vertices() > MAX_STATEVECTOR_VERTICES {
        return Err(Error::GraphTooLarge {
            vertices: graph.vertices(),
            limit: MAX_STATEVECTOR_VERTICES,
        });
    }
    Ok(())
}

fn evolve(vertices: usize, cuts: &[u32], gammas: &[f64], betas: &[f64]) -> Vec<Complex64> {
    let dim = 1usize << vertices;
    let amp = 1.0 / (dim as f64).sqrt();
    let mut psi = vec![Complex64::new(amp, 0.0); dim];
    for (&gamma, &beta) in gammas.iter().zip(betas) {
        // exp(-i gamma h(y)) with h = -cut
        for (a, &c) in psi.iter_mut().zip(cuts) {
            *a *= Complex64::from_polar(1.0, gamma * c as f64);
        }
        let (s, c) = beta.sin_cos();
        let off = Complex64::new(0.0, -s);
        for q in 0..vertices {
            let bit = 1usize << q;
            for i in 0..dim {
                if i & bit == 0 {
                    let a0 = psi[i];
                    let a1 = psi[i | bit];
                    psi[i] = a0 * c + a1 * off;
                    psi[i | bit] = a0 * off + a1 * c;
                }
            }
        }
    }
    psi
}

/// The QAOA state for the circuit's parameters.
pub fn statevector(circuit: &QaoaCircuit) -> Result<Vec<Complex64>> {
    check_size(&circuit.graph)?;
    let cuts = circuit.graph.cut_table();
    Ok(evolve(circuit.graph.vertices(), &cuts, circuit.gammas(), circuit.betas()))
}

/// `<psi| H |psi>` with `H = diag(-cut(y))`.
pub fn exact_expectation(circuit: &QaoaCircuit) -> Result<f64> {
    check_size(&circuit.graph)?;
    let cuts = circuit.graph.cut_table();
    let psi = evolve(circuit.graph.vertices(), &cuts, circuit.gammas(), circuit.betas());
    Ok(expectation_from(&psi, &cuts))
}

fn expectation_from(psi: &[Complex64], cuts: &[u32]) -> f64 {
    -psi.iter().zip(cuts).map(|(a, &c)| a.norm_sqr() * c as f64).sum::<f64>()
}

fn sample_mean(psi: &[Complex64], cuts: &[u32], shots: u64, rng: &mut RngStream) -> f64 {
    let mut cdf = Vec::with_capacity(psi.len());
    let mut acc = 0.0;
    for a in psi {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    let total = acc;
    let mut sum = 0.0;
    for _ in 0..shots {
        let u = rng.random::<f64>() * total;
        let idx = cdf.partition_point(|&p| p <= u).min(psi.len() - 1);
        sum -= cuts[idx] as f64;
    }
    sum / shots as f64
}

/// Mean of h over `shots` measurements of the circuit's state.
pub fn sampled_objective(circuit: &QaoaCircuit, shots: u64, rng: &mut RngStream) -> Result<f64> {
    if shots == 0 {
        return Err(Error::InvalidArgument("need at least one shot".into()));
    }
    check_size(&circuit.graph)?;
    let cuts = circuit.graph.cut_table();
    let psi = evolve(circuit.graph.vertices(), &cuts, circuit.gammas(), circuit.betas());
    Ok(sample_mean(&psi, &cuts, shots, rng))
}

/// QAOA max-cut as a stochastic objective on
/// `[0, 2 pi]^p x [0, pi]^p`.
pub struct QaoaObjective {
    graph: Graph,
    cuts: Vec<u32>,
    depth: usize,
    shots: u64,
    domain: BoxDomain,
}

impl QaoaObjective {
    pub fn new(graph: Graph, depth: usize, shots: u64) -> Result<Self> {
        check_size(&graph)?;
        if depth == 0 {
            return Err(Error::config("depth", "must be at least 1"));
        }
        if shots == 0 {
            return Err(Error::config("shots", "must be at least 1"));
        }
        let mut upper = vec![2.0 * PI; depth];
        upper.extend(std::iter::repeat(PI).take(depth));
        let domain = BoxDomain::new(vec![0.0; 2 * depth], upper)?;
        Ok(Self {
            cuts: graph.cut_table(),
            graph,
            depth,
            shots,
            domain,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn exact(&self, x: &[f64]) -> f64 {
        let psi = evolve(self.graph.vertices(), &self.cuts, &x[..self.depth], &x[self.depth..]);
        expectation_from(&psi, &self.cuts)
    }
}

impl StochasticObjective for QaoaObjective {
    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn sample(&self, x: &[f64], rng: &mut RngStream) -> f64 {
        let psi = evolve(self.graph.vertices(), &self.cuts, &x[..self.depth], &x[self.depth..]);
        sample_mean(&psi, &self.cuts, self.shots, rng)
    }
}
