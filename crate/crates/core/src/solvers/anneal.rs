//! Single-bit-flip simulated annealing.
//!
//! One annealing loop drives any [`FlipState`]. Two states are provided:
//! [`DenseQuboState`] works on an arbitrary [`QuboMatrix`] and keeps a local
//! field per variable (O(n) per accepted flip); [`ImplicitMbpState`] never
//! materializes the matrix and evaluates a flip from the node's degree, the
//! number of its neighbors in S1 and the running set size.
//!
//! Schedule: `restarts` independent runs, restart `r` seeded with
//! `seed ^ r`. Each run starts from a uniform random assignment and performs
//! `sweeps` sequential passes over the variables. Every proposal consumes one
//! uniform draw `u` and is accepted iff `ΔE <= 0` or `u < exp(−ΔE / t)`.
//! After each pass `t ← max(t · cooling, t_final)`. The best state seen at
//! the end of a pass is kept.
//!
//! Because both states consume the random stream identically, running the
//! dense and implicit forms of the same instance with the same seed gives the
//! same trajectory whenever their ΔE values agree.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MbpError, Result};
use crate::graph::Graph;
use crate::qubo::{e_mbp, energy, PartitionAssignment, QuboMatrix};
use crate::rng::{self, Stream};
use crate::timing::Stopwatch;

use super::SolveResult;

/// Number of random single-flip probes used to pick the AUTO temperature.
pub const AUTO_TEMPERATURE_SAMPLES: usize = 1000;
const CALIBRATION_LABEL: u64 = 0xCA1B;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Temperature {
    /// 95th percentile of |ΔE| over random single flips from a random start.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaParams {
    pub sweeps: usize,
    pub restarts: usize,
    pub t_initial: Temperature,
    pub cooling: f64,
    /// Floor for the temperature; `None` means `1e-3 · t_initial`.
    pub t_final: Option<f64>,
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams { sweeps: 2000, restarts: 8, t_initial: Temperature::Auto, cooling: 0.97, t_final: None }
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps < 1 || self.restarts < 1 {
            return Err(MbpError::invalid("sweeps and restarts must be at least 1"));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(MbpError::invalid(format!("cooling {} not in (0,1)", self.cooling)));
        }
        if let Temperature::Fixed(t) = self.t_initial {
            if !(t > 0.0) || !t.is_finite() {
                return Err(MbpError::invalid(format!("initial temperature {t} must be positive")));
            }
        }
        if let Some(t) = self.t_final {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(MbpError::invalid(format!("final temperature {t} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// State of a binary optimization problem under single-bit flips.
pub trait FlipState {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Load an assignment, recomputing all cached quantities.
    fn reset(&mut self, x: &PartitionAssignment);
    /// Energy change if bit `i` were flipped.
    fn delta(&self, i: usize) -> f64;
    fn flip(&mut self, i: usize);
    /// Tracked energy of the current assignment (offset included).
    fn energy(&self) -> f64;
    fn assignment(&self) -> &PartitionAssignment;
    /// Energy recomputed from scratch for an arbitrary assignment.
    fn exact_energy(&self, x: &PartitionAssignment) -> f64;
}

pub struct DenseQuboState<'a> {
    q: &'a QuboMatrix,
    x: PartitionAssignment,
    field: Vec<f64>,
    energy: f64,
}

impl<'a> DenseQuboState<'a> {
    pub fn new(q: &'a QuboMatrix) -> Self {
        let mut s =
            DenseQuboState { q, x: PartitionAssignment::zeros(q.order()), field: Vec::new(), energy: 0.0 };
        s.reset(&PartitionAssignment::zeros(q.order()));
        s
    }
}

impl FlipState for DenseQuboState<'_> {
    fn len(&self) -> usize {
        self.q.order()
    }

    fn reset(&mut self, x: &PartitionAssignment) {
        let n = self.q.order();
        self.x = x.clone();
        self.field = (0..n).map(|i| self.q.sym(i, i)).collect();
        for i in 0..n {
            if !x.get(i) {
                continue;
            }
            let row = self.q.row(i);
            for (k, &v) in row[1..].iter().enumerate() {
                self.field[i + 1 + k] += v;
            }
            for j in 0..i {
                self.field[j] += self.q.sym(j, i);
            }
        }
        self.energy = energy(self.q, x).expect("length checked") + self.q.offset();
    }

    #[inline]
    fn delta(&self, i: usize) -> f64 {
        if self.x.get(i) {
            -self.field[i]
        } else {
            self.field[i]
        }
    }

    fn flip(&mut self, i: usize) {
        self.energy += self.delta(i);
        self.x.flip(i);
        let s = if self.x.get(i) { 1.0 } else { -1.0 };
        for j in 0..i {
            self.field[j] += s * self.q.sym(j, i);
        }
        let row = self.q.row(i);
        for (k, &v) in row[1..].iter().enumerate() {
            self.field[i + 1 + k] += s * v;
        }
    }

    fn energy(&self) -> f64 {
        self.energy
    }

    fn assignment(&self) -> &PartitionAssignment {
        &self.x
    }

    fn exact_energy(&self, x: &PartitionAssignment) -> f64 {
        energy(self.q, x).expect("length checked") + self.q.offset()
    }
}

/// `E_MBP` evaluated directly on the graph.
pub struct ImplicitMbpState<'a> {
    g: &'a Graph,
    lambda: f64,
    x: PartitionAssignment,
    /// Neighbors of each node currently in S1.
    ones_adjacent: Vec<u32>,
    ones: i64,
    cut: i64,
}

impl<'a> ImplicitMbpState<'a> {
    pub fn new(g: &'a Graph, lambda: f64) -> Self {
        let mut s = ImplicitMbpState {
            g,
            lambda,
            x: PartitionAssignment::zeros(g.node_count()),
            ones_adjacent: Vec::new(),
            ones: 0,
            cut: 0,
        };
        s.reset(&PartitionAssignment::zeros(g.node_count()));
        s
    }

    /// `2|S1| − n`.
    #[inline]
    fn surplus(&self) -> i64 {
        2 * self.ones - self.g.node_count() as i64
    }
}

impl FlipState for ImplicitMbpState<'_> {
    fn len(&self) -> usize {
        self.g.node_count()
    }

    fn reset(&mut self, x: &PartitionAssignment) {
        let n = self.g.node_count();
        self.x = x.clone();
        self.ones = x.count_ones() as i64;
        self.ones_adjacent = (0..n)
            .map(|i| self.g.neighbors(i).iter().filter(|&&j| x.get(j as usize)).count() as u32)
            .collect();
        self.cut =
            self.g.edges().iter().filter(|&&(i, j)| x.get(i as usize) != x.get(j as usize)).count() as i64;
    }

    #[inline]
    fn delta(&self, i: usize) -> f64 {
        let deg = self.g.degree(i) as i64;
        let a = i64::from(self.ones_adjacent[i]);
        let d = self.surplus();
        // (k ± 1 − n/2)² − (k − n/2)² = 1 ± (2k − n)
        let (dcut, dsq) = if self.x.get(i) { (2 * a - deg, 1 - d) } else { (deg - 2 * a, 1 + d) };
        dcut as f64 + self.lambda * dsq as f64
    }

    fn flip(&mut self, i: usize) {
        let deg = self.g.degree(i) as i64;
        let a = i64::from(self.ones_adjacent[i]);
        let up = !self.x.get(i);
        self.x.flip(i);
        if up {
            self.cut += deg - 2 * a;
            self.ones += 1;
            for &j in self.g.neighbors(i) {
                self.ones_adjacent[j as usize] += 1;
            }
        } else {
            self.cut += 2 * a - deg;
            self.ones -= 1;
            for &j in self.g.neighbors(i) {
                self.ones_adjacent[j as usize] -= 1;
            }
        }
    }

    fn energy(&self) -> f64 {
        let half = self.surplus() / 2;
        self.cut as f64 + self.lambda * (half * half) as f64
    }

    fn assignment(&self) -> &PartitionAssignment {
        &self.x
    }

    fn exact_energy(&self, x: &PartitionAssignment) -> f64 {
        e_mbp(self.g, self.lambda, x).expect("length checked")
    }
}

fn random_assignment(n: usize, stream: &mut Stream) -> PartitionAssignment {
    PartitionAssignment::new((0..n).map(|_| rng::unit_f64(stream) < 0.5).collect())
}

/// 95th percentile (nearest rank) of |ΔE| over random single-flip probes
/// from a random start. Falls back to 1 on a flat landscape.
fn auto_temperature<S: FlipState>(state: &mut S, seed: u64) -> f64 {
    let n = state.len();
    let mut stream = rng::stream(rng::derive(seed, &[CALIBRATION_LABEL]));
    let start = random_assignment(n, &mut stream);
    state.reset(&start);
    let mut probes: Vec<f64> =
        (0..AUTO_TEMPERATURE_SAMPLES).map(|_| state.delta(stream.gen_range(0..n)).abs()).collect();
    probes.sort_by(f64::total_cmp);
    let rank = (0.95 * probes.len() as f64).ceil() as usize;
    let t = probes[rank.saturating_sub(1)];
    if t > 0.0 && t.is_finite() {
        t
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealOutcome {
    pub best: PartitionAssignment,
    /// Recomputed from scratch for `best`.
    pub best_energy: f64,
    pub t_initial: f64,
    pub proposals: u64,
}

pub fn anneal<S: FlipState>(state: &mut S, params: &SaParams, seed: u64) -> Result<AnnealOutcome> {
    params.validate()?;
    let n = state.len();
    if n == 0 {
        let empty = PartitionAssignment::zeros(0);
        let e = state.exact_energy(&empty);
        return Ok(AnnealOutcome { best: empty, best_energy: e, t_initial: 0.0, proposals: 0 });
    }
    let t0 = match params.t_initial {
        Temperature::Auto => auto_temperature(state, seed),
        Temperature::Fixed(t) => t,
    };
    let t_floor = params.t_final.unwrap_or(1e-3 * t0);

    let mut best: Option<(PartitionAssignment, f64)> = None;
    let mut proposals = 0u64;
    for r in 0..params.restarts {
        let mut stream = rng::stream(seed ^ r as u64);
        let start = random_assignment(n, &mut stream);
        state.reset(&start);
        let mut t = t0;
        for _ in 0..params.sweeps {
            for i in 0..n {
                let u = rng::unit_f64(&mut stream);
                let d = state.delta(i);
                if d <= 0.0 || u < (-d / t).exp() {
                    state.flip(i);
                }
            }
            proposals += n as u64;
            let e = state.energy();
            let improved = match &best {
                None => true,
                Some((_, b)) => e < b - 1e-9 * b.abs().max(1.0),
            };
            if improved {
                best = Some((state.assignment().clone(), e));
            }
            t = (t * params.cooling).max(t_floor);
        }
    }
    let (best, _) = best.expect("at least one sweep ran");
    let best_energy = state.exact_energy(&best);
    Ok(AnnealOutcome { best, best_energy, t_initial: t0, proposals })
}

/// Anneal an arbitrary QUBO. Returns the best assignment and its energy
/// (offset included).
pub fn solve_sa_qubo(q: &QuboMatrix, params: &SaParams, seed: u64) -> Result<AnnealOutcome> {
    anneal(&mut DenseQuboState::new(q), params, seed)
}

/// Anneal the dense QUBO `q` built from `g`.
pub fn solve_sa(g: &Graph, q: &QuboMatrix, params: &SaParams, seed: u64) -> Result<SolveResult> {
    if q.order() != g.node_count() {
        return Err(MbpError::invalid("matrix order does not match graph"));
    }
    let clock = Stopwatch::start();
    let out = solve_sa_qubo(q, params, seed)?;
    Ok(SolveResult::assemble(g, out.best, out.best_energy, "sa", clock.elapsed())?
        .with_seed(seed)
        .with_iterations(out.proposals))
}

/// Anneal `E_MBP(g, λ)` without building the matrix.
pub fn solve_sa_mbp(g: &Graph, lambda: f64, params: &SaParams, seed: u64) -> Result<SolveResult> {
    g.require_even()?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(MbpError::invalid(format!("penalty must be positive, got {lambda}")));
    }
    let clock = Stopwatch::start();
    let out = anneal(&mut ImplicitMbpState::new(g, lambda), params, seed)?;
    Ok(SolveResult::assemble(g, out.best, out.best_energy, "sa-mbp", clock.elapsed())?
        .with_seed(seed)
        .with_iterations(out.proposals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_er;
    use crate::penalty::lambda_est;
    use crate::qubo::build_mbp_qubo;
    use crate::solvers::minimize_qubo_exhaustive;

    #[test]
    fn implicit_and_dense_deltas_agree() {
        let mut r = rng::stream(11);
        for trial in 0..1000u64 {
            let n = 2 * r.gen_range(1..9usize);
            let g = generate_er(n, rng::unit_f64(&mut r), trial).unwrap();
            let lambda = 0.01 + 20.0 * rng::unit_f64(&mut r);
            let q = build_mbp_qubo(&g, lambda).unwrap();
            let x = random_assignment(n, &mut r);
            let mut dense = DenseQuboState::new(&q);
            let mut implicit = ImplicitMbpState::new(&g, lambda);
            dense.reset(&x);
            implicit.reset(&x);
            assert!((dense.energy() - implicit.energy()).abs() <= 1e-9 * implicit.energy().abs().max(1.0));
            for i in 0..n {
                assert!((dense.delta(i) - implicit.delta(i)).abs() <= 1e-9, "trial {trial}");
            }
            let i = r.gen_range(0..n);
            dense.flip(i);
            implicit.flip(i);
            for j in 0..n {
                assert!((dense.delta(j) - implicit.delta(j)).abs() <= 1e-9);
            }
            let exact = e_mbp(&g, lambda, implicit.assignment()).unwrap();
            assert!((implicit.energy() - exact).abs() <= 1e-9 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn flat_landscape_returns_the_offset() {
        let mut q = QuboMatrix::zeros(6);
        q.set_offset(2.5);
        let params = SaParams { sweeps: 10, restarts: 2, ..Default::default() };
        let out = solve_sa_qubo(&q, &params, 3).unwrap();
        assert_eq!(out.best_energy, 2.5);
        assert_eq!(out.t_initial, 1.0);
    }

    #[test]
    fn path_graph_reaches_the_optimum() {
        let g = Graph::path(4);
        let q = build_mbp_qubo(&g, 1.0).unwrap();
        let r = solve_sa(&g, &q, &SaParams::default(), 1).unwrap();
        assert_eq!(r.energy, 1.0);
        let r = solve_sa_mbp(&g, 1.0, &SaParams::default(), 1).unwrap();
        assert_eq!((r.inter_edges, r.balanced, r.energy), (1, true, 1.0));
    }

    #[test]
    fn dense_and_implicit_share_trajectories() {
        let params = SaParams { sweeps: 200, restarts: 3, ..Default::default() };
        for seed in 0..10 {
            let g = generate_er(16, 0.5, 100 + seed).unwrap();
            let lambda = lambda_est(&g).unwrap();
            let q = build_mbp_qubo(&g, lambda).unwrap();
            let a = solve_sa(&g, &q, &params, seed).unwrap();
            let b = solve_sa_mbp(&g, lambda, &params, seed).unwrap();
            assert_eq!(a.assignment, b.assignment);
            assert_eq!(a.energy, b.energy);
        }
    }

    #[test]
    fn small_instances_mostly_solved() {
        let mut hits = 0;
        for seed in 0..10 {
            let g = generate_er(12, 0.5, seed).unwrap();
            let q = build_mbp_qubo(&g, lambda_est(&g).unwrap()).unwrap();
            let (_, opt) = minimize_qubo_exhaustive(&q).unwrap();
            let r = solve_sa(&g, &q, &SaParams::default(), seed).unwrap();
            assert!(r.energy >= opt - 1e-9);
            hits += usize::from((r.energy - opt).abs() < 1e-9);
        }
        assert!(hits >= 9, "{hits}/10");
    }

    #[test]
    fn reproducible_given_seed() {
        let g = generate_er(40, 0.3, 5).unwrap();
        let p = SaParams { sweeps: 100, ..Default::default() };
        let a = solve_sa_mbp(&g, 2.0, &p, 77).unwrap();
        let b = solve_sa_mbp(&g, 2.0, &p, 77).unwrap();
        assert_eq!(a.assignment, b.assignment);
    }

    #[test]
    fn parameter_validation() {
        let bad = [
            SaParams { cooling: 1.0, ..Default::default() },
            SaParams { cooling: 0.0, ..Default::default() },
            SaParams { sweeps: 0, ..Default::default() },
            SaParams { restarts: 0, ..Default::default() },
            SaParams { t_initial: Temperature::Fixed(-1.0), ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
        assert!(solve_sa_mbp(&Graph::path(3), 1.0, &SaParams::default(), 0).is_err());
    }
}
