//! Factorial sweep over `(n, p, seed)` cells and penalty multipliers.

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use crate::error::{MbpError, Result};
use crate::graph::{generate_er, Graph};
use crate::penalty::{lambda_mult_candidates, resolve_lambda, LambdaSpec, LambdaStrategy};
use crate::qubo::{build_mbp_qubo, e_mbp};
use crate::rng;
use crate::solvers::{Instance, Registry, SolveResult};
use crate::timing::Stopwatch;

use super::{graph_key, record_id, solver_seed, to_record, trivial_record, ExperimentRecord, RecordStore};

#[derive(Debug, Clone, PartialEq)]
pub enum Multipliers {
    /// The size-keyed table of candidate multipliers.
    Table,
    List(Vec<f64>),
}

impl Multipliers {
    pub fn for_n(&self, n: usize) -> Vec<f64> {
        match self {
            Multipliers::Table => lambda_mult_candidates(n).to_vec(),
            Multipliers::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum SweepStrategy {
    /// `λ = λ_est · mult` for every candidate multiplier.
    Multipliers(Multipliers),
    /// One fixed strategy per graph (e.g. GBR).
    Single(LambdaStrategy),
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub n_list: Vec<usize>,
    pub p_list: Vec<f64>,
    pub seeds_per_cell: usize,
    pub strategy: SweepStrategy,
    pub solver_ids: Vec<String>,
    pub master_seed: u64,
    /// Concurrently processed graphs; values below 1 mean 1.
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepFailure {
    pub record_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepOutcome {
    pub written: usize,
    pub skipped: usize,
    pub failures: Vec<SweepFailure>,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    n: usize,
    p: f64,
    replicate: usize,
}

/// Seed of replicate `k` of cell `(n, p)`.
pub fn graph_seed(master: u64, n: usize, p: f64, k: usize) -> u64 {
    rng::derive(master, &[n as u64, p.to_bits(), k as u64])
}

impl SweepConfig {
    fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n in &self.n_list {
            for &p in &self.p_list {
                for replicate in 0..self.seeds_per_cell {
                    out.push(Cell { n, p, replicate });
                }
            }
        }
        out
    }

    fn validate(&self, registry: &Registry) -> Result<()> {
        if self.n_list.is_empty() || self.p_list.is_empty() || self.seeds_per_cell == 0 {
            return Err(MbpError::invalid("sweep needs at least one n, one p and one seed"));
        }
        if self.solver_ids.is_empty() {
            return Err(MbpError::invalid("sweep needs at least one solver"));
        }
        for id in &self.solver_ids {
            registry.get(id)?;
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n % 2 == 1 || n < 2) {
            return Err(MbpError::invalid(format!("node count {n} must be even and at least 2")));
        }
        if let Some(&p) = self.p_list.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(MbpError::invalid(format!("edge probability {p} not in [0,1]")));
        }
        Ok(())
    }
}

enum Message {
    Records(Vec<ExperimentRecord>),
    Skipped,
    Failure(SweepFailure),
}

/// Everything for one graph. Records whose id is in `done` are neither
/// solved nor emitted. Solvers that ignore λ run once and their result is
/// recorded under every multiplier.
fn run_graph(
    registry: &Registry,
    cfg: &SweepConfig,
    cell: Cell,
    done: &HashSet<String>,
    emit: &mut dyn FnMut(Message),
) {
    let seed = graph_seed(cfg.master_seed, cell.n, cell.p, cell.replicate);
    let g = match generate_er(cell.n, cell.p, seed) {
        Ok(g) => g,
        Err(e) => {
            let key = format!("n{}-p{}-s{}", cell.n, cell.p, seed);
            emit(Message::Failure(SweepFailure { record_id: key, message: e.to_string() }));
            return;
        }
    };
    let key = graph_key(&g);
    if g.edge_count() == 0 {
        match trivial_record(&g) {
            Ok(r) if !done.contains(&r.record_id) => emit(Message::Records(vec![r])),
            Ok(_) => emit(Message::Skipped),
            Err(e) => emit(Message::Failure(SweepFailure { record_id: key, message: e.to_string() })),
        }
        return;
    }

    let strategies: Vec<LambdaStrategy> = match &cfg.strategy {
        SweepStrategy::Multipliers(m) => {
            m.for_n(cell.n).into_iter().map(LambdaStrategy::EstTimesMult).collect()
        }
        SweepStrategy::Single(s) => vec![s.clone()],
    };
    let mut specs: Vec<LambdaSpec> = Vec::new();
    for s in &strategies {
        match resolve_lambda(&g, s) {
            Ok(spec) => specs.push(spec),
            Err(e) => {
                let id = format!("{key}/{}", s.kind());
                emit(Message::Failure(SweepFailure { record_id: id, message: e.to_string() }));
            }
        }
    }

    for id in &cfg.solver_ids {
        let Ok(backend) = registry.get(id) else { continue };
        let caps = backend.capabilities();
        let params = backend.params();
        let seed = solver_seed(seed, id);
        let mut shared: Option<SolveResult> = None;
        let mut batch = Vec::new();
        for spec in &specs {
            let rid = record_id(&key, Some(spec), id);
            if done.contains(&rid) {
                emit(Message::Skipped);
                continue;
            }
            let result =
                solve_one(registry, &g, spec, id, caps.needs_qubo, caps.needs_lambda, seed, &mut shared);
            match result {
                Ok((r, qubo_secs)) => {
                    batch.push(to_record(&g, &key, Some(spec), id, params.clone(), &r, qubo_secs))
                }
                Err(e) => emit(Message::Failure(SweepFailure { record_id: rid, message: e.to_string() })),
            }
        }
        if !batch.is_empty() {
            emit(Message::Records(batch));
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn solve_one(
    registry: &Registry,
    g: &Graph,
    spec: &LambdaSpec,
    id: &str,
    needs_qubo: bool,
    needs_lambda: bool,
    seed: u64,
    shared: &mut Option<SolveResult>,
) -> Result<(SolveResult, Option<f64>)> {
    if !needs_lambda {
        if shared.is_none() {
            *shared = Some(registry.solve_with(id, &Instance::graph_only(g), seed)?);
        }
        let mut r = shared.clone().expect("just solved");
        r.energy = e_mbp(g, spec.lambda, &r.assignment)?;
        return Ok((r, None));
    }
    if needs_qubo {
        let clock = Stopwatch::start();
        let q = build_mbp_qubo(g, spec.lambda)?;
        let secs = clock.elapsed().as_secs_f64();
        let inst = Instance { graph: g, lambda: Some(spec.lambda), qubo: Some(&q) };
        return Ok((registry.solve_with(id, &inst, seed)?, Some(secs)));
    }
    Ok((registry.solve_with(id, &Instance::with_lambda(g, spec.lambda), seed)?, None))
}

/// Run the full factorial, appending to `store` and skipping records already
/// present. Per-record failures are collected, not fatal.
pub fn sweep(cfg: &SweepConfig, registry: &Registry, store: &mut RecordStore) -> Result<SweepOutcome> {
    cfg.validate(registry)?;
    let done = store.record_ids()?;
    let cells = cfg.cells();
    let mut outcome = SweepOutcome::default();
    let mut sink = |msg: Message, outcome: &mut SweepOutcome| -> Result<()> {
        match msg {
            Message::Records(recs) => {
                store.append(&recs)?;
                outcome.written += recs.len();
            }
            Message::Skipped => outcome.skipped += 1,
            Message::Failure(f) => {
                log::warn!("{}: {}", f.record_id, f.message);
                outcome.failures.push(f);
            }
        }
        Ok(())
    };

    let jobs = cfg.jobs.max(1).min(cells.len());
    if jobs <= 1 {
        for &cell in &cells {
            let mut pending = Vec::new();
            run_graph(registry, cfg, cell, &done, &mut |m| pending.push(m));
            for m in pending {
                sink(m, &mut outcome)?;
            }
        }
    } else {
        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel::<Message>();
        std::thread::scope(|scope| -> Result<()> {
            for _ in 0..jobs {
                let tx = tx.clone();
                let (next, cells, done) = (&next, &cells, &done);
                scope.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(&cell) = cells.get(i) else { break };
                    run_graph(registry, cfg, cell, done, &mut |m| {
                        let _ = tx.send(m);
                    });
                });
            }
            drop(tx);
            for m in rx {
                sink(m, &mut outcome)?;
            }
            Ok(())
        })?;
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{determinism_hash, RecordFilter};
    use crate::solvers::SaParams;

    fn cfg(jobs: usize) -> SweepConfig {
        SweepConfig {
            n_list: vec![20],
            p_list: vec![0.5],
            seeds_per_cell: 2,
            strategy: SweepStrategy::Multipliers(Multipliers::List(vec![0.05, 0.1, 0.2, 0.4])),
            solver_ids: vec!["sa-mbp".into(), "kl".into()],
            master_seed: 42,
            jobs,
        }
    }

    fn registry() -> Registry {
        Registry::with_builtins(SaParams { sweeps: 100, restarts: 2, ..Default::default() })
    }

    #[test]
    fn counts_resume_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let reg = registry();
        let mut store = RecordStore::open(&path).unwrap();
        let out = sweep(&cfg(1), &reg, &mut store).unwrap();
        assert_eq!(out.written, 2 * 4 * 2);
        assert!(out.failures.is_empty());
        let first = store.scan(&RecordFilter::default()).unwrap().records;

        let again = sweep(&cfg(1), &reg, &mut store).unwrap();
        assert_eq!((again.written, again.skipped), (0, 16));
        let ids: HashSet<_> =
            store.scan(&RecordFilter::default()).unwrap().records.into_iter().map(|r| r.record_id).collect();
        assert_eq!(ids.len(), 16);

        let other = dir.path().join("t.jsonl");
        let mut store2 = RecordStore::open(&other).unwrap();
        sweep(&cfg(3), &reg, &mut store2).unwrap();
        let second = store2.scan(&RecordFilter::default()).unwrap().records;
        assert_eq!(determinism_hash(&first).unwrap(), determinism_hash(&second).unwrap());
    }

    #[test]
    fn graph_native_results_are_shared_across_multipliers() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RecordStore::open(dir.path().join("s.jsonl")).unwrap();
        sweep(&cfg(1), &registry(), &mut store).unwrap();
        let kl =
            store.scan(&RecordFilter { solver: Some("kl".into()), ..Default::default() }).unwrap().records;
        for pair in kl.chunks(4) {
            assert!(pair.iter().all(|r| r.inter_edges == pair[0].inter_edges));
            assert!(pair.iter().all(|r| r.balanced));
        }
    }

    #[test]
    fn partial_store_is_completed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let reg = registry();
        let mut store = RecordStore::open(&path).unwrap();
        let mut small = cfg(1);
        small.seeds_per_cell = 1;
        sweep(&small, &reg, &mut store).unwrap();
        let out = sweep(&cfg(1), &reg, &mut store).unwrap();
        assert_eq!(out.written, 8);
        assert_eq!(store.record_ids().unwrap().len(), 16);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RecordStore::open(dir.path().join("s.jsonl")).unwrap();
        let reg = registry();
        let mut c = cfg(1);
        c.n_list = vec![21];
        assert!(sweep(&c, &reg, &mut store).is_err());
        let mut c = cfg(1);
        c.solver_ids = vec!["nope".into()];
        assert!(matches!(sweep(&c, &reg, &mut store), Err(MbpError::UnknownSolver(_))));
    }
}
