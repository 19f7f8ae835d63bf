//! Experiment pipeline: run solvers on instances, persist records, sweep
//! the penalty multiplier, and derive λ ranges and reports from the store.

mod report;
mod store;
mod sweep;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{MbpError, Result};
use crate::graph::{generate_er, Graph};
use crate::penalty::{resolve_lambda, LambdaSpec, LambdaStrategy, StrategyKind};
use crate::qubo::{build_mbp_qubo, PartitionAssignment};
use crate::rng;
use crate::solvers::{
    solve_sa, solve_sa_mbp, Instance, PreRepair, Registry, SaParams, SolveResult, ID_SA, ID_SA_MBP,
};
use crate::timing::{unix_now, Stopwatch};

pub use report::{
    compare_report, extract_lambda_ranges, success_heatmap, CompareReport, CompareRow, HeatCell,
    LambdaRangeExtraction, LambdaRangeRow, MultiplierCell, SuccessHeatmap, COMPARE_COLUMNS, HEATMAP_COLUMNS,
    MULTIPLIER_COLUMNS, RANGE_COLUMNS,
};
pub use store::{scan, RecordFilter, RecordStore, ScanOutcome, STORE_SCHEMA, STORE_VERSION};
pub use sweep::{sweep, Multipliers, SweepConfig, SweepFailure, SweepOutcome, SweepStrategy};

/// Solver id of the record written for edgeless graphs.
pub const TRIVIAL_SOLVER: &str = "trivial";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub n: usize,
    pub p: Option<f64>,
    pub seed: Option<u64>,
    pub density: f64,
    pub max_degree: usize,
    pub edge_count: usize,
}

impl GraphSummary {
    pub fn of(g: &Graph) -> Self {
        let meta = g.meta();
        GraphSummary {
            n: g.node_count(),
            p: meta.map(|m| m.p),
            seed: meta.map(|m| m.seed),
            density: g.density(),
            max_degree: g.max_degree(),
            edge_count: g.edge_count(),
        }
    }
}

/// Stable identifier of a graph: its generation parameters, or a digest of
/// its edge list when those are unknown.
pub fn graph_key(g: &Graph) -> String {
    match g.meta() {
        Some(m) => format!("n{}-p{}-s{}", g.node_count(), m.p, m.seed),
        None => {
            let digest = Sha256::digest(g.to_edge_list().as_bytes());
            let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
            format!("n{}-h{hex}", g.node_count())
        }
    }
}

fn strategy_tag(spec: Option<&LambdaSpec>) -> String {
    match spec {
        None => "none".into(),
        Some(s) => match s.strategy {
            StrategyKind::EstTimesMult => format!("mult={}", s.multiplier.unwrap_or(f64::NAN)),
            StrategyKind::Fixed => format!("fixed={}", s.lambda),
            StrategyKind::MaxcutP => "maxcut".into(),
            StrategyKind::Est => "est".into(),
            StrategyKind::Gbr => "gbr".into(),
        },
    }
}

/// `graph/strategy/solver`; the resume key of a sweep.
pub fn record_id(graph_key: &str, spec: Option<&LambdaSpec>, solver_id: &str) -> String {
    format!("{graph_key}/{}/{solver_id}", strategy_tag(spec))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub record_id: String,
    pub graph_key: String,
    pub graph: GraphSummary,
    pub lambda_spec: Option<LambdaSpec>,
    pub solver_id: String,
    pub solver_seed: Option<u64>,
    #[serde(default)]
    pub solver_params: Value,
    pub inter_edges: u64,
    pub balanced: bool,
    pub balance_deviation: u64,
    pub energy: f64,
    pub pre_repair: Option<PreRepair>,
    /// Seconds spent building the QUBO matrix; absent when none was built.
    pub wall_time_qubo_build: Option<f64>,
    /// Seconds spent in the solver.
    pub wall_time_solve: f64,
    /// Unix seconds.
    pub created_at: u64,
}

impl ExperimentRecord {
    pub fn multiplier(&self) -> Option<f64> {
        self.lambda_spec.as_ref().and_then(|s| s.multiplier)
    }

    pub fn strategy(&self) -> Option<StrategyKind> {
        self.lambda_spec.as_ref().map(|s| s.strategy)
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda_spec.as_ref().map(|s| s.lambda)
    }
}

/// Fields excluded from the determinism hash.
pub const TIMING_FIELDS: [&str; 3] = ["wall_time_qubo_build", "wall_time_solve", "created_at"];

/// SHA-256 over the records sorted by id, with timing fields removed.
pub fn determinism_hash(records: &[ExperimentRecord]) -> Result<String> {
    let mut lines = records
        .iter()
        .map(|r| {
            let mut v = serde_json::to_value(r)?;
            if let Value::Object(map) = &mut v {
                for f in TIMING_FIELDS {
                    map.remove(f);
                }
            }
            Ok((r.record_id.clone(), serde_json::to_string(&v)?))
        })
        .collect::<Result<Vec<_>>>()?;
    lines.sort();
    let mut h = Sha256::new();
    for (_, line) in lines {
        h.update(line.as_bytes());
        h.update(b"\n");
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Stable 64-bit label for a string.
pub(crate) fn label(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3))
}

/// Seed handed to `solver_id` for a graph: fixed per (base seed, solver), so
/// repeated runs over multipliers share the solver's random stream.
pub fn solver_seed(base: u64, solver_id: &str) -> u64 {
    rng::derive(base, &[label(solver_id)])
}

pub(crate) fn to_record(
    g: &Graph,
    key: &str,
    spec: Option<&LambdaSpec>,
    solver_id: &str,
    params: Value,
    r: &SolveResult,
    qubo_secs: Option<f64>,
) -> ExperimentRecord {
    ExperimentRecord {
        record_id: record_id(key, spec, solver_id),
        graph_key: key.to_string(),
        graph: GraphSummary::of(g),
        lambda_spec: spec.cloned(),
        solver_id: solver_id.to_string(),
        solver_seed: r.seed,
        solver_params: params,
        inter_edges: r.inter_edges,
        balanced: r.balanced,
        balance_deviation: r.balance_deviation,
        energy: r.energy,
        pre_repair: r.pre_repair,
        wall_time_qubo_build: qubo_secs,
        wall_time_solve: r.wall_time.as_secs_f64(),
        created_at: unix_now(),
    }
}

/// Record for an edgeless graph: any bisection has cut 0.
pub fn trivial_record(g: &Graph) -> Result<ExperimentRecord> {
    g.require_even()?;
    let n = g.node_count();
    let x = PartitionAssignment::new((0..n).map(|i| i < n / 2).collect());
    let r = SolveResult::assemble(g, x, 0.0, TRIVIAL_SOLVER, std::time::Duration::ZERO)?;
    Ok(to_record(g, &graph_key(g), None, TRIVIAL_SOLVER, Value::Null, &r, None))
}

/// Resolve λ, build the matrix once if any solver consumes it, and run every
/// solver. Solver seeds derive from `seed`. Strategy errors surface before
/// any solve; edgeless graphs yield a single trivial record.
pub fn run_instance(
    registry: &Registry,
    g: &Graph,
    strategy: &LambdaStrategy,
    solver_ids: &[&str],
    seed: u64,
) -> Result<Vec<ExperimentRecord>> {
    g.require_even()?;
    if g.edge_count() == 0 {
        return Ok(vec![trivial_record(g)?]);
    }
    let spec = resolve_lambda(g, strategy)?;
    let mut caps = Vec::with_capacity(solver_ids.len());
    for id in solver_ids {
        caps.push(registry.capabilities(id)?);
    }
    let (qubo, qubo_secs) = if caps.iter().any(|c| c.needs_qubo) {
        let clock = Stopwatch::start();
        let q = build_mbp_qubo(g, spec.lambda)?;
        (Some(q), Some(clock.elapsed().as_secs_f64()))
    } else {
        (None, None)
    };
    let key = graph_key(g);
    let mut out = Vec::with_capacity(solver_ids.len());
    for (id, cap) in solver_ids.iter().zip(&caps) {
        let inst = Instance {
            graph: g,
            lambda: Some(spec.lambda),
            qubo: if cap.needs_qubo { qubo.as_ref() } else { None },
        };
        let r = registry.solve_with(id, &inst, solver_seed(seed, id))?;
        let params = registry.get(id)?.params();
        let secs = if cap.needs_qubo { qubo_secs } else { None };
        out.push(to_record(g, &key, Some(&spec), id, params, &r, secs));
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub checked: usize,
    pub replayed: usize,
    pub mismatches: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Regenerate each generated graph from `(n, p, seed)` and compare the stored
/// summary. With `replay`, also re-solve from the stored λ and solver seed
/// and compare cut and balance. SA records are replayed with their stored
/// parameters; other solvers through `registry`.
pub fn audit(records: &[ExperimentRecord], registry: &Registry, replay: bool) -> Result<AuditReport> {
    let mut report = AuditReport::default();
    for rec in records {
        let (Some(p), Some(seed)) = (rec.graph.p, rec.graph.seed) else { continue };
        report.checked += 1;
        let g = generate_er(rec.graph.n, p, seed)?;
        if GraphSummary::of(&g) != rec.graph {
            report.mismatches.push(format!("{}: graph summary differs from regeneration", rec.record_id));
            continue;
        }
        if !replay || rec.solver_id == TRIVIAL_SOLVER {
            continue;
        }
        let Some(solver_seed) = rec.solver_seed else { continue };
        let lambda = rec.lambda();
        let r = match (rec.solver_id.as_str(), lambda) {
            (ID_SA, Some(l)) => {
                let params: SaParams = serde_json::from_value(rec.solver_params.clone())?;
                solve_sa(&g, &build_mbp_qubo(&g, l)?, &params, solver_seed)?
            }
            (ID_SA_MBP, Some(l)) => {
                let params: SaParams = serde_json::from_value(rec.solver_params.clone())?;
                solve_sa_mbp(&g, l, &params, solver_seed)?
            }
            (id, _) => {
                let inst = Instance { graph: &g, lambda, qubo: None };
                match registry.solve_with(id, &inst, solver_seed) {
                    Ok(r) => r,
                    Err(MbpError::UnknownSolver(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
        };
        report.replayed += 1;
        if r.inter_edges != rec.inter_edges || r.balanced != rec.balanced {
            report.mismatches.push(format!(
                "{}: stored cut {} balanced {}, replay cut {} balanced {}",
                rec.record_id, rec.inter_edges, rec.balanced, r.inter_edges, r.balanced
            ));
        }
    }
    Ok(report)
}
