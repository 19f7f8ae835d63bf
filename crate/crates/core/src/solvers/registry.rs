use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::Value;

use crate::error::{MbpError, Result};
use crate::graph::Graph;
use crate::qubo::{build_mbp_qubo, e_mbp, QuboMatrix};

use super::{
    solve_exact_bisection, solve_exact_qubo, solve_kl, solve_multilevel, solve_sa, solve_sa_mbp, SaParams,
    SolveResult, MAX_EXACT_NODES,
};

pub const ID_EXACT_QUBO: &str = "exact-qubo";
pub const ID_EXACT_BISECTION: &str = "exact-bisection";
pub const ID_SA: &str = "sa";
pub const ID_SA_MBP: &str = "sa-mbp";
pub const ID_HYBRID_STANDIN: &str = "hybrid-standin";
pub const ID_KL: &str = "kl";
pub const ID_MULTILEVEL: &str = "multilevel";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub max_nodes: Option<usize>,
    /// Consumes a dense QUBO matrix.
    pub needs_qubo: bool,
    /// Consumes a penalty weight (directly or through the matrix).
    pub needs_lambda: bool,
    /// Output does not depend on the seed.
    pub deterministic: bool,
}

/// One problem handed to a backend. `qubo`, when present, must have been
/// built from `graph` with `lambda`.
#[derive(Debug, Clone, Copy)]
pub struct Instance<'a> {
    pub graph: &'a Graph,
    pub lambda: Option<f64>,
    pub qubo: Option<&'a QuboMatrix>,
}

impl<'a> Instance<'a> {
    pub fn graph_only(graph: &'a Graph) -> Self {
        Instance { graph, lambda: None, qubo: None }
    }

    pub fn with_lambda(graph: &'a Graph, lambda: f64) -> Self {
        Instance { graph, lambda: Some(lambda), qubo: None }
    }

    fn lambda(&self) -> Result<f64> {
        self.lambda.ok_or_else(|| MbpError::invalid("this solver needs a penalty weight"))
    }
}

pub trait SolverBackend: Send + Sync {
    fn capabilities(&self) -> Capabilities;
    fn solve(&self, instance: &Instance<'_>, seed: u64) -> Result<SolveResult>;
    /// Parameters recorded alongside results.
    fn params(&self) -> Value {
        Value::Null
    }
}

struct ExactQubo;
struct ExactBisection;
struct DenseSa(SaParams);
struct ImplicitSa(SaParams);
struct Kl;
struct Multilevel;

fn with_qubo<T>(inst: &Instance<'_>, f: impl FnOnce(&QuboMatrix) -> Result<T>) -> Result<T> {
    match inst.qubo {
        Some(q) => f(q),
        None => f(&build_mbp_qubo(inst.graph, inst.lambda()?)?),
    }
}

impl SolverBackend for ExactQubo {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            max_nodes: Some(MAX_EXACT_NODES),
            needs_qubo: true,
            needs_lambda: true,
            deterministic: true,
        }
    }
    fn solve(&self, inst: &Instance<'_>, _seed: u64) -> Result<SolveResult> {
        with_qubo(inst, |q| solve_exact_qubo(inst.graph, q))
    }
}

impl SolverBackend for ExactBisection {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            max_nodes: Some(MAX_EXACT_NODES),
            needs_qubo: false,
            needs_lambda: false,
            deterministic: true,
        }
    }
    fn solve(&self, inst: &Instance<'_>, _seed: u64) -> Result<SolveResult> {
        solve_exact_bisection(inst.graph)
    }
}

impl SolverBackend for DenseSa {
    fn capabilities(&self) -> Capabilities {
        Capabilities { max_nodes: None, needs_qubo: true, needs_lambda: true, deterministic: false }
    }
    fn solve(&self, inst: &Instance<'_>, seed: u64) -> Result<SolveResult> {
        with_qubo(inst, |q| solve_sa(inst.graph, q, &self.0, seed))
    }
    fn params(&self) -> Value {
        serde_json::to_value(self.0).unwrap_or(Value::Null)
    }
}

impl SolverBackend for ImplicitSa {
    fn capabilities(&self) -> Capabilities {
        Capabilities { max_nodes: None, needs_qubo: false, needs_lambda: true, deterministic: false }
    }
    fn solve(&self, inst: &Instance<'_>, seed: u64) -> Result<SolveResult> {
        solve_sa_mbp(inst.graph, inst.lambda()?, &self.0, seed)
    }
    fn params(&self) -> Value {
        serde_json::to_value(self.0).unwrap_or(Value::Null)
    }
}

impl SolverBackend for Kl {
    fn capabilities(&self) -> Capabilities {
        Capabilities { max_nodes: None, needs_qubo: false, needs_lambda: false, deterministic: false }
    }
    fn solve(&self, inst: &Instance<'_>, seed: u64) -> Result<SolveResult> {
        solve_kl(inst.graph, seed)
    }
}

impl SolverBackend for Multilevel {
    fn capabilities(&self) -> Capabilities {
        Capabilities { max_nodes: None, needs_qubo: false, needs_lambda: false, deterministic: false }
    }
    fn solve(&self, inst: &Instance<'_>, seed: u64) -> Result<SolveResult> {
        solve_multilevel(inst.graph, seed)
    }
}

/// Solver backends keyed by id.
#[derive(Clone, Default)]
pub struct Registry {
    backends: BTreeMap<String, Arc<dyn SolverBackend>>,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.backends.keys()).finish()
    }
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// All built-in solvers. `sa` and `sa-mbp` use `sa`; `hybrid-standin`
    /// is `sa-mbp` with default parameters.
    pub fn with_builtins(sa: SaParams) -> Self {
        let mut r = Registry::new();
        let builtins: [(&str, Arc<dyn SolverBackend>); 7] = [
            (ID_EXACT_QUBO, Arc::new(ExactQubo)),
            (ID_EXACT_BISECTION, Arc::new(ExactBisection)),
            (ID_SA, Arc::new(DenseSa(sa))),
            (ID_SA_MBP, Arc::new(ImplicitSa(sa))),
            (ID_HYBRID_STANDIN, Arc::new(ImplicitSa(SaParams::default()))),
            (ID_KL, Arc::new(Kl)),
            (ID_MULTILEVEL, Arc::new(Multilevel)),
        ];
        for (id, b) in builtins {
            r.register(id, b).expect("built-in ids are distinct");
        }
        r
    }

    pub fn register(&mut self, id: &str, backend: Arc<dyn SolverBackend>) -> Result<()> {
        if self.backends.contains_key(id) {
            return Err(MbpError::DuplicateSolver(id.to_string()));
        }
        self.backends.insert(id.to_string(), backend);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&Arc<dyn SolverBackend>> {
        self.backends.get(id).ok_or_else(|| MbpError::UnknownSolver(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.backends.keys().map(String::as_str)
    }

    pub fn capabilities(&self, id: &str) -> Result<Capabilities> {
        Ok(self.get(id)?.capabilities())
    }

    /// Dispatch to `id` after a capability check. The result carries `id`
    /// as its solver id; when a penalty weight is present the energy is
    /// `E_MBP` of the returned assignment.
    pub fn solve_with(&self, id: &str, instance: &Instance<'_>, seed: u64) -> Result<SolveResult> {
        let backend = self.get(id)?;
        let caps = backend.capabilities();
        let n = instance.graph.node_count();
        if let Some(max) = caps.max_nodes {
            if n > max {
                return Err(MbpError::Capability(format!(
                    "solver {id} handles at most {max} nodes, got {n}"
                )));
            }
        }
        if caps.needs_lambda && instance.lambda.is_none() && instance.qubo.is_none() {
            return Err(MbpError::invalid(format!("solver {id} needs a penalty weight")));
        }
        let mut r = backend.solve(instance, seed)?;
        r.solver_id = id.to_string();
        if !caps.needs_lambda {
            if let Some(lambda) = instance.lambda {
                r.energy = e_mbp(instance.graph, lambda, &r.assignment)?;
            }
        }
        Ok(r)
    }
}
