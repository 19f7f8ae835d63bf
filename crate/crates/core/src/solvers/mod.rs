//! Bisection solvers: exhaustive oracles, simulated annealing (dense QUBO and
//! implicit graph form), Kernighan-Lin and a multilevel partitioner, all
//! reachable through a [`Registry`] keyed by solver id.

mod anneal;
mod exact;
mod kl;
mod multilevel;
mod registry;
mod weighted;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use anneal::{
    anneal, solve_sa, solve_sa_mbp, solve_sa_qubo, DenseQuboState, FlipState, ImplicitMbpState, SaParams,
    Temperature, AUTO_TEMPERATURE_SAMPLES,
};
pub use exact::{minimize_qubo_exhaustive, solve_exact_bisection, solve_exact_qubo, MAX_EXACT_NODES};
pub use kl::{refine_kl, solve_kl, KlOutcome};
pub use multilevel::{solve_multilevel, COARSEST_SIZE};
pub use registry::{
    Capabilities, Instance, Registry, SolverBackend, ID_EXACT_BISECTION, ID_EXACT_QUBO, ID_HYBRID_STANDIN,
    ID_KL, ID_MULTILEVEL, ID_SA, ID_SA_MBP,
};

use crate::error::Result;
use crate::graph::Graph;
use crate::qubo::{e_cut, PartitionAssignment};

/// Cut and balance of the multilevel partition before balance repair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreRepair {
    pub inter_edges: u64,
    pub balance_deviation: u64,
}

impl PreRepair {
    pub fn balanced(&self) -> bool {
        self.balance_deviation == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub assignment: PartitionAssignment,
    /// `E_MBP` of the assignment: QUBO energy plus offset for QUBO solvers,
    /// the cut for graph-native solvers (whose outputs are balanced).
    pub energy: f64,
    pub inter_edges: u64,
    pub balance_deviation: u64,
    pub balanced: bool,
    pub solver_id: String,
    pub wall_time: Duration,
    pub seed: Option<u64>,
    pub iterations: Option<u64>,
    pub pre_repair: Option<PreRepair>,
    /// Cut after initialization and after each improvement pass (KL-based
    /// solvers only).
    pub cut_trace: Vec<u64>,
}

impl SolveResult {
    /// Derive cut and balance fields from the graph rather than trusting the
    /// solver's bookkeeping.
    pub(crate) fn assemble(
        g: &Graph,
        assignment: PartitionAssignment,
        energy: f64,
        solver_id: &str,
        wall_time: Duration,
    ) -> Result<Self> {
        let inter_edges = e_cut(g, &assignment)?;
        let balance_deviation = assignment.balance_deviation() as u64;
        Ok(SolveResult {
            balanced: balance_deviation == 0,
            assignment,
            energy,
            inter_edges,
            balance_deviation,
            solver_id: solver_id.to_string(),
            wall_time,
            seed: None,
            iterations: None,
            pre_repair: None,
            cut_trace: Vec::new(),
        })
    }

    pub(crate) fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub(crate) fn with_iterations(mut self, iterations: u64) -> Self {
        self.iterations = Some(iterations);
        self
    }
}
