//! Browser demo. Each export takes plain numbers and returns a JSON string
//! for the page script to draw.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use mbp_core::graph::{generate_er, Graph};
use mbp_core::harness::{run_instance, solver_seed};
use mbp_core::penalty::{
    lambda_bounds, lambda_mult_candidates, resolve_lambda, tradeoff_terms, LambdaStrategy,
};
use mbp_core::solvers::{Instance, Registry, SaParams, Temperature};
use mbp_core::Result;

/// Demo annealing budget, small enough to stay interactive.
pub const DEMO_SA: SaParams =
    SaParams { sweeps: 400, restarts: 4, t_initial: Temperature::Auto, cooling: 0.97, t_final: None };

pub const MAX_DEMO_NODES: usize = 400;

#[derive(Debug, Serialize)]
pub struct Node {
    pub x: f64,
    pub y: f64,
    pub side: u8,
}

#[derive(Debug, Serialize)]
pub struct Bisection {
    pub solver: String,
    pub n: usize,
    pub edges: Vec<(u32, u32)>,
    pub nodes: Vec<Node>,
    pub lambda: f64,
    pub lambda_est: Option<f64>,
    pub cut: u64,
    pub balanced: bool,
    pub deviation: u64,
    pub energy: f64,
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub multiplier: f64,
    pub lambda: f64,
    pub cut: u64,
    pub deviation: u64,
    pub balanced: bool,
}

#[derive(Debug, Serialize)]
pub struct TradeoffPoint {
    pub moved: usize,
    pub cut_term: f64,
    pub penalty: f64,
}

#[derive(Debug, Serialize)]
pub struct Tradeoff {
    pub n: usize,
    pub lambda: f64,
    pub lower: f64,
    pub upper: f64,
    pub points: Vec<TradeoffPoint>,
}

fn demo_graph(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n > MAX_DEMO_NODES {
        return Err(mbp_core::MbpError::InvalidArgument(format!(
            "the demo handles at most {MAX_DEMO_NODES} nodes"
        )));
    }
    generate_er(n, p, seed)
}

fn registry() -> Registry {
    Registry::with_builtins(DEMO_SA)
}

/// Generate `G(n, p)`, bisect it with `solver` at `λ_est · mult`, and lay the
/// two sides out on two arcs.
pub fn bisect(n: usize, p: f64, seed: u64, solver: &str, mult: f64) -> Result<Bisection> {
    let g = demo_graph(n, p, seed)?;
    let spec = resolve_lambda(&g, &LambdaStrategy::EstTimesMult(mult))?;
    let r =
        registry().solve_with(solver, &Instance::with_lambda(&g, spec.lambda), solver_seed(seed, solver))?;
    let bits = r.assignment.bits();

    let mut counts = [0usize; 2];
    for &b in bits {
        counts[b as usize] += 1;
    }
    let mut placed = [0usize; 2];
    let nodes = bits
        .iter()
        .map(|&b| {
            let s = b as usize;
            let k = placed[s];
            placed[s] += 1;
            // Side 0 on the left half-circle, side 1 on the right.
            let t = (k as f64 + 0.5) / counts[s].max(1) as f64;
            let angle = std::f64::consts::PI * (0.5 + t) + if s == 1 { std::f64::consts::PI } else { 0.0 };
            Node { x: angle.cos(), y: angle.sin(), side: u8::from(b) }
        })
        .collect();

    Ok(Bisection {
        solver: r.solver_id.clone(),
        n,
        edges: g.edges().to_vec(),
        nodes,
        lambda: spec.lambda,
        lambda_est: spec.lambda_est,
        cut: r.inter_edges,
        balanced: r.balanced,
        deviation: r.balance_deviation,
        energy: r.energy,
    })
}

/// Anneal one graph at every candidate multiplier for its size.
pub fn multiplier_sweep(n: usize, p: f64, seed: u64) -> Result<Vec<SweepPoint>> {
    let g = demo_graph(n, p, seed)?;
    let reg = registry();
    lambda_mult_candidates(n)
        .iter()
        .map(|&m| {
            let rec = run_instance(&reg, &g, &LambdaStrategy::EstTimesMult(m), &["sa-mbp"], seed)?.remove(0);
            Ok(SweepPoint {
                multiplier: m,
                lambda: rec.lambda().unwrap_or(0.0),
                cut: rec.inter_edges,
                deviation: rec.balance_deviation,
                balanced: rec.balanced,
            })
        })
        .collect()
}

/// Worst-case cut term and balance penalty as nodes move out of one set, and
/// the penalty interval of `G(n, p)` for reference.
pub fn tradeoff(n: usize, p: f64, seed: u64, lambda: f64) -> Result<Tradeoff> {
    let g = demo_graph(n, p, seed)?;
    let b = lambda_bounds(&g)?;
    let points = (0..=n)
        .map(|moved| {
            let (cut_term, penalty) = tradeoff_terms(n, lambda, moved)?;
            Ok(TradeoffPoint { moved, cut_term, penalty })
        })
        .collect::<Result<_>>()?;
    Ok(Tradeoff { n, lambda, lower: b.lower, upper: b.upper, points })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(Into::into))
        .map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = bisect)]
pub fn bisect_js(
    n: usize,
    p: f64,
    seed: u32,
    solver: &str,
    mult: f64,
) -> std::result::Result<String, JsValue> {
    to_js(bisect(n, p, seed.into(), solver, mult))
}

#[wasm_bindgen(js_name = multiplierSweep)]
pub fn multiplier_sweep_js(n: usize, p: f64, seed: u32) -> std::result::Result<String, JsValue> {
    to_js(multiplier_sweep(n, p, seed.into()))
}

#[wasm_bindgen(js_name = tradeoff)]
pub fn tradeoff_js(n: usize, p: f64, seed: u32, lambda: f64) -> std::result::Result<String, JsValue> {
    to_js(tradeoff(n, p, seed.into(), lambda))
}
