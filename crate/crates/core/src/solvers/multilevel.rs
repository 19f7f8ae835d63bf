//! Multilevel bisection: heavy-edge coarsening, initial split of the
//! coarsest graph, weighted KL refinement while uncoarsening, then exact
//! balance repair on the original graph.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::graph::Graph;
use crate::qubo::PartitionAssignment;
use crate::rng::{self, Stream};
use crate::timing::Stopwatch;

use super::kl::{kl_refine, move_node, KlConfig};
use super::weighted::WeightedGraph;
use super::{PreRepair, SolveResult};

/// Coarsening stops once a level has at most this many supernodes.
pub const COARSEST_SIZE: usize = 32;
const EXHAUSTIVE_LIMIT: usize = 20;
const GROWING_TRIALS: usize = 8;
const STALL_LIMIT: usize = 50;
const REFINE_PASSES: usize = 8;

struct Level {
    graph: WeightedGraph,
    /// Node of this level → node of the next coarser level.
    map: Vec<u32>,
}

fn heavy_edge_matching(wg: &WeightedGraph, max_weight: i64, stream: &mut Stream) -> (Vec<u32>, usize) {
    let n = wg.node_count();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(stream);
    let mut map = vec![u32::MAX; n];
    let mut next = 0u32;
    for &u in &order {
        if map[u] != u32::MAX {
            continue;
        }
        let mate = wg
            .neighbors(u)
            .filter(|&(v, _)| map[v] == u32::MAX && wg.vwgt(u) + wg.vwgt(v) <= max_weight)
            .max_by_key(|&(v, w)| (w, std::cmp::Reverse(v)))
            .map(|(v, _)| v);
        map[u] = next;
        if let Some(v) = mate {
            map[v] = next;
        }
        next += 1;
    }
    (map, next as usize)
}

fn tolerance(wg: &WeightedGraph) -> i64 {
    let total = wg.total_vwgt();
    wg.max_vwgt().max((total * 3 + 99) / 100)
}

/// Ordering key for candidate splits: admissible first, then smaller cut,
/// then smaller imbalance.
fn split_key(wg: &WeightedGraph, cut: i64, diff: i64) -> (bool, i64, i64) {
    (diff.abs() > tolerance(wg), cut, diff.abs())
}

/// Every split with node 0 in S1, walked in Gray-code order.
fn exhaustive_split(wg: &WeightedGraph) -> Vec<bool> {
    let k = wg.node_count();
    let mut side = vec![false; k];
    side[0] = true;
    let mut cut = wg.cut(&side);
    let mut diff = wg.weight_diff(&side);
    let mut best = (split_key(wg, cut, diff), side.clone());
    for step in 1u64..(1u64 << (k - 1)) {
        let u = step.trailing_zeros() as usize + 1;
        // Flipping u changes the cut by (same-side weight) − (other-side weight).
        cut -= wg.d_value(&side, u);
        side[u] = !side[u];
        diff += if side[u] { 2 * wg.vwgt(u) } else { -2 * wg.vwgt(u) };
        let key = split_key(wg, cut, diff);
        if key < best.0 {
            best = (key, side.clone());
        }
    }
    best.1
}

/// Grow S1 from a random seed node, always absorbing the frontier node that
/// increases the cut least, until S1 holds half the weight.
fn grow_split(wg: &WeightedGraph, stream: &mut Stream) -> Vec<bool> {
    let k = wg.node_count();
    let half = wg.total_vwgt() / 2;
    let mut side = vec![false; k];
    let mut d: Vec<i64> = (0..k).map(|u| wg.d_value(&side, u)).collect();
    let mut weight = 0;
    let mut frontier = vec![false; k];
    let start = stream.gen_range(0..k);
    frontier[start] = true;
    while weight < half {
        let pick = (0..k)
            .filter(|&u| !side[u] && frontier[u])
            .max_by_key(|&u| (d[u], std::cmp::Reverse(u)))
            .or_else(|| (0..k).find(|&u| !side[u]));
        let Some(u) = pick else { break };
        move_node(wg, &mut side, &mut d, u);
        weight += wg.vwgt(u);
        for (v, _) in wg.neighbors(u) {
            frontier[v] = true;
        }
    }
    side
}

fn initial_split(wg: &WeightedGraph, stream: &mut Stream) -> Vec<bool> {
    let cfg = KlConfig { tolerance: tolerance(wg), stall_limit: None, max_passes: REFINE_PASSES };
    let mut best = if wg.node_count() <= EXHAUSTIVE_LIMIT {
        exhaustive_split(wg)
    } else {
        let mut best: Option<((bool, i64, i64), Vec<bool>)> = None;
        for _ in 0..GROWING_TRIALS {
            let mut side = grow_split(wg, stream);
            kl_refine(wg, &mut side, cfg);
            let key = split_key(wg, wg.cut(&side), wg.weight_diff(&side));
            if best.as_ref().is_none_or(|(k, _)| key < *k) {
                best = Some((key, side));
            }
        }
        best.expect("at least one trial").1
    };
    kl_refine(wg, &mut best, cfg);
    best
}

/// Move nodes out of the larger side, each time the one whose move raises
/// the cut least (largest D, lowest index on ties), until sizes are equal.
fn repair_balance(wg: &WeightedGraph, side: &mut [bool]) {
    let n = side.len();
    let mut d: Vec<i64> = (0..n).map(|u| wg.d_value(side, u)).collect();
    loop {
        let ones = side.iter().filter(|&&s| s).count();
        if 2 * ones == n {
            break;
        }
        let from = 2 * ones > n;
        let u = (0..n)
            .filter(|&u| side[u] == from)
            .max_by_key(|&u| (d[u], std::cmp::Reverse(u)))
            .expect("larger side is non-empty");
        move_node(wg, side, &mut d, u);
    }
}

pub fn solve_multilevel(g: &Graph, seed: u64) -> Result<SolveResult> {
    g.require_even()?;
    let clock = Stopwatch::start();
    let n = g.node_count();
    if n == 0 {
        return SolveResult::assemble(g, PartitionAssignment::zeros(0), 0.0, "multilevel", clock.elapsed());
    }
    let mut stream = rng::stream(seed);

    let finest = WeightedGraph::from_graph(g);
    let max_weight = ((3 * n) / (2 * COARSEST_SIZE)).max(2) as i64;
    let mut levels: Vec<Level> = Vec::new();
    let mut current = finest.clone();
    while current.node_count() > COARSEST_SIZE {
        let (map, coarse_n) = heavy_edge_matching(&current, max_weight, &mut stream);
        if coarse_n * 100 > current.node_count() * 95 {
            break;
        }
        let coarse = current.contract(&map, coarse_n);
        levels.push(Level { graph: std::mem::replace(&mut current, coarse), map });
    }

    let mut side = initial_split(&current, &mut stream);
    for level in levels.iter().rev() {
        side = level.map.iter().map(|&c| side[c as usize]).collect();
        let cfg = KlConfig {
            tolerance: tolerance(&level.graph),
            stall_limit: Some(STALL_LIMIT),
            max_passes: REFINE_PASSES,
        };
        kl_refine(&level.graph, &mut side, cfg);
    }

    let pre_repair = PreRepair {
        inter_edges: finest.cut(&side) as u64,
        balance_deviation: finest.weight_diff(&side).unsigned_abs() / 2,
    };
    repair_balance(&finest, &mut side);
    let cfg = KlConfig { tolerance: 0, stall_limit: Some(STALL_LIMIT), max_passes: REFINE_PASSES };
    let (trace, _) = kl_refine(&finest, &mut side, cfg);
    let cut = *trace.last().expect("trace is non-empty");

    let mut r =
        SolveResult::assemble(g, PartitionAssignment::new(side), cut as f64, "multilevel", clock.elapsed())?
            .with_seed(seed)
            .with_iterations(levels.len() as u64);
    r.pre_repair = Some(pre_repair);
    r.cut_trace = trace.into_iter().map(|c| c as u64).collect();
    Ok(r)
}
