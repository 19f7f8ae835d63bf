//! Kernighan-Lin pair-swap refinement.
//!
//! A pass repeatedly picks the unlocked pair `(a ∈ S1, b ∈ S0)` with the
//! largest swap gain `D_a + D_b − 2·w(a,b)`, swaps and locks it, and finally
//! rolls back to the prefix of swaps with the largest cumulative gain. Passes
//! repeat until no prefix has positive gain. Equal gains resolve to the
//! lexicographically smallest `(a, b)`.

use rand::seq::SliceRandom;

use crate::error::Result;
use crate::graph::Graph;
use crate::qubo::PartitionAssignment;
use crate::rng;
use crate::timing::Stopwatch;

use super::weighted::WeightedGraph;
use super::SolveResult;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KlOutcome {
    pub assignment: PartitionAssignment,
    pub cut: u64,
    /// Passes that improved the cut.
    pub improving_passes: usize,
    /// Cut of the start, then after each pass.
    pub trace: Vec<u64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct KlConfig {
    /// A swap is admissible if `|W(S1) − W(S0)|` afterwards is at most
    /// `max(tolerance, current imbalance)`.
    pub tolerance: i64,
    /// End a pass after this many consecutive swaps without a new best
    /// prefix. `None` locks every node.
    pub stall_limit: Option<usize>,
    pub max_passes: usize,
}

impl KlConfig {
    pub const EXACT: KlConfig = KlConfig { tolerance: 0, stall_limit: None, max_passes: usize::MAX };
}

/// Refine `side` in place. Returns the cut after the start and after each
/// pass, and the number of improving passes.
pub(crate) fn kl_refine(wg: &WeightedGraph, side: &mut [bool], cfg: KlConfig) -> (Vec<i64>, usize) {
    let n = wg.node_count();
    let mut cut = wg.cut(side);
    let mut trace = vec![cut];
    let mut improving = 0;
    let mut d: Vec<i64> = (0..n).map(|u| wg.d_value(side, u)).collect();
    let mut locked = vec![false; n];
    let mut ones: Vec<usize> = Vec::with_capacity(n);
    let mut zeros: Vec<usize> = Vec::with_capacity(n);

    for _ in 0..cfg.max_passes {
        locked.fill(false);
        let mut diff = wg.weight_diff(side);
        let mut swaps: Vec<(usize, usize)> = Vec::new();
        let mut total = 0i64;
        let (mut best_total, mut best_len) = (0i64, 0usize);
        let mut stall = 0usize;

        loop {
            ones.clear();
            zeros.clear();
            for u in (0..n).filter(|&u| !locked[u]) {
                if side[u] {
                    ones.push(u)
                } else {
                    zeros.push(u)
                }
            }
            let by_gain = |&u: &usize| (std::cmp::Reverse(d[u]), u);
            ones.sort_unstable_by_key(by_gain);
            zeros.sort_unstable_by_key(by_gain);

            let limit = cfg.tolerance.max(diff.abs());
            let mut best: Option<(i64, usize, usize)> = None;
            for &a in &ones {
                if let (Some((g, _, _)), Some(&b0)) = (best, zeros.first()) {
                    if d[a] + d[b0] < g {
                        break;
                    }
                }
                for &b in &zeros {
                    let bound = d[a] + d[b];
                    if let Some((g, _, _)) = best {
                        if bound < g {
                            break;
                        }
                    }
                    if (diff - 2 * wg.vwgt(a) + 2 * wg.vwgt(b)).abs() > limit {
                        continue;
                    }
                    let gain = bound - 2 * wg.edge_weight(a, b);
                    let better = match best {
                        None => true,
                        Some((g, ba, bb)) => gain > g || (gain == g && (a, b) < (ba, bb)),
                    };
                    if better {
                        best = Some((gain, a, b));
                    }
                }
            }
            let Some((gain, a, b)) = best else { break };

            for u in [a, b] {
                move_node(wg, side, &mut d, u);
                locked[u] = true;
            }
            diff += 2 * (wg.vwgt(b) - wg.vwgt(a));
            swaps.push((a, b));
            total += gain;
            if total > best_total {
                best_total = total;
                best_len = swaps.len();
                stall = 0;
            } else {
                stall += 1;
                if cfg.stall_limit.is_some_and(|s| stall >= s) {
                    break;
                }
            }
        }

        for &(a, b) in swaps[best_len..].iter().rev() {
            move_node(wg, side, &mut d, b);
            move_node(wg, side, &mut d, a);
        }
        if best_total <= 0 {
            break;
        }
        cut -= best_total;
        debug_assert_eq!(cut, wg.cut(side));
        trace.push(cut);
        improving += 1;
    }
    (trace, improving)
}

/// Move `u` to the other side and update D values of `u` and its neighbors.
pub(crate) fn move_node(wg: &WeightedGraph, side: &mut [bool], d: &mut [i64], u: usize) {
    side[u] = !side[u];
    d[u] = -d[u];
    for (v, w) in wg.neighbors(u) {
        if side[v] == side[u] {
            d[v] -= 2 * w;
        } else {
            d[v] += 2 * w;
        }
    }
}

/// Run exact-balance KL from `start` on the unit-weight graph.
pub fn refine_kl(g: &Graph, start: &PartitionAssignment) -> Result<KlOutcome> {
    if start.len() != g.node_count() {
        return Err(crate::error::MbpError::invalid(format!(
            "assignment has {} entries, graph has {} nodes",
            start.len(),
            g.node_count()
        )));
    }
    let wg = WeightedGraph::from_graph(g);
    let mut side = start.bits().to_vec();
    let (trace, improving_passes) = kl_refine(&wg, &mut side, KlConfig::EXACT);
    let trace: Vec<u64> = trace.into_iter().map(|c| c as u64).collect();
    Ok(KlOutcome {
        cut: *trace.last().expect("trace starts with the initial cut"),
        assignment: PartitionAssignment::new(side),
        improving_passes,
        trace,
    })
}

/// KL from a uniformly random balanced bisection.
pub fn solve_kl(g: &Graph, seed: u64) -> Result<SolveResult> {
    g.require_even()?;
    let clock = Stopwatch::start();
    let n = g.node_count();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed));
    let mut start = PartitionAssignment::zeros(n);
    for &u in &order[..n / 2] {
        start.set(u, true);
    }
    let out = refine_kl(g, &start)?;
    let mut r = SolveResult::assemble(g, out.assignment, out.cut as f64, "kl", clock.elapsed())?
        .with_seed(seed)
        .with_iterations(out.trace.len() as u64 - 1);
    r.cut_trace = out.trace;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_er;
    use crate::solvers::solve_exact_bisection;

    #[test]
    fn path_from_alternating_start() {
        let g = Graph::path(4);
        let start = PartitionAssignment::from_bits(&[1, 0, 1, 0]).unwrap();
        let out = refine_kl(&g, &start).unwrap();
        assert_eq!(out.trace[0], 3);
        assert_eq!(out.trace[1], 1);
        assert_eq!(out.cut, 1);
        assert!(out.assignment.is_balanced());
    }

    #[test]
    fn optimal_start_is_a_fixed_point() {
        let g = Graph::path(4);
        let start = PartitionAssignment::from_bits(&[1, 1, 0, 0]).unwrap();
        let out = refine_kl(&g, &start).unwrap();
        assert_eq!(out.assignment, start);
        assert_eq!(out.improving_passes, 0);
        assert_eq!(out.trace, vec![1]);
    }

    #[test]
    fn never_below_the_oracle() {
        let mut equal = 0;
        for seed in 0..50 {
            let g = generate_er(12, 0.5, seed).unwrap();
            let kl = solve_kl(&g, seed).unwrap();
            let opt = solve_exact_bisection(&g).unwrap().inter_edges;
            assert!(kl.balanced);
            assert!(kl.inter_edges >= opt);
            assert!(kl.cut_trace.windows(2).all(|w| w[1] < w[0]));
            equal += usize::from(kl.inter_edges == opt);
        }
        assert!(equal >= 25, "KL matched the oracle on only {equal}/50");
    }

    #[test]
    fn odd_graphs_rejected() {
        assert!(solve_kl(&Graph::path(5), 0).is_err());
    }

    #[test]
    fn weighted_swaps_respect_the_tolerance() {
        // Path of 6 contracted to weights 2,1,1,2 (edges 1,1,1).
        let wg = WeightedGraph::from_graph(&Graph::path(6)).contract(&[0, 0, 1, 2, 3, 3], 4);
        let mut side = vec![true, false, true, false];
        let (trace, _) = kl_refine(&wg, &mut side, KlConfig::EXACT);
        assert_eq!(trace, vec![3, 1]);
        assert_eq!(wg.weight_diff(&side), 0);
    }
}
