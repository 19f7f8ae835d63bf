use crate::error::{MbpError, Result};
use crate::graph::Graph;
use crate::qubo::{energy, PartitionAssignment, QuboMatrix};
use crate::timing::Stopwatch;

use super::SolveResult;

/// Largest instance the enumeration oracles accept.
pub const MAX_EXACT_NODES: usize = 24;

fn capability(n: usize, what: &str) -> Result<()> {
    if n > MAX_EXACT_NODES {
        return Err(MbpError::Capability(format!(
            "{what} enumerates all assignments and is limited to {MAX_EXACT_NODES} nodes, got {n}"
        )));
    }
    Ok(())
}

/// Global minimizer of `energy(q, ·)` over all `2^n` assignments, visited in
/// increasing integer order (`x_0` least significant); among equal energies
/// the smallest integer wins. Returns the energy including the offset.
pub fn minimize_qubo_exhaustive(q: &QuboMatrix) -> Result<(PartitionAssignment, f64)> {
    let n = q.order();
    capability(n, "exact-qubo")?;
    if n == 0 {
        return Ok((PartitionAssignment::zeros(0), q.offset()));
    }
    // field[i] = Q[i,i] + Σ_{j≠i} Q[i,j] x_j; flipping i changes E by ±field[i].
    let mut field: Vec<f64> = (0..n).map(|i| q.sym(i, i)).collect();
    let mut x = vec![false; n];
    let mut e = 0.0;
    let mut best_e = 0.0f64;
    let mut best_v = 0u64;
    let flip = |i: usize, x: &mut [bool], field: &mut [f64], e: &mut f64| {
        let up = !x[i];
        *e += if up { field[i] } else { -field[i] };
        x[i] = up;
        let s = if up { 1.0 } else { -1.0 };
        for (j, f) in field.iter_mut().enumerate() {
            if j != i {
                *f += s * q.sym(i, j);
            }
        }
    };
    for v in 1u64..(1u64 << n) {
        // v-1 -> v clears the trailing ones of v-1 and sets the next bit.
        let trailing = (v - 1).trailing_ones() as usize;
        for i in 0..trailing {
            flip(i, &mut x, &mut field, &mut e);
        }
        flip(trailing, &mut x, &mut field, &mut e);
        if e < best_e - 1e-9 * best_e.abs().max(1.0) {
            best_e = e;
            best_v = v;
        }
    }
    let best = PartitionAssignment::from_index(n, best_v);
    let exact = energy(q, &best)? + q.offset();
    Ok((best, exact))
}

/// Exhaustive QUBO minimization, reported against the graph `q` was built from.
pub fn solve_exact_qubo(g: &Graph, q: &QuboMatrix) -> Result<SolveResult> {
    if q.order() != g.node_count() {
        return Err(MbpError::invalid(format!(
            "matrix order {} does not match graph with {} nodes",
            q.order(),
            g.node_count()
        )));
    }
    let clock = Stopwatch::start();
    let (x, e) = minimize_qubo_exhaustive(q)?;
    let iterations = 1u64 << q.order();
    Ok(SolveResult::assemble(g, x, e, "exact-qubo", clock.elapsed())?.with_iterations(iterations))
}

/// Minimum cut over all balanced assignments, with node 0 fixed in S1.
pub fn solve_exact_bisection(g: &Graph) -> Result<SolveResult> {
    g.require_even()?;
    let n = g.node_count();
    capability(n, "exact-bisection")?;
    let clock = Stopwatch::start();
    if n == 0 {
        return SolveResult::assemble(
            g,
            PartitionAssignment::zeros(0),
            0.0,
            "exact-bisection",
            clock.elapsed(),
        );
    }
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let adj: Vec<u32> = (0..n).map(|i| g.neighbors(i).iter().fold(0u32, |m, &j| m | (1 << j))).collect();
    let cut_of = |set: u32| -> u32 {
        let outside = full & !set;
        let mut rest = set;
        let mut cut = 0;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            cut += (adj[i] & outside).count_ones();
            rest &= rest - 1;
        }
        cut
    };

    // Choose the other n/2 − 1 members of S1 among nodes 1..n, enumerating
    // masks of that popcount in increasing order (Gosper's hack).
    let k = n / 2 - 1;
    let width = n - 1;
    let mut best_set = 1u32;
    let mut best_cut = u32::MAX;
    let mut count = 0u64;
    let mut mask: u32 = if k == 0 { 0 } else { (1u32 << k) - 1 };
    loop {
        let set = 1 | (mask << 1);
        let cut = cut_of(set);
        count += 1;
        if cut < best_cut {
            best_cut = cut;
            best_set = set;
        }
        if mask == 0 {
            break;
        }
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        let next = (((r ^ mask) >> 2) / c) | r;
        if width < 32 && next >> width != 0 {
            break;
        }
        mask = next;
    }
    let x = PartitionAssignment::from_index(n, u64::from(best_set));
    Ok(SolveResult::assemble(g, x, f64::from(best_cut), "exact-bisection", clock.elapsed())?
        .with_iterations(count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_er;
    use crate::qubo::{build_mbp_qubo, e_cut};

    fn binom(n: u64, k: u64) -> u64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn qubo_oracle_on_path() {
        let g = Graph::path(4);
        let q = build_mbp_qubo(&g, 1.0).unwrap();
        let r = solve_exact_qubo(&g, &q).unwrap();
        assert_eq!(r.energy, 1.0);
        assert_eq!(r.inter_edges, 1);
        assert!(r.balanced);
        let bits = r.assignment.to_bit_string();
        assert!(bits == "1100" || bits == "0011", "{bits}");
    }

    #[test]
    fn qubo_oracle_ties_go_to_lowest_integer() {
        // Flat landscape: every assignment has energy 0, so x = 0 wins.
        let (x, e) = minimize_qubo_exhaustive(&QuboMatrix::zeros(5)).unwrap();
        assert_eq!(x, PartitionAssignment::zeros(5));
        assert_eq!(e, 0.0);
        // Path with λ = 1: 1100 (value 3) and 0011 (value 12) tie.
        let q = build_mbp_qubo(&Graph::path(4), 1.0).unwrap();
        let (x, _) = minimize_qubo_exhaustive(&q).unwrap();
        assert_eq!(x.to_bit_string(), "1100");
    }

    #[test]
    fn qubo_oracle_on_empty_and_complete() {
        let g = Graph::empty(4);
        let r = solve_exact_qubo(&g, &build_mbp_qubo(&g, 1.0).unwrap()).unwrap();
        assert_eq!(r.energy, 0.0);
        assert!(r.balanced);

        let k4 = Graph::complete(4);
        let r = solve_exact_qubo(&k4, &build_mbp_qubo(&k4, 4.0).unwrap()).unwrap();
        assert!(r.balanced);
        assert_eq!(r.energy, 4.0);
    }

    #[test]
    fn qubo_oracle_matches_brute_force() {
        for seed in 0..20 {
            let g = generate_er(10, 0.4, seed).unwrap();
            let q = build_mbp_qubo(&g, 0.7).unwrap();
            let (_, e) = minimize_qubo_exhaustive(&q).unwrap();
            let brute = (0..1u64 << 10)
                .map(|v| energy(&q, &PartitionAssignment::from_index(10, v)).unwrap())
                .fold(f64::INFINITY, f64::min)
                + q.offset();
            assert!((e - brute).abs() < 1e-9);
        }
    }

    #[test]
    fn qubo_oracle_capability() {
        let q = QuboMatrix::zeros(30);
        assert!(matches!(minimize_qubo_exhaustive(&q), Err(MbpError::Capability(_))));
    }

    #[test]
    fn bisection_examples() {
        assert_eq!(solve_exact_bisection(&Graph::path(4)).unwrap().inter_edges, 1);
        assert_eq!(solve_exact_bisection(&Graph::complete(6)).unwrap().inter_edges, 9);
        assert_eq!(solve_exact_bisection(&Graph::cycle(6)).unwrap().inter_edges, 2);
        assert!(solve_exact_bisection(&Graph::path(5)).is_err());
        assert!(matches!(solve_exact_bisection(&Graph::empty(26)), Err(MbpError::Capability(_))));
    }

    #[test]
    fn bisection_enumerates_half_of_all_balanced_sets() {
        for n in [2usize, 4, 8, 12] {
            let r = solve_exact_bisection(&Graph::cycle(n)).unwrap();
            assert_eq!(r.iterations, Some(binom(n as u64 - 1, n as u64 / 2 - 1)));
            assert!(r.balanced);
            assert!(r.assignment.get(0));
        }
    }

    #[test]
    fn bisection_matches_brute_force() {
        for seed in 0..20 {
            let g = generate_er(10, 0.5, seed).unwrap();
            let brute = (0..1u64 << 10)
                .map(|v| PartitionAssignment::from_index(10, v))
                .filter(|x| x.is_balanced())
                .map(|x| e_cut(&g, &x).unwrap())
                .min()
                .unwrap();
            assert_eq!(solve_exact_bisection(&g).unwrap().inter_edges, brute);
        }
    }
}
