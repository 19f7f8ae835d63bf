//! QUBO formulation of minimum bisection.
//!
//! For a graph on `n` nodes and penalty `λ` the objective is
//!
//! ```text
//! E_MBP(x) = Σ_{(i,j)∈E} (x_i + x_j − 2 x_i x_j) + λ (Σ x_i − n/2)²
//! ```
//!
//! which expands (using `x_i² = x_i`) into an upper-triangular coefficient
//! matrix plus the constant `λ n²/4`. The constant is kept in
//! [`QuboMatrix::offset`] so that `energy(Q, x) + offset == e_mbp(g, λ, x)`.
//!
//! The balance term puts `2λ` into every off-diagonal entry, so the matrix is
//! dense: construction and storage are Θ(n²).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{MbpError, Result};
use crate::graph::Graph;

/// Binary node assignment: `true` puts the node in S1, `false` in S0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartitionAssignment {
    bits: Vec<bool>,
}

impl PartitionAssignment {
    pub fn new(bits: Vec<bool>) -> Self {
        PartitionAssignment { bits }
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(MbpError::invalid(format!("bit value {other} is not 0/1"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![false; n])
    }

    pub fn ones(n: usize) -> Self {
        Self::new(vec![true; n])
    }

    /// Assignment whose bit `i` is bit `i` of `value` (x_0 is the least
    /// significant bit).
    pub fn from_index(n: usize, value: u64) -> Self {
        Self::new((0..n).map(|i| (value >> i) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    /// `|S1|`.
    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// `| |S1| − n/2 |`, exact for even `n`.
    pub fn balance_deviation(&self) -> usize {
        (2 * self.count_ones()).abs_diff(self.len()) / 2
    }

    pub fn is_balanced(&self) -> bool {
        2 * self.count_ones() == self.len()
    }

    pub fn complement(&self) -> Self {
        Self::new(self.bits.iter().map(|b| !b).collect())
    }

    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// Upper-triangular QUBO coefficients, stored densely row by row, with the
/// constant term carried separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboMatrix {
    order: usize,
    coeffs: Vec<f64>,
    offset: f64,
}

impl QuboMatrix {
    pub fn zeros(order: usize) -> Self {
        QuboMatrix { order, coeffs: vec![0.0; order * (order + 1) / 2], offset: 0.0 }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn set_offset(&mut self, offset: f64) {
        self.offset = offset;
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= j && j < self.order);
        i * self.order - i * (i + 1) / 2 + j
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        if i > j {
            return Err(MbpError::invalid(format!(
                "lower-triangular reference ({i},{j}); only i <= j is stored"
            )));
        }
        if j >= self.order {
            return Err(MbpError::invalid(format!("index ({i},{j}) out of range for order {}", self.order)));
        }
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        self.check(i, j)?;
        Ok(self.coeffs[self.index(i, j)])
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        self.check(i, j)?;
        let k = self.index(i, j);
        self.coeffs[k] += value;
        Ok(())
    }

    /// Coefficient of `x_i x_j` for any `i != j` (or `x_i` when equal),
    /// regardless of orientation.
    #[inline]
    pub fn sym(&self, i: usize, j: usize) -> f64 {
        if i <= j {
            self.coeffs[self.index(i, j)]
        } else {
            self.coeffs[self.index(j, i)]
        }
    }

    /// Contiguous row slice `Q[i, i..n]`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let start = self.index(i, i);
        &self.coeffs[start..start + self.order - i]
    }

    /// Nonzero entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.order).flat_map(move |i| {
            self.row(i).iter().enumerate().filter(|(_, v)| **v != 0.0).map(move |(k, &v)| (i, i + k, v))
        })
    }

    /// Debug dump: `qubo <n> <nnz>`, then `<i> <j> <value>` lines, then
    /// `offset <value>`.
    pub fn to_dump(&self) -> String {
        let entries: Vec<_> = self.entries().collect();
        let mut out = format!("qubo {} {}\n", self.order, entries.len());
        for (i, j, v) in entries {
            writeln!(out, "{i} {j} {v}").unwrap();
        }
        writeln!(out, "offset {}", self.offset).unwrap();
        out
    }

    pub fn parse_dump(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or_else(|| MbpError::parse(1, "empty dump"))?;
        let toks: Vec<&str> = head.split_whitespace().collect();
        if toks.len() != 3 || toks[0] != "qubo" {
            return Err(MbpError::parse(1, "expected `qubo <n> <nnz>`"));
        }
        let n: usize = toks[1].parse().map_err(|_| MbpError::parse(1, "bad order"))?;
        let nnz: usize = toks[2].parse().map_err(|_| MbpError::parse(1, "bad nnz"))?;
        let mut q = QuboMatrix::zeros(n);
        let mut seen = 0;
        let mut offset = None;
        for (idx, line) in lines {
            let lineno = idx + 1;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.first() == Some(&"offset") && toks.len() == 2 {
                offset = Some(toks[1].parse().map_err(|_| MbpError::parse(lineno, "bad offset"))?);
                continue;
            }
            if toks.len() != 3 {
                return Err(MbpError::parse(lineno, "expected `<i> <j> <value>`"));
            }
            let i: usize = toks[0].parse().map_err(|_| MbpError::parse(lineno, "bad i"))?;
            let j: usize = toks[1].parse().map_err(|_| MbpError::parse(lineno, "bad j"))?;
            let v: f64 = toks[2].parse().map_err(|_| MbpError::parse(lineno, "bad value"))?;
            q.add(i, j, v).map_err(|e| MbpError::parse(lineno, e.to_string()))?;
            seen += 1;
        }
        if seen != nnz {
            return Err(MbpError::parse(1, format!("declared {nnz} entries, found {seen}")));
        }
        q.offset = offset.ok_or_else(|| MbpError::parse(1, "missing offset line"))?;
        Ok(q)
    }
}

/// Local fields and couplings of the equivalent spin problem.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingProblem {
    pub h: Vec<f64>,
    /// Strict upper triangle, row-major: `(0,1), (0,2), …, (1,2), …`.
    pub couplings: Vec<f64>,
    pub constant: f64,
}

impl IsingProblem {
    pub fn order(&self) -> usize {
        self.h.len()
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < j);
        let n = self.h.len();
        self.couplings[i * n - i * (i + 1) / 2 + (j - i - 1)]
    }

    /// `H(s) = Σ h_i s_i + Σ_{i<j} J_ij s_i s_j` (constant not included).
    pub fn energy(&self, spins: &[i8]) -> Result<f64> {
        let n = self.h.len();
        if spins.len() != n {
            return Err(MbpError::invalid(format!("spin vector has length {}, expected {n}", spins.len())));
        }
        let mut e = 0.0;
        let mut k = 0;
        for i in 0..n {
            let si = f64::from(spins[i]);
            e += self.h[i] * si;
            for &sj in &spins[i + 1..] {
                e += self.couplings[k] * si * f64::from(sj);
                k += 1;
            }
        }
        Ok(e)
    }
}

/// Build the minimum-bisection QUBO for `g` with penalty `λ`.
///
/// Edge terms: `Q[i,i] += 1`, `Q[j,j] += 1`, `Q[i,j] −= 2` per edge.
/// Balance terms: `Q[i,i] += λ(1 − n)` per node and `Q[i,j] += 2λ` per pair.
pub fn build_mbp_qubo(g: &Graph, lambda: f64) -> Result<QuboMatrix> {
    g.require_even()?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(MbpError::invalid(format!("penalty must be positive, got {lambda}")));
    }
    let n = g.node_count();
    let mut q = QuboMatrix::zeros(n);
    for &(i, j) in g.edges() {
        let (i, j) = (i as usize, j as usize);
        let ii = q.index(i, i);
        let jj = q.index(j, j);
        let ij = q.index(i, j);
        q.coeffs[ii] += 1.0;
        q.coeffs[jj] += 1.0;
        q.coeffs[ij] -= 2.0;
    }
    let linear = lambda * (1.0 - n as f64);
    for i in 0..n {
        let start = q.index(i, i);
        q.coeffs[start] += linear;
        for v in &mut q.coeffs[start + 1..start + n - i] {
            *v += 2.0 * lambda;
        }
    }
    q.offset = lambda * (n * n) as f64 / 4.0;
    Ok(q)
}

fn check_len(expected: usize, x: &PartitionAssignment) -> Result<()> {
    if x.len() != expected {
        return Err(MbpError::invalid(format!("assignment has length {}, expected {expected}", x.len())));
    }
    Ok(())
}

/// `Σ Q[i,i] x_i + Σ_{i<j} Q[i,j] x_i x_j`; the offset is not included.
pub fn energy(q: &QuboMatrix, x: &PartitionAssignment) -> Result<f64> {
    check_len(q.order, x)?;
    let mut e = 0.0;
    for i in 0..q.order {
        if !x.get(i) {
            continue;
        }
        let row = q.row(i);
        e += row[0];
        for (k, &v) in row[1..].iter().enumerate() {
            if x.get(i + 1 + k) {
                e += v;
            }
        }
    }
    Ok(e)
}

/// Number of edges whose endpoints lie in different sets.
pub fn e_cut(g: &Graph, x: &PartitionAssignment) -> Result<u64> {
    check_len(g.node_count(), x)?;
    Ok(g.edges().iter().filter(|&&(i, j)| x.get(i as usize) != x.get(j as usize)).count() as u64)
}

/// `λ (Σ x_i − n/2)²`.
pub fn e_balance(n: usize, lambda: f64, x: &PartitionAssignment) -> Result<f64> {
    check_len(n, x)?;
    let d = x.count_ones() as f64 - n as f64 / 2.0;
    Ok(lambda * d * d)
}

pub fn e_mbp(g: &Graph, lambda: f64, x: &PartitionAssignment) -> Result<f64> {
    Ok(e_cut(g, x)? as f64 + e_balance(g.node_count(), lambda, x)?)
}

/// Substitute `x_i = (s_i + 1)/2`. For every spin vector,
/// `H(s) + constant == energy(q, x)`.
pub fn to_ising(q: &QuboMatrix) -> IsingProblem {
    let n = q.order;
    let mut h = vec![0.0; n];
    let mut couplings = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    let mut constant = 0.0;
    for i in 0..n {
        let row = q.row(i);
        h[i] += row[0] / 2.0;
        constant += row[0] / 2.0;
        for (k, &b) in row[1..].iter().enumerate() {
            let j = i + 1 + k;
            couplings.push(b / 4.0);
            h[i] += b / 4.0;
            h[j] += b / 4.0;
            constant += b / 4.0;
        }
    }
    IsingProblem { h, couplings, constant }
}
