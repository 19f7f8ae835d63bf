//! Undirected simple graphs, Erdős–Rényi generation and the edge-list format.
//!
//! The edge-list text format is:
//!
//! ```text
//! # n=4 p=1 seed=7
//! p el 4 6
//! 0 1
//! 0 2
//! ...
//! ```
//!
//! Comment lines start with `#`; a comment carrying `p=` and `seed=` restores
//! the generation metadata on load.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MbpError, Result};
use crate::rng;

/// How a graph was generated: `G(n, p)` with the given seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenMeta {
    pub p: f64,
    pub seed: u64,
}

/// Immutable undirected simple graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    /// Sorted lexicographically, each pair with `i < j`.
    edges: Vec<(u32, u32)>,
    /// Sorted neighbor lists.
    adj: Vec<Vec<u32>>,
    meta: Option<GenMeta>,
}

impl Graph {
    /// Build from an edge list. Pairs may be given in either orientation;
    /// self-loops, duplicates and out-of-range ids are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n > u32::MAX as usize {
            return Err(MbpError::invalid("node count exceeds u32 range"));
        }
        let mut list = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(MbpError::invalid(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(MbpError::invalid(format!("edge ({a},{b}) out of range for {n} nodes")));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            list.push((i as u32, j as u32));
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(MbpError::invalid(format!("duplicate edge ({},{})", w[0].0, w[0].1)));
        }
        Ok(Self::from_sorted(n, list, None))
    }

    fn from_sorted(n: usize, edges: Vec<(u32, u32)>, meta: Option<GenMeta>) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in &edges {
            adj[i as usize].push(j);
            adj[j as usize].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Graph { n, edges, adj, meta }
    }

    pub fn empty(n: usize) -> Self {
        Self::from_sorted(n, Vec::new(), None)
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i as u32, j as u32))).collect();
        Self::from_sorted(n, edges, None)
    }

    pub fn path(n: usize) -> Self {
        let edges = (1..n).map(|i| ((i - 1) as u32, i as u32)).collect();
        Self::from_sorted(n, edges, None)
    }

    pub fn cycle(n: usize) -> Self {
        let mut edges: Vec<(u32, u32)> = (1..n).map(|i| ((i - 1) as u32, i as u32)).collect();
        if n > 2 {
            edges.push((0, (n - 1) as u32));
            edges.sort_unstable();
        }
        Self::from_sorted(n, edges, None)
    }

    /// Star with center 0.
    pub fn star(n: usize) -> Self {
        let edges = (1..n).map(|i| (0, i as u32)).collect();
        Self::from_sorted(n, edges, None)
    }

    pub fn with_meta(mut self, meta: Option<GenMeta>) -> Self {
        self.meta = meta;
        self
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&(j as u32)).is_ok()
    }

    pub fn meta(&self) -> Option<GenMeta> {
        self.meta
    }

    /// `2|E| / (n(n-1))`; zero for graphs with fewer than two nodes.
    pub fn density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        2.0 * self.edges.len() as f64 / (n * (n - 1.0))
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Rejects graphs that cannot carry a minimum bisection instance.
    pub fn require_even(&self) -> Result<()> {
        if !self.n.is_multiple_of(2) {
            return Err(MbpError::invalid(format!("bisection requires an even node count, got {}", self.n)));
        }
        Ok(())
    }

    /// Serialize to the edge-list text format.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        match self.meta {
            Some(m) => writeln!(out, "# n={} p={} seed={}", self.n, m.p, m.seed).unwrap(),
            None => writeln!(out, "# n={}", self.n).unwrap(),
        }
        writeln!(out, "p el {} {}", self.n, self.edges.len()).unwrap();
        for &(i, j) in &self.edges {
            writeln!(out, "{i} {j}").unwrap();
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut p: Option<f64> = None;
        let mut seed: Option<u64> = None;
        let mut pairs = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                for tok in comment.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("p=") {
                        p =
                            Some(v.parse().map_err(|_| {
                                MbpError::parse(lineno, format!("bad edge probability `{v}`"))
                            })?);
                    } else if let Some(v) = tok.strip_prefix("seed=") {
                        seed =
                            Some(v.parse().map_err(|_| MbpError::parse(lineno, format!("bad seed `{v}`")))?);
                    }
                }
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.first() == Some(&"p") {
                if header.is_some() {
                    return Err(MbpError::parse(lineno, "duplicate header line"));
                }
                if toks.len() != 4 || toks[1] != "el" {
                    return Err(MbpError::parse(lineno, "expected header `p el <n> <m>`"));
                }
                let n = toks[2].parse().map_err(|_| MbpError::parse(lineno, "bad node count"))?;
                let m = toks[3].parse().map_err(|_| MbpError::parse(lineno, "bad edge count"))?;
                header = Some((n, m));
                continue;
            }
            let Some((n, _)) = header else {
                return Err(MbpError::parse(lineno, "edge line before header"));
            };
            if toks.len() != 2 {
                return Err(MbpError::parse(lineno, "expected `<i> <j>`"));
            }
            let i: usize =
                toks[0].parse().map_err(|_| MbpError::parse(lineno, format!("bad node id `{}`", toks[0])))?;
            let j: usize =
                toks[1].parse().map_err(|_| MbpError::parse(lineno, format!("bad node id `{}`", toks[1])))?;
            if i == j || i >= n || j >= n {
                return Err(MbpError::parse(lineno, format!("invalid edge ({i},{j})")));
            }
            pairs.push((lineno, i, j));
        }

        let Some((n, m)) = header else {
            return Err(MbpError::parse(text.lines().count().max(1), "missing header"));
        };
        if pairs.len() != m {
            return Err(MbpError::parse(
                pairs.last().map_or(1, |p| p.0),
                format!("header declares {m} edges, found {}", pairs.len()),
            ));
        }
        let mut seen = std::collections::HashSet::with_capacity(m);
        for &(lineno, i, j) in &pairs {
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(MbpError::parse(lineno, format!("duplicate edge ({i},{j})")));
            }
        }
        let meta = match (p, seed) {
            (Some(p), Some(seed)) => Some(GenMeta { p, seed }),
            _ => None,
        };
        Ok(Graph::new(n, pairs.into_iter().map(|(_, i, j)| (i, j)))?.with_meta(meta))
    }
}

/// Sample `G(n, p)`: pairs `(i, j)`, `i < j`, are visited in lexicographic
/// order and each consumes exactly one uniform draw `u`; the edge is present
/// iff `u < p`.
pub fn generate_er(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(MbpError::invalid(format!("need at least 2 nodes, got {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(MbpError::invalid(format!("edge probability {p} not in [0,1]")));
    }
    let mut stream = rng::stream(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng::unit_f64(&mut stream) < p {
                edges.push((i as u32, j as u32));
            }
        }
    }
    Ok(Graph::from_sorted(n, edges, Some(GenMeta { p, seed })))
}

pub fn save_graph(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, g.to_edge_list())?;
    Ok(())
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    Graph::parse_edge_list(&fs::read_to_string(path)?)
}
