use crate::graph::Graph;

/// Compressed adjacency with integer node and edge weights. Neighbor lists
/// are sorted by index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct WeightedGraph {
    xadj: Vec<usize>,
    adjncy: Vec<u32>,
    adjwgt: Vec<i64>,
    vwgt: Vec<i64>,
}

impl WeightedGraph {
    pub fn from_graph(g: &Graph) -> Self {
        let n = g.node_count();
        let mut xadj = Vec::with_capacity(n + 1);
        let mut adjncy = Vec::with_capacity(2 * g.edge_count());
        xadj.push(0);
        for i in 0..n {
            adjncy.extend_from_slice(g.neighbors(i));
            xadj.push(adjncy.len());
        }
        let adjwgt = vec![1; adjncy.len()];
        WeightedGraph { xadj, adjncy, adjwgt, vwgt: vec![1; n] }
    }

    /// Collapse nodes according to `map` (fine node → coarse node). Parallel
    /// edges are merged with summed weights; edges inside a group vanish.
    pub fn contract(&self, map: &[u32], coarse_n: usize) -> Self {
        let mut vwgt = vec![0i64; coarse_n];
        for (u, &c) in map.iter().enumerate() {
            vwgt[c as usize] += self.vwgt[u];
        }
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); coarse_n];
        for (u, &c) in map.iter().enumerate() {
            members[c as usize].push(u);
        }
        let mut xadj = Vec::with_capacity(coarse_n + 1);
        let mut adjncy = Vec::new();
        let mut adjwgt = Vec::new();
        xadj.push(0);
        // Dense scratch row indexed by coarse node; `touched` lists the live entries.
        let mut acc = vec![0i64; coarse_n];
        let mut touched = Vec::new();
        for (c, group) in members.iter().enumerate() {
            for &u in group {
                for (v, w) in self.neighbors(u) {
                    let cv = map[v] as usize;
                    if cv == c {
                        continue;
                    }
                    if acc[cv] == 0 {
                        touched.push(cv);
                    }
                    acc[cv] += w;
                }
            }
            touched.sort_unstable();
            for &cv in &touched {
                adjncy.push(cv as u32);
                adjwgt.push(acc[cv]);
                acc[cv] = 0;
            }
            touched.clear();
            xadj.push(adjncy.len());
        }
        WeightedGraph { xadj, adjncy, adjwgt, vwgt }
    }

    pub fn node_count(&self) -> usize {
        self.vwgt.len()
    }

    pub fn vwgt(&self, u: usize) -> i64 {
        self.vwgt[u]
    }

    pub fn total_vwgt(&self) -> i64 {
        self.vwgt.iter().sum()
    }

    pub fn max_vwgt(&self) -> i64 {
        self.vwgt.iter().copied().max().unwrap_or(0)
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = (usize, i64)> + '_ {
        let r = self.xadj[u]..self.xadj[u + 1];
        self.adjncy[r.clone()].iter().zip(&self.adjwgt[r]).map(|(&v, &w)| (v as usize, w))
    }

    pub fn edge_weight(&self, u: usize, v: usize) -> i64 {
        let r = self.xadj[u]..self.xadj[u + 1];
        match self.adjncy[r.clone()].binary_search(&(v as u32)) {
            Ok(k) => self.adjwgt[r.start + k],
            Err(_) => 0,
        }
    }

    pub fn cut(&self, side: &[bool]) -> i64 {
        (0..self.node_count())
            .flat_map(|u| self.neighbors(u).map(move |(v, w)| (u, v, w)))
            .filter(|&(u, v, _)| u < v && side[u] != side[v])
            .map(|(_, _, w)| w)
            .sum()
    }

    /// `W(S1) − W(S0)`.
    pub fn weight_diff(&self, side: &[bool]) -> i64 {
        side.iter().zip(&self.vwgt).map(|(&s, &w)| if s { w } else { -w }).sum()
    }

    /// External minus internal incident weight of `u`.
    pub fn d_value(&self, side: &[bool], u: usize) -> i64 {
        self.neighbors(u).map(|(v, w)| if side[v] != side[u] { w } else { -w }).sum()
    }
}
