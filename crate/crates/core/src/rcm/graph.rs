//! Random-cluster measures on small multigraphs with per-edge parameters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uf::UnionFind;

/// Largest edge count accepted by exhaustive enumeration.
pub const MAX_ENUM_EDGES: usize = 24;

const CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub u: usize,
    pub v: usize,
    pub p: f64,
}

/// Finite multigraph carrying one edge parameter per edge.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RcGraph {
    vertices: usize,
    edges: Vec<GraphEdge>,
}

impl RcGraph {
    pub fn new(vertices: usize) -> Self {
        RcGraph { vertices, edges: Vec::new() }
    }

    pub fn add_vertex(&mut self) -> usize {
        self.vertices += 1;
        self.vertices - 1
    }

    /// Appends an edge and returns its index.
    pub fn add_edge(&mut self, u: usize, v: usize, p: f64) -> usize {
        assert!(u < self.vertices && v < self.vertices, "edge ({u}, {v}) outside {} vertices", self.vertices);
        self.edges.push(GraphEdge { u, v, p });
        self.edges.len() - 1
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> GraphEdge {
        self.edges[e]
    }

    /// Number of open clusters when bit `e` of `mask` gives the state of edge `e`.
    pub fn clusters(&self, mask: u64, uf: &mut UnionFind) -> usize {
        uf.reset(self.vertices);
        for (e, edge) in self.edges.iter().enumerate() {
            if mask >> e & 1 == 1 {
                uf.union(edge.u, edge.v);
            }
        }
        uf.components()
    }

    fn log_weight(&self, mask: u64, q_ln: f64, uf: &mut UnionFind) -> f64 {
        let mut lw = self.clusters(mask, uf) as f64 * q_ln;
        for (e, edge) in self.edges.iter().enumerate() {
            lw += if mask >> e & 1 == 1 { edge.p.ln() } else { (-edge.p).ln_1p() };
        }
        lw
    }

    /// Exhaustive random-cluster law with cluster weight `q`.
    pub fn exact(&self, q: f64) -> Result<ExactTable> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::domain(format!("q = {q} must be positive")));
        }
        for edge in &self.edges {
            if !(0.0..=1.0).contains(&edge.p) {
                return Err(Error::domain(format!("edge parameter {} outside [0, 1]", edge.p)));
            }
        }
        let n = self.edges.len();
        if n > MAX_ENUM_EDGES {
            return Err(Error::Guard { what: "edges to enumerate", size: n as u128, limit: MAX_ENUM_EDGES as u128 });
        }
        let q_ln = q.ln();
        let mut log_w = vec![0.0f64; 1usize << n];
        log_w.par_chunks_mut(CHUNK).enumerate().for_each(|(chunk, out)| {
            let mut uf = UnionFind::new(self.vertices);
            let base = (chunk * CHUNK) as u64;
            for (i, slot) in out.iter_mut().enumerate() {
                *slot = self.log_weight(base + i as u64, q_ln, &mut uf);
            }
        });
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::domain("every configuration has zero weight"));
        }
        let mut total = KahanSum::default();
        for w in log_w.iter_mut() {
            *w = (*w - max).exp();
            total.add(*w);
        }
        let total = total.value();
        for w in log_w.iter_mut() {
            *w /= total;
        }
        Ok(ExactTable { edges: n, probs: log_w, log_z: max + total.ln() })
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub(crate) fn value(self) -> f64 {
        self.sum
    }
}

/// Normalised probabilities of every configuration, indexed by edge mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactTable {
    edges: usize,
    probs: Vec<f64>,
    log_z: f64,
}

impl ExactTable {
    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, mask: u64) -> f64 {
        self.probs[mask as usize]
    }

    /// Natural log of the partition function.
    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }

    /// Unnormalised weight of one configuration.
    pub fn weight(&self, mask: u64) -> f64 {
        (self.prob(mask).ln() + self.log_z).exp()
    }

    pub fn total(&self) -> f64 {
        let mut s = KahanSum::default();
        self.probs.iter().for_each(|&p| s.add(p));
        s.value()
    }

    /// Probability of the event `pred`.
    pub fn probability(&self, pred: impl Fn(u64) -> bool) -> f64 {
        let mut s = KahanSum::default();
        for (mask, &p) in self.probs.iter().enumerate() {
            if pred(mask as u64) {
                s.add(p);
            }
        }
        s.value()
    }

    /// Open probability of every edge.
    pub fn marginals(&self) -> Vec<f64> {
        let mut acc = vec![KahanSum::default(); self.edges];
        for (mask, &p) in self.probs.iter().enumerate() {
            for (e, a) in acc.iter_mut().enumerate() {
                if mask >> e & 1 == 1 {
                    a.add(p);
                }
            }
        }
        acc.into_iter().map(KahanSum::value).collect()
    }

    /// Law of the states of `edges`, indexed by the sub-mask whose bit `i`
    /// is the state of `edges[i]`.
    pub fn joint(&self, edges: &[usize]) -> Vec<f64> {
        let mut acc = vec![KahanSum::default(); 1 << edges.len()];
        for (mask, &p) in self.probs.iter().enumerate() {
            let sub = edges.iter().enumerate().fold(0usize, |s, (i, &e)| s | ((mask >> e & 1) << i));
            acc[sub].add(p);
        }
        acc.into_iter().map(KahanSum::value).collect()
    }

    /// Writes `config,weight,probability` rows; bit strings list edge 0 first.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "config,weight,probability")?;
        for (mask, &p) in self.probs.iter().enumerate() {
            let bits: String = (0..self.edges).map(|e| if mask >> e & 1 == 1 { '1' } else { '0' }).collect();
            writeln!(out, "{bits},{:e},{:e}", self.weight(mask as u64), p)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle(p: f64) -> RcGraph {
        let mut g = RcGraph::new(3);
        g.add_edge(0, 1, p);
        g.add_edge(1, 2, p);
        g.add_edge(2, 0, p);
        g
    }

    #[test]
    fn cluster_counts() {
        let g = triangle(0.5);
        let mut uf = UnionFind::new(3);
        assert_eq!(g.clusters(0b000, &mut uf), 3);
        assert_eq!(g.clusters(0b001, &mut uf), 2);
        assert_eq!(g.clusters(0b011, &mut uf), 1);
        assert_eq!(g.clusters(0b111, &mut uf), 1);
    }

    #[test]
    fn triangle_partition_function() {
        // Z = (1−p)³q³ + 3p(1−p)²q² + 3p²(1−p)q + p³q at p = 1/2, q = 2
        let t = triangle(0.5).exact(2.0).unwrap();
        let z = (8.0 + 3.0 * 4.0 + 3.0 * 2.0 + 2.0) / 8.0;
        assert!((t.z() - z).abs() < 1e-12);
        assert!((t.total() - 1.0).abs() < 1e-12);
        assert!((t.prob(0) - 1.0 / z).abs() < 1e-12);
        assert!((t.weight(0b111) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn q_one_is_product() {
        let t = triangle(0.3).exact(1.0).unwrap();
        for m in t.marginals() {
            assert!((m - 0.3).abs() < 1e-12);
        }
        let j = t.joint(&[0, 2]);
        assert!((j[0b11] - 0.09).abs() < 1e-12);
    }

    #[test]
    fn guard_and_domain() {
        let mut g = RcGraph::new(2);
        for _ in 0..25 {
            g.add_edge(0, 1, 0.5);
        }
        assert!(g.exact(2.0).unwrap_err().is_guard());
        assert!(triangle(0.5).exact(0.0).is_err());
        assert!(triangle(1.5).exact(1.0).is_err());
    }

    #[test]
    fn csv_rows() {
        let mut buf = Vec::new();
        triangle(0.5).exact(1.0).unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[0], "config,weight,probability");
        assert!(lines[2].starts_with("100,"));
    }
}
