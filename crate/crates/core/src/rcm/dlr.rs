//! Consistency of the box measures under restriction to a smaller box.
//!
//! Fix `Λ_n ⊂ Λ_N`. Conditioning the `Λ_N` measure on the edges outside
//! `Λ_n` must give the `Λ_n` measure whose boundary vertices are identified
//! whenever the outside configuration, together with the boundary
//! identifications of `Λ_N`, joins them.

use serde::{Deserialize, Serialize};

use super::graph::RcGraph;
use super::{exact_distribution, RcSpec, TreeBox};
use crate::error::{Error, Result};
use crate::uf::UnionFind;

/// Largest gap between the two sides over all outside configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DlrReport {
    pub max_abs_diff: f64,
    pub restrictions: usize,
}

/// The inner box with boundary merged as induced by `outer_mask`, the state
/// of the outer edges (bit `i` is edge `inner_edges + i` of the big box).
pub fn induced_graph(inner: &TreeBox, outer: &TreeBox, spec: &RcSpec, outer_mask: u64) -> Result<RcGraph> {
    let mut uf = UnionFind::new(outer.vertex_count());
    for e in inner.edge_count()..outer.edge_count() {
        if outer_mask >> (e - inner.edge_count()) & 1 == 1 {
            let (u, v) = outer.edge(e);
            uf.union(u, v);
        }
    }
    if let Some(classes) = spec.boundary_classes(outer)? {
        let start = outer.boundary().start;
        let mut first = vec![usize::MAX; classes.len()];
        for (i, &c) in classes.iter().enumerate() {
            match first[c as usize] {
                usize::MAX => first[c as usize] = start + i,
                rep => {
                    uf.union(rep, start + i);
                }
            }
        }
    }
    let boundary = inner.boundary();
    let mut id: Vec<usize> = (0..boundary.start).collect();
    let mut label = std::collections::HashMap::new();
    for v in boundary.clone() {
        let next = boundary.start + label.len();
        id.push(*label.entry(uf.find(v)).or_insert(next));
    }
    let mut g = RcGraph::new(boundary.start + label.len());
    for e in 0..inner.edge_count() {
        let (u, v) = inner.edge(e);
        g.add_edge(id[u], id[v], spec.p);
    }
    Ok(g)
}

/// Compares, for every outside configuration, the conditional law of the
/// inner edges under the `Λ_N` measure with the induced `Λ_n` measure.
pub fn dlr_check(m: usize, n: usize, big_n: usize, spec: &RcSpec) -> Result<DlrReport> {
    if !(1..big_n).contains(&n) {
        return Err(Error::domain(format!("need 1 ≤ n < N, got n = {n}, N = {big_n}")));
    }
    let inner = TreeBox::new(m, n)?;
    let outer = TreeBox::new(m, big_n)?;
    let big = exact_distribution(&outer, spec)?;
    let ei = inner.edge_count();
    let eo = outer.edge_count() - ei;
    let mut worst: f64 = 0.0;
    for outside in 0..1u64 << eo {
        let rows: Vec<f64> = (0..1u64 << ei).map(|inside| big.prob(inside | outside << ei)).collect();
        let mass: f64 = rows.iter().sum();
        if mass == 0.0 {
            continue;
        }
        let local = induced_graph(&inner, &outer, spec, outside)?.exact(spec.q)?;
        for (inside, &w) in rows.iter().enumerate() {
            worst = worst.max((w / mass - local.prob(inside as u64)).abs());
        }
    }
    Ok(DlrReport { max_abs_diff: worst, restrictions: 1 << eo })
}
