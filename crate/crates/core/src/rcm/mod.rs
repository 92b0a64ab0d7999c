//! Finite-volume random-cluster measures on boxes of the `(m+1)`-regular
//! tree with a ray relation as boundary condition.
//!
//! A box `Λ_n` holds every vertex within distance `n` of the root. Vertices
//! are numbered breadth first, so edge `e` joins vertex `e + 1` to its parent
//! and the boundary vertices at depth `n` appear in stem order. With an
//! all-open tail outside the box, two boundary vertices are joined through
//! infinity exactly when their cones contain equivalent rays; with an
//! all-closed tail nothing is added and the measure is a product measure.

pub mod chain;
pub mod dlr;
pub mod graph;
pub mod reduce;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::pi;
use crate::error::{Error, Result};
use crate::rays::RayRelation;
use crate::uf::UnionFind;

pub use graph::{ExactTable, GraphEdge, RcGraph, MAX_ENUM_EDGES};

/// Upper bound on box vertices.
pub const MAX_BOX_VERTICES: usize = 1 << 24;

/// The ball `Λ_n` of radius `n` around the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeBox {
    m: usize,
    n: usize,
    /// First vertex of each depth, plus one past the end.
    level_start: Vec<usize>,
    parent: Vec<u32>,
}

impl TreeBox {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::domain(format!("m = {m} must be at least 2")));
        }
        if n == 0 {
            return Err(Error::domain("box depth must be at least 1"));
        }
        let mut level_start = vec![0, 1];
        let mut width = m as u128 + 1;
        let mut total = 1u128;
        for _ in 0..n {
            total += width;
            if total > MAX_BOX_VERTICES as u128 {
                return Err(Error::Guard { what: "box vertices", size: total, limit: MAX_BOX_VERTICES as u128 });
            }
            level_start.push(total as usize);
            width *= m as u128;
        }
        let vertices = total as usize;
        let mut parent = vec![u32::MAX; vertices];
        for d in 1..=n {
            for (local, slot) in parent[level_start[d]..level_start[d + 1]].iter_mut().enumerate() {
                *slot = if d == 1 { 0 } else { (level_start[d - 1] + local / m) as u32 };
            }
        }
        Ok(TreeBox { m, n, level_start, parent })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn depth(&self) -> usize {
        self.n
    }

    pub fn vertex_count(&self) -> usize {
        self.parent.len()
    }

    pub fn edge_count(&self) -> usize {
        self.parent.len() - 1
    }

    /// `(parent, child)` of edge `e`.
    pub fn edge(&self, e: usize) -> (usize, usize) {
        (self.parent[e + 1] as usize, e + 1)
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (v != 0).then(|| self.parent[v] as usize)
    }

    /// Vertex ids at depth `d`.
    pub fn level(&self, d: usize) -> std::ops::Range<usize> {
        self.level_start[d]..self.level_start[d + 1]
    }

    pub fn boundary(&self) -> std::ops::Range<usize> {
        self.level(self.n)
    }

    pub fn vertex_depth(&self, v: usize) -> usize {
        self.level_start.partition_point(|&s| s <= v) - 1
    }

    /// Edge entering vertex `v` (not the root).
    pub fn edge_into(&self, v: usize) -> usize {
        assert!(v > 0, "the root has no incoming edge");
        v - 1
    }
}

/// Boundary condition outside the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    AllOpen,
    AllClosed,
}

/// Parameters of `φ^{ξ,∼}_{Λ,p,q}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RcSpec {
    pub p: f64,
    pub q: f64,
    pub relation: RayRelation,
    pub tail: TailMode,
}

impl RcSpec {
    pub fn new(p: f64, q: f64, relation: RayRelation, tail: TailMode) -> Result<Self> {
        let spec = RcSpec { p, q, relation, tail };
        spec.validate()?;
        Ok(spec)
    }

    /// Wired relation, all-open tail.
    pub fn wired(m: usize, p: f64, q: f64) -> Result<Self> {
        Self::new(p, q, RayRelation::wired(m), TailMode::AllOpen)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::domain(format!("p = {} outside [0, 1]", self.p)));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::domain(format!("q = {} must be positive", self.q)));
        }
        Ok(())
    }

    pub fn pi(&self) -> f64 {
        pi(self.p, self.q).expect("validated parameters")
    }

    /// Class of each boundary vertex when the tail identifies them, else
    /// `None`. Relations deeper than the box are coarsened to it first.
    pub fn boundary_classes(&self, tree: &TreeBox) -> Result<Option<Vec<u32>>> {
        if self.tail == TailMode::AllClosed || self.relation.is_free() {
            return Ok(None);
        }
        let rel = if self.relation.depth() > tree.depth() {
            self.relation.coarsen_to_box(tree.depth())?
        } else {
            self.relation.clone()
        };
        rel.boundary_identification(tree.depth(), tree.m()).map(Some)
    }

    /// The box with identified boundary vertices merged, one graph edge per
    /// box edge in the same order.
    pub fn graph(&self, tree: &TreeBox) -> Result<RcGraph> {
        self.validate()?;
        let classes = self.boundary_classes(tree)?;
        let boundary = tree.boundary();
        let mut id: Vec<usize> = (0..boundary.start).collect();
        match &classes {
            None => id.extend(boundary.clone()),
            Some(c) => id.extend(c.iter().map(|&c| boundary.start + c as usize)),
        }
        let vertices = boundary.start + classes.as_ref().map_or(boundary.len(), |c| c.iter().max().map_or(0, |&x| x as usize + 1));
        let mut g = RcGraph::new(vertices);
        for e in 0..tree.edge_count() {
            let (u, v) = tree.edge(e);
            g.add_edge(id[u], id[v], self.p);
        }
        Ok(g)
    }
}

/// Open/closed state of every edge of a box.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeConfig {
    states: Vec<bool>,
}

impl EdgeConfig {
    pub fn closed(len: usize) -> Self {
        EdgeConfig { states: vec![false; len] }
    }

    pub fn open(len: usize) -> Self {
        EdgeConfig { states: vec![true; len] }
    }

    pub fn from_states(states: Vec<bool>) -> Self {
        EdgeConfig { states }
    }

    /// Bit `e` of `mask` is the state of edge `e`.
    pub fn from_mask(mask: u64, len: usize) -> Self {
        assert!(len <= 64);
        EdgeConfig { states: (0..len).map(|e| mask >> e & 1 == 1).collect() }
    }

    pub fn mask(&self) -> u64 {
        assert!(self.states.len() <= 64, "configuration too long for a mask");
        self.states.iter().enumerate().fold(0, |m, (e, &s)| m | (s as u64) << e)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn get(&self, e: usize) -> bool {
        self.states[e]
    }

    pub fn set(&mut self, e: usize, open: bool) {
        self.states[e] = open;
    }

    pub fn states(&self) -> &[bool] {
        &self.states
    }

    pub fn open_count(&self) -> usize {
        self.states.iter().filter(|&&s| s).count()
    }

    /// Edge-wise `self ≤ other`.
    pub fn le(&self, other: &EdgeConfig) -> bool {
        self.states.iter().zip(&other.states).all(|(&a, &b)| !a || b)
    }
}

fn check_config(tree: &TreeBox, omega: &EdgeConfig) -> Result<()> {
    if omega.len() != tree.edge_count() {
        return Err(Error::Dimension { expected: tree.edge_count(), got: omega.len() });
    }
    Ok(())
}

/// Joins the boundary vertices that share a class.
fn union_boundary(tree: &TreeBox, classes: &[u32], uf: &mut UnionFind) {
    let boundary = tree.boundary();
    let mut first = vec![usize::MAX; classes.len()];
    for (i, &c) in classes.iter().enumerate() {
        let v = boundary.start + i;
        match first[c as usize] {
            usize::MAX => first[c as usize] = v,
            rep => {
                uf.union(rep, v);
            }
        }
    }
}

/// Components of the open graph on the box augmented by the boundary
/// identifications of `spec`.
pub fn cluster_count(tree: &TreeBox, omega: &EdgeConfig, spec: &RcSpec) -> Result<usize> {
    check_config(tree, omega)?;
    let mut uf = UnionFind::new(tree.vertex_count());
    for e in 0..tree.edge_count() {
        if omega.get(e) {
            let (u, v) = tree.edge(e);
            uf.union(u, v);
        }
    }
    if let Some(classes) = spec.boundary_classes(tree)? {
        union_boundary(tree, &classes, &mut uf);
    }
    Ok(uf.components())
}

/// Exhaustive law of the box configuration.
pub fn exact_distribution(tree: &TreeBox, spec: &RcSpec) -> Result<ExactTable> {
    if tree.edge_count() > MAX_ENUM_EDGES {
        return Err(Error::Guard {
            what: "box edges to enumerate",
            size: tree.edge_count() as u128,
            limit: MAX_ENUM_EDGES as u128,
        });
    }
    spec.graph(tree)?.exact(spec.q)
}

/// Point estimate with its standard error (zero for exact values).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalMethod {
    Exact,
    HeatBath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginals {
    pub method: MarginalMethod,
    pub edges: Vec<Estimate>,
}

/// Open probability of every box edge: exact when the box is small enough
/// to enumerate, else from a heat-bath run if `fallback` is given.
pub fn edge_marginals(tree: &TreeBox, spec: &RcSpec, fallback: Option<chain::ChainConfig>) -> Result<Marginals> {
    match exact_distribution(tree, spec) {
        Ok(table) => Ok(Marginals {
            method: MarginalMethod::Exact,
            edges: table.marginals().into_iter().map(|mean| Estimate { mean, std_error: 0.0 }).collect(),
        }),
        Err(e) if e.is_guard() => match fallback {
            Some(cfg) => {
                let run = chain::heat_bath_chain(tree, spec, &cfg)?;
                Ok(Marginals { method: MarginalMethod::HeatBath, edges: run.marginals })
            }
            None => Err(e),
        },
        Err(e) => Err(e),
    }
}

/// Law of edge `e` given every other edge: `p` if its endpoints are joined
/// off `e` (through the box and the boundary identifications), else `π`.
pub fn conditional_edge_prob(tree: &TreeBox, spec: &RcSpec, e: usize, rest: &EdgeConfig) -> Result<f64> {
    check_config(tree, rest)?;
    if e >= tree.edge_count() {
        return Err(Error::domain(format!("edge {e} outside the box")));
    }
    spec.validate()?;
    let mut uf = UnionFind::new(tree.vertex_count());
    for f in (0..tree.edge_count()).filter(|&f| f != e && rest.get(f)) {
        let (u, v) = tree.edge(f);
        uf.union(u, v);
    }
    if let Some(classes) = spec.boundary_classes(tree)? {
        union_boundary(tree, &classes, &mut uf);
    }
    let (u, v) = tree.edge(e);
    Ok(if uf.connected(u, v) { spec.p } else { spec.pi() })
}

/// Probabilities of an increasing event under the product measure `φ_π`,
/// under the relation's wired-tail measure, and under the fully wired one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    pub lhs: f64,
    pub mid: f64,
    pub rhs: f64,
    pub ok: bool,
}

const MONOTONE_SPOT_CHECKS: usize = 4096;

/// Checks `φ_π(A) ≤ φ^{1,∼}_Λ(A) ≤ φ^1_Λ(A)` for an increasing event `A`.
pub fn sandwich_check(
    tree: &TreeBox,
    relation: &RayRelation,
    p: f64,
    q: f64,
    event: impl Fn(&EdgeConfig) -> bool,
) -> Result<Sandwich> {
    if q < 1.0 {
        return Err(Error::domain(format!("q = {q} below 1: no stochastic ordering")));
    }
    let n = tree.edge_count();
    if n > MAX_ENUM_EDGES {
        return Err(Error::Guard { what: "box edges to enumerate", size: n as u128, limit: MAX_ENUM_EDGES as u128 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a4d_1c4e);
    for _ in 0..MONOTONE_SPOT_CHECKS {
        let lower = rng.gen::<u64>() & ((1u64 << n) - 1);
        let upper = lower | (rng.gen::<u64>() & ((1u64 << n) - 1));
        if event(&EdgeConfig::from_mask(lower, n)) && !event(&EdgeConfig::from_mask(upper, n)) {
            return Err(Error::NonMonotone(format!("holds at {lower:#b} but not at {upper:#b}")));
        }
    }
    let prob = |spec: RcSpec| -> Result<f64> {
        let table = exact_distribution(tree, &spec)?;
        Ok(table.probability(|mask| event(&EdgeConfig::from_mask(mask, n))))
    };
    let lhs = prob(RcSpec::new(pi(p, q)?, 1.0, RayRelation::Free, TailMode::AllClosed)?)?;
    let mid = prob(RcSpec::new(p, q, relation.clone(), TailMode::AllOpen)?)?;
    let rhs = prob(RcSpec::new(p, q, RayRelation::wired(tree.m()), TailMode::AllOpen)?)?;
    let ok = lhs <= mid + 1e-12 && mid <= rhs + 1e-12;
    Ok(Sandwich { lhs, mid, rhs, ok })
}

/// Whether the product measure `φ_π` is a random-cluster measure for the
/// relation: always for the free relation, and for open relations exactly
/// when `φ_π` has no infinite clusters (`mπ ≤ 1`).
pub fn free_measure_is_rc(relation: &RayRelation, m: usize, p: f64, q: f64) -> Result<bool> {
    if q <= 1.0 || p == 1.0 {
        return Err(Error::domain(format!("need q > 1 and p < 1, got p = {p}, q = {q}")));
    }
    let density = pi(p, q)?;
    Ok(match relation {
        RayRelation::Free => true,
        RayRelation::Open(_) => m as f64 * density <= 1.0,
    })
}
