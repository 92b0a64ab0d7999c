//! Single-edge heat-bath dynamics.
//!
//! Each step resamples one edge from its law given all others: open with
//! probability `p_e` when its endpoints are already joined off the edge,
//! else with probability `p_e / (p_e + q(1 − p_e))`. Edges are visited in
//! index order, one full pass per sweep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::RcGraph;
use super::{EdgeConfig, Estimate, RcSpec, TreeBox};
use crate::error::{Error, Result};
use crate::uf::UnionFind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Sweeps recorded after burn-in.
    pub sweeps: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Batches for the batch-means standard error.
    pub batches: usize,
}

impl ChainConfig {
    pub fn new(sweeps: usize, seed: u64) -> Self {
        ChainConfig { sweeps, burn_in: 1000.min(sweeps), seed, batches: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRun {
    /// Configuration after the last sweep.
    pub last: Vec<bool>,
    pub marginals: Vec<Estimate>,
    pub sweeps: usize,
}

/// Heat-bath state on a graph.
#[derive(Debug, Clone)]
pub struct HeatBath<'g> {
    graph: &'g RcGraph,
    q: f64,
    /// Open probability when the endpoints are not joined elsewhere.
    pi: Vec<f64>,
    state: Vec<bool>,
    uf: UnionFind,
    rng: ChaCha8Rng,
}

impl<'g> HeatBath<'g> {
    /// Starts from the all-closed configuration.
    pub fn new(graph: &'g RcGraph, q: f64, seed: u64, stream: u64) -> Result<Self> {
        if !(q >= 1.0 && q.is_finite()) {
            return Err(Error::domain(format!("q = {q}: the sampler needs q ≥ 1")));
        }
        if let Some(e) = graph.edges().iter().find(|e| !(e.p > 0.0 && e.p < 1.0)) {
            return Err(Error::domain(format!("edge parameter {} outside (0, 1)", e.p)));
        }
        let pi = graph.edges().iter().map(|e| e.p / (e.p + q * (1.0 - e.p))).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(HeatBath {
            graph,
            q,
            pi,
            state: vec![false; graph.edge_count()],
            uf: UnionFind::new(graph.vertex_count()),
            rng,
        })
    }

    pub fn state(&self) -> &[bool] {
        &self.state
    }

    fn joined_without(&mut self, skip: usize) -> bool {
        self.uf.reset(self.graph.vertex_count());
        for (e, edge) in self.graph.edges().iter().enumerate() {
            if e != skip && self.state[e] {
                self.uf.union(edge.u, edge.v);
            }
        }
        let edge = self.graph.edge(skip);
        self.uf.connected(edge.u, edge.v)
    }

    /// Resamples edge `e` from its conditional law.
    pub fn update(&mut self, e: usize) {
        let edge = self.graph.edge(e);
        let prob = if self.q == 1.0 || self.joined_without(e) { edge.p } else { self.pi[e] };
        self.state[e] = self.rng.gen::<f64>() < prob;
    }

    pub fn sweep(&mut self) {
        for e in 0..self.state.len() {
            self.update(e);
        }
    }
}

/// Runs one chain and reports per-edge open frequencies with batch-means
/// standard errors.
pub fn run_graph(graph: &RcGraph, q: f64, cfg: &ChainConfig, stream: u64) -> Result<ChainRun> {
    if cfg.sweeps == 0 || cfg.batches == 0 {
        return Err(Error::domain("sweeps and batches must be positive"));
    }
    let batches = cfg.batches.min(cfg.sweeps);
    let mut chain = HeatBath::new(graph, q, cfg.seed, stream)?;
    for _ in 0..cfg.burn_in {
        chain.sweep();
    }
    let edges = graph.edge_count();
    let mut batch_means = vec![vec![0.0; batches]; edges];
    let mut counts = vec![0u64; edges];
    let mut done = 0;
    #[allow(clippy::needless_range_loop)]
    for b in 0..batches {
        let len = (cfg.sweeps - done) / (batches - b);
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..len {
            chain.sweep();
            for (c, &s) in counts.iter_mut().zip(chain.state()) {
                *c += s as u64;
            }
        }
        for (e, &c) in counts.iter().enumerate() {
            batch_means[e][b] = c as f64 / len as f64;
        }
        done += len;
    }
    let marginals = batch_means.iter().map(|means| batch_estimate(means)).collect();
    Ok(ChainRun { last: chain.state().to_vec(), marginals, sweeps: cfg.sweeps })
}

fn batch_estimate(means: &[f64]) -> Estimate {
    let b = means.len() as f64;
    let mean = means.iter().sum::<f64>() / b;
    if means.len() < 2 {
        return Estimate { mean, std_error: f64::NAN };
    }
    let var = means.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (b - 1.0);
    Estimate { mean, std_error: (var / b).sqrt() }
}

/// Heat bath on a box with the boundary identifications of `spec`.
pub fn heat_bath_chain(tree: &TreeBox, spec: &RcSpec, cfg: &ChainConfig) -> Result<ChainRun> {
    let graph = spec.graph(tree)?;
    run_graph(&graph, spec.q, cfg, 0)
}

/// Independent chains on streams `0..chains`, pooled with equal weights.
pub fn heat_bath_chains(tree: &TreeBox, spec: &RcSpec, cfg: &ChainConfig, chains: usize) -> Result<ChainRun> {
    if chains == 0 {
        return Err(Error::domain("need at least one chain"));
    }
    let graph = spec.graph(tree)?;
    let runs = (0..chains as u64)
        .into_par_iter()
        .map(|s| run_graph(&graph, spec.q, cfg, s))
        .collect::<Result<Vec<_>>>()?;
    let c = chains as f64;
    let marginals = (0..graph.edge_count())
        .map(|e| {
            let mean = runs.iter().map(|r| r.marginals[e].mean).sum::<f64>() / c;
            let var = runs.iter().map(|r| r.marginals[e].std_error.powi(2)).sum::<f64>();
            Estimate { mean, std_error: var.sqrt() / c }
        })
        .collect();
    Ok(ChainRun { last: runs[0].last.clone(), marginals, sweeps: cfg.sweeps * chains })
}

/// The last configuration of a chain as an [`EdgeConfig`].
pub fn sample(tree: &TreeBox, spec: &RcSpec, sweeps: usize, seed: u64) -> Result<EdgeConfig> {
    let graph = spec.graph(tree)?;
    let mut chain = HeatBath::new(&graph, spec.q, seed, 0)?;
    for _ in 0..sweeps.max(1) {
        chain.sweep();
    }
    Ok(EdgeConfig::from_states(chain.state().to_vec()))
}
