//! Monte Carlo for percolated Galton–Watson trees and their colours.
//!
//! Randomness is keyed per vertex: a vertex's key seeds a SplitMix64 stream
//! that draws its family size and then, child by child, the edge state and
//! the child's key. A tree is therefore a pure function of its root key, and
//! materialised trees agree bit for bit with the lazy evaluators, whatever
//! order vertices are visited in.
//!
//! "Blue" is an infinite event, so it is replaced by a horizon: a vertex is
//! blue when an open path leads `budget` generations down from it.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{black_gamma, finite_depth_gamma, finite_depth_theta, gamma_k, survival_theta};
use crate::error::{Error, Result};
use crate::pgf::OffspringLaw;

pub use crate::analytic::red_mean;

/// Deepest tree [`sample_tree`] will build.
pub const MAX_TREE_DEPTH: usize = 40;
/// Largest expected node count [`sample_tree`] will build.
pub const MAX_EXPECTED_NODES: f64 = 1e8;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Key of the root of replication `index`.
pub fn root_key(seed: u64, index: u64) -> u64 {
    SplitMix64::seed_from_u64(seed ^ index.wrapping_mul(GOLDEN)).next_u64()
}

/// Children of one vertex as `(edge open, child key)`, drawn lazily.
struct Family {
    rng: SplitMix64,
    remaining: usize,
    p: f64,
}

impl Iterator for Family {
    type Item = (bool, u64);

    fn next(&mut self) -> Option<(bool, u64)> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let open = self.rng.gen::<f64>() < self.p;
        Some((open, self.rng.next_u64()))
    }
}

fn family(law: &OffspringLaw, p: f64, key: u64) -> Family {
    let mut rng = SplitMix64::seed_from_u64(key);
    let remaining = law.sample_with(rng.gen::<f64>());
    Family { rng, remaining, p }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Blue,
    Yellow,
    Red,
}

impl Color {
    pub const ALL: [Color; 3] = [Color::Blue, Color::Yellow, Color::Red];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_black(self) -> bool {
        self != Color::Red
    }
}

/// Lazy evaluation of colours on the percolated tree below a key.
#[derive(Debug, Clone, Copy)]
pub struct Percolated<'a> {
    law: &'a OffspringLaw,
    p: f64,
}

impl<'a> Percolated<'a> {
    pub fn new(law: &'a OffspringLaw, p: f64) -> Self {
        Percolated { law, p }
    }

    /// Open path down `budget` generations.
    pub fn blue(&self, key: u64, budget: usize) -> bool {
        budget == 0 || family(self.law, self.p, key).any(|(open, child)| open && self.blue(child, budget - 1))
    }

    /// A blue cutset of the subtree within `k ≤ budget` generations, with
    /// blue judged at the horizon `budget`.
    pub fn black(&self, key: u64, k: usize, budget: usize) -> bool {
        debug_assert!(k <= budget);
        if self.blue(key, budget) {
            return true;
        }
        // Not blue, so no open child is blue and black children suffice.
        k > 0 && family(self.law, self.p, key).all(|(_, child)| self.black(child, k - 1, budget - 1))
    }

    pub fn color(&self, key: u64, k: usize, budget: usize) -> Color {
        if self.blue(key, budget) {
            Color::Blue
        } else if k > 0 && family(self.law, self.p, key).all(|(_, child)| self.black(child, k - 1, budget - 1)) {
            Color::Yellow
        } else {
            Color::Red
        }
    }

    /// Children of `key` as `(edge open, child key)`.
    pub fn children(&self, key: u64) -> Vec<(bool, u64)> {
        family(self.law, self.p, key).collect()
    }
}

/// A percolated tree built down to `depth_limit`, in breadth-first order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncatedTree {
    parent: Vec<u32>,
    first_child: Vec<u32>,
    child_count: Vec<u32>,
    depth: Vec<u16>,
    /// State of the edge into each vertex; the root's entry is unused.
    open: Vec<bool>,
    key: Vec<u64>,
    depth_limit: usize,
}

fn expected_nodes(law: &OffspringLaw, depth: usize) -> f64 {
    let mut total = 0.0;
    let mut level = 1.0;
    for _ in 0..=depth {
        total += level;
        level *= law.mean();
    }
    total
}

/// Builds replication 0 of the percolated tree for `seed`.
pub fn sample_tree(law: &OffspringLaw, p: f64, depth: usize, seed: u64) -> Result<TruncatedTree> {
    sample_tree_at(law, p, depth, root_key(seed, 0))
}

/// Builds the percolated tree below an explicit root key.
pub fn sample_tree_at(law: &OffspringLaw, p: f64, depth: usize, key: u64) -> Result<TruncatedTree> {
    law.ensure_valid(false)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("p = {p} outside [0, 1]")));
    }
    if depth > MAX_TREE_DEPTH {
        return Err(Error::Guard { what: "tree depth", size: depth as u128, limit: MAX_TREE_DEPTH as u128 });
    }
    let expected = expected_nodes(law, depth);
    if expected > MAX_EXPECTED_NODES {
        return Err(Error::Guard { what: "expected tree nodes", size: expected as u128, limit: MAX_EXPECTED_NODES as u128 });
    }
    let mut t = TruncatedTree {
        parent: vec![u32::MAX],
        first_child: Vec::new(),
        child_count: Vec::new(),
        depth: vec![0],
        open: vec![false],
        key: vec![key],
        depth_limit: depth,
    };
    let mut v = 0;
    while v < t.key.len() {
        let start = t.key.len() as u32;
        if (t.depth[v] as usize) < depth {
            for (open, child) in family(law, p, t.key[v]) {
                t.parent.push(v as u32);
                t.depth.push(t.depth[v] + 1);
                t.open.push(open);
                t.key.push(child);
            }
        }
        t.first_child.push(start);
        t.child_count.push(t.key.len() as u32 - start);
        v += 1;
    }
    Ok(t)
}

impl TruncatedTree {
    pub fn len(&self) -> usize {
        self.key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.key.is_empty()
    }

    pub fn depth_limit(&self) -> usize {
        self.depth_limit
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (v != 0).then(|| self.parent[v] as usize)
    }

    pub fn children(&self, v: usize) -> std::ops::Range<usize> {
        let s = self.first_child[v] as usize;
        s..s + self.child_count[v] as usize
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v] as usize
    }

    /// State of the edge from `v` to its parent.
    pub fn is_open(&self, v: usize) -> bool {
        self.open[v]
    }

    pub fn key(&self, v: usize) -> u64 {
        self.key[v]
    }
}

/// Colours of the vertices of a [`TruncatedTree`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorAssignment {
    horizon: usize,
    within: usize,
    blue: Vec<bool>,
    /// Present for vertices at depth at most `within`.
    colors: Vec<Option<Color>>,
}

impl ColorAssignment {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn within(&self) -> usize {
        self.within
    }

    pub fn is_blue(&self, v: usize) -> bool {
        self.blue[v]
    }

    pub fn color(&self, v: usize) -> Option<Color> {
        self.colors[v]
    }

    pub fn is_black(&self, v: usize) -> bool {
        self.colors[v].is_some_and(Color::is_black)
    }
}

/// Bottom-up colouring. Vertices at depth `horizon` are blue by convention;
/// black means a blue cutset by generation `within`.
pub fn classify_colors(tree: &TruncatedTree, horizon: usize, within: usize) -> Result<ColorAssignment> {
    if horizon > tree.depth_limit {
        return Err(Error::domain(format!("horizon {horizon} exceeds tree depth {}", tree.depth_limit)));
    }
    if within > horizon {
        return Err(Error::domain(format!("cutset depth {within} exceeds horizon {horizon}")));
    }
    let n = tree.len();
    let mut blue = vec![false; n];
    let mut black = vec![false; n];
    let mut colors = vec![None; n];
    for v in (0..n).rev() {
        let d = tree.depth(v);
        if d > horizon {
            continue;
        }
        blue[v] = d == horizon || tree.children(v).any(|c| tree.open[c] && blue[c]);
        if d > within {
            continue;
        }
        black[v] = blue[v] || (d < within && tree.children(v).all(|c| black[c]));
        colors[v] = Some(match (blue[v], black[v]) {
            (true, _) => Color::Blue,
            (false, true) => Color::Yellow,
            (false, false) => Color::Red,
        });
    }
    Ok(ColorAssignment { horizon, within, blue, colors })
}

/// The outermost blue cutset inside the first `within` generations, or
/// `None` when no blue cutset exists there.
pub fn find_blue_cutset(tree: &TruncatedTree, colors: &ColorAssignment, within: usize) -> Option<Vec<usize>> {
    if within > colors.horizon {
        return None;
    }
    fn cut(t: &TruncatedTree, c: &ColorAssignment, v: usize, within: usize, out: &mut Vec<usize>) -> bool {
        let mark = out.len();
        if t.depth(v) < within && t.children(v).all(|ch| cut(t, c, ch, within, out)) {
            return true;
        }
        out.truncate(mark);
        if c.blue[v] {
            out.push(v);
            true
        } else {
            false
        }
    }
    let mut out = Vec::new();
    cut(tree, colors, 0, within, &mut out).then_some(out)
}

/// Quantity estimated by [`estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "quantity", rename_all = "snake_case")]
pub enum Quantity {
    /// Open path from the root down `horizon` generations.
    ThetaD { horizon: usize },
    /// Blue cutset within `k` generations, blue judged at `horizon`.
    GammaKD { k: usize, horizon: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Exact expectation of the simulated indicator.
    pub surrogate: f64,
    /// Distance from the surrogate to the horizon-free quantity.
    pub bias_bound: f64,
    pub samples: usize,
}

/// Smallest accepted sample count.
pub const MIN_SAMPLES: usize = 100;

/// Average of an indicator over `samples` independent trees.
pub fn estimate(quantity: Quantity, law: &OffspringLaw, p: f64, samples: usize, seed: u64) -> Result<McEstimate> {
    law.ensure_valid(false)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("p = {p} outside [0, 1]")));
    }
    if samples < MIN_SAMPLES {
        return Err(Error::domain(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
    }
    let (surrogate, limit) = match quantity {
        Quantity::ThetaD { horizon } => {
            (finite_depth_theta(law, p, horizon)?, survival_theta(law, p, 1e-13)?.value)
        }
        Quantity::GammaKD { k, horizon } => (finite_depth_gamma(law, p, k, horizon)?, gamma_k(law, p, k)?),
    };
    let tree = Percolated::new(law, p);
    let hits: u64 = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let key = root_key(seed, i);
            let hit = match quantity {
                Quantity::ThetaD { horizon } => tree.blue(key, horizon),
                Quantity::GammaKD { k, horizon } => tree.black(key, k, horizon),
            };
            hit as u64
        })
        .sum();
    let n = samples as f64;
    let mean = hits as f64 / n;
    Ok(McEstimate {
        mean,
        std_error: (mean * (1.0 - mean) / (n - 1.0)).sqrt(),
        surrogate,
        bias_bound: (surrogate - limit).abs(),
        samples,
    })
}

/// Child code: three times the edge type (0 closed, 1 open) plus the colour.
fn code(open: bool, color: Color) -> usize {
    (open as usize) * 3 + color.index()
}

fn decode(c: u8) -> (bool, Color) {
    (c >= 3, Color::ALL[(c % 3) as usize])
}

/// Colour of a vertex from its children's `(type, colour)` pairs.
pub fn color_rule(children: &[(bool, Color)]) -> Color {
    if children.iter().any(|&(open, c)| open && c == Color::Blue) {
        Color::Blue
    } else if children.iter().all(|&(open, c)| c == Color::Yellow || (!open && c == Color::Blue)) {
        Color::Yellow
    } else {
        Color::Red
    }
}

/// Largest number of child patterns enumerated by [`colored_offspring_law`].
pub const MAX_COLORED_PATTERNS: usize = 1 << 21;

/// One offspring pattern and its probability given the parent's colour.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoredEntry {
    /// Child codes `3·type + colour`, in birth order.
    codes: Vec<u8>,
    pub prob: f64,
}

impl ColoredEntry {
    pub fn children(&self) -> Vec<(bool, Color)> {
        self.codes.iter().map(|&c| decode(c)).collect()
    }
}

/// The two-type, three-colour branching process of the coloured tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoredOffspringLaw {
    /// `(q_b, q_y, q_r)`.
    pub q: [f64; 3],
    entries: [Vec<ColoredEntry>; 3],
    cumulative: [Vec<f64>; 3],
}

/// Enumerates the offspring law of each colour.
pub fn colored_offspring_law(law: &OffspringLaw, p: f64) -> Result<ColoredOffspringLaw> {
    law.ensure_valid(true)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("p = {p} outside (0, 1)")));
    }
    let theta = survival_theta(law, p, 1e-14)?.value;
    let gamma = black_gamma(law, p, 1e-14)?.value;
    let q = [theta, gamma - theta, 1.0 - gamma];
    let patterns: usize = (0..=law.max_family_size())
        .filter(|&k| law.prob(k) > 0.0)
        .map(|k| 6usize.saturating_pow(k as u32))
        .fold(0, usize::saturating_add);
    if patterns > MAX_COLORED_PATTERNS {
        return Err(Error::Guard {
            what: "coloured offspring patterns",
            size: patterns as u128,
            limit: MAX_COLORED_PATTERNS as u128,
        });
    }
    let weight = |c: u8| {
        let (open, color) = decode(c);
        (if open { p } else { 1.0 - p }) * q[color.index()]
    };
    let mut entries: [Vec<ColoredEntry>; 3] = Default::default();
    for k in 0..=law.max_family_size() {
        let pk = law.prob(k);
        if pk == 0.0 {
            continue;
        }
        let mut codes = vec![0u8; k];
        loop {
            let children: Vec<(bool, Color)> = codes.iter().map(|&c| decode(c)).collect();
            let parent = color_rule(&children);
            let qj = q[parent.index()];
            if qj > 0.0 {
                let prob = pk * codes.iter().map(|&c| weight(c)).product::<f64>() / qj;
                entries[parent.index()].push(ColoredEntry { codes: codes.clone(), prob });
            }
            // odometer over base-6 digits
            let mut i = 0;
            while i < k && codes[i] == 5 {
                codes[i] = 0;
                i += 1;
            }
            if i == k {
                break;
            }
            codes[i] += 1;
        }
    }
    let cumulative = entries.clone().map(|list| {
        let mut acc = 0.0;
        list.iter()
            .map(|e| {
                acc += e.prob;
                acc
            })
            .collect()
    });
    Ok(ColoredOffspringLaw { q, entries, cumulative })
}

impl ColoredOffspringLaw {
    pub fn entries(&self, parent: Color) -> &[ColoredEntry] {
        &self.entries[parent.index()]
    }

    /// Probability of an ordered child pattern given the parent's colour.
    pub fn prob(&self, parent: Color, children: &[(bool, Color)]) -> f64 {
        let codes: Vec<u8> = children.iter().map(|&(o, c)| code(o, c) as u8).collect();
        self.entries[parent.index()].iter().find(|e| e.codes == codes).map_or(0.0, |e| e.prob)
    }

    /// Total mass of the law of `parent`: 1, or 0 when `q_parent = 0`.
    pub fn total(&self, parent: Color) -> f64 {
        self.entries[parent.index()].iter().map(|e| e.prob).sum()
    }

    /// `mean[j][c]`: expected number of colour-`c` children of a colour-`j`
    /// parent.
    pub fn mean_matrix(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for (j, list) in self.entries.iter().enumerate() {
            for e in list {
                for &c in &e.codes {
                    out[j][(c % 3) as usize] += e.prob;
                }
            }
        }
        out
    }

    fn draw_root(&self, u: f64) -> Color {
        if u < self.q[0] {
            Color::Blue
        } else if u < self.q[0] + self.q[1] {
            Color::Yellow
        } else {
            Color::Red
        }
    }

    fn draw(&self, parent: Color, u: f64) -> &ColoredEntry {
        let cum = &self.cumulative[parent.index()];
        let i = cum.partition_point(|&c| c <= u * cum[cum.len() - 1]).min(cum.len() - 1);
        &self.entries[parent.index()][i]
    }
}

/// Per-sample observables of the first two generations: root colour (3),
/// children by parent colour and child code (18), grandchildren by parent
/// colour and code (18).
pub const DEPTH_TWO_CELLS: usize = 39;

fn record_generation(cells: &mut [f64], offset: usize, parent: Color, children: &[(bool, Color)]) {
    for &(open, c) in children {
        cells[offset + parent.index() * 6 + code(open, c)] += 1.0;
    }
}

/// Means and standard errors of the depth-two observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthTwoStats {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub samples: usize,
}

fn collect_stats(samples: usize, sample: impl Fn(u64) -> [f64; DEPTH_TWO_CELLS] + Sync) -> DepthTwoStats {
    let (sum, sq) = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let x = sample(i);
            (x, x.map(|v| v * v))
        })
        .reduce(
            || ([0.0; DEPTH_TWO_CELLS], [0.0; DEPTH_TWO_CELLS]),
            |(mut a, mut b), (c, d)| {
                for i in 0..DEPTH_TWO_CELLS {
                    a[i] += c[i];
                    b[i] += d[i];
                }
                (a, b)
            },
        );
    let n = samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_error = mean.iter().zip(&sq).map(|(m, s)| ((s / n - m * m).max(0.0) / (n - 1.0)).sqrt()).collect();
    DepthTwoStats { mean, std_error, samples }
}

/// Simulates two generations of the coloured process directly.
pub fn simulate_colored(law: &ColoredOffspringLaw, samples: usize, seed: u64) -> Result<DepthTwoStats> {
    if samples < MIN_SAMPLES {
        return Err(Error::domain(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
    }
    Ok(collect_stats(samples, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i);
        let mut cells = [0.0; DEPTH_TWO_CELLS];
        let root = law.draw_root(rng.gen());
        cells[root.index()] = 1.0;
        let kids = law.draw(root, rng.gen()).children();
        record_generation(&mut cells, 3, root, &kids);
        for &(_, c) in &kids {
            let grand = law.draw(c, rng.gen()).children();
            record_generation(&mut cells, 21, c, &grand);
        }
        cells
    }))
}

/// The same observables from percolated trees coloured with cutset depth
/// `within` and horizon `horizon` below every vertex.
pub fn classify_depth_two(
    law: &OffspringLaw,
    p: f64,
    within: usize,
    horizon: usize,
    samples: usize,
    seed: u64,
) -> Result<DepthTwoStats> {
    law.ensure_valid(false)?;
    if within > horizon {
        return Err(Error::domain(format!("cutset depth {within} exceeds horizon {horizon}")));
    }
    if samples < MIN_SAMPLES {
        return Err(Error::domain(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
    }
    let tree = Percolated::new(law, p);
    let colour = |key| tree.color(key, within, horizon);
    Ok(collect_stats(samples, |i| {
        let mut cells = [0.0; DEPTH_TWO_CELLS];
        let key = root_key(seed, i);
        let root = colour(key);
        cells[root.index()] = 1.0;
        let kids = tree.children(key);
        let kid_colors: Vec<(bool, Color)> = kids.iter().map(|&(o, k)| (o, colour(k))).collect();
        record_generation(&mut cells, 3, root, &kid_colors);
        for (&(_, k), &(_, c)) in kids.iter().zip(&kid_colors) {
            let grand: Vec<(bool, Color)> = tree.children(k).into_iter().map(|(o, g)| (o, colour(g))).collect();
            record_generation(&mut cells, 21, c, &grand);
        }
        cells
    }))
}
