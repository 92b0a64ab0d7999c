//! Series and parallel replacements, attachment trees, and the test that
//! tells boundary classes apart.

use serde::{Deserialize, Serialize};

use super::graph::RcGraph;
use super::TreeBox;
use crate::analytic::attachment_parameter;
use crate::error::{Error, Result};
use crate::rays::RayRelation;

/// Parameter of one edge equivalent to two edges in series through a
/// vertex of degree two.
pub fn series_reduce(p1: f64, p2: f64, q: f64) -> f64 {
    let both = p1 * p2;
    let one = p1 * (1.0 - p2) + (1.0 - p1) * p2;
    let none = q * (1.0 - p1) * (1.0 - p2);
    let total = both + one + none;
    if total == 0.0 {
        return 0.0;
    }
    both / total
}

/// Parameter of one edge equivalent to two parallel edges.
pub fn parallel_reduce(p1: f64, p2: f64) -> f64 {
    1.0 - (1.0 - p1) * (1.0 - p2)
}

/// Output of [`reduce_graph`].
#[derive(Debug, Clone, PartialEq)]
pub struct Reduced {
    pub graph: RcGraph,
    /// New index of each kept edge, in the order given.
    pub kept: Vec<usize>,
    /// New id of each old vertex that survived.
    pub vertex_map: Vec<Option<usize>>,
}

/// Applies pendant removals, parallel merges and series replacements until
/// none applies. Kept edges and terminal vertices are never touched, so the
/// joint law of the kept edges is unchanged.
pub fn reduce_graph(g: &RcGraph, q: f64, keep: &[usize], terminals: &[usize]) -> Result<Reduced> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::domain(format!("q = {q} must be positive")));
    }
    let n = g.vertex_count();
    let mut edges: Vec<(usize, usize, f64)> = g.edges().iter().map(|e| (e.u, e.v, e.p)).collect();
    let mut alive = vec![true; edges.len()];
    let mut kept = vec![false; edges.len()];
    for &e in keep {
        if e >= edges.len() {
            return Err(Error::domain(format!("kept edge {e} outside the graph")));
        }
        kept[e] = true;
    }
    let mut terminal = vec![false; n];
    for &v in terminals {
        if v >= n {
            return Err(Error::domain(format!("terminal {v} outside the graph")));
        }
        terminal[v] = true;
    }
    for &e in keep {
        terminal[edges[e].0] = true;
        terminal[edges[e].1] = true;
    }

    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    loop {
        let mut changed = false;
        for list in incident.iter_mut() {
            list.clear();
        }
        for (e, &(u, v, _)) in edges.iter().enumerate() {
            if alive[e] {
                incident[u].push(e);
                if v != u {
                    incident[v].push(e);
                }
            }
        }
        // Self-loops and parallel classes.
        let mut seen = std::collections::HashMap::new();
        for e in 0..edges.len() {
            if !alive[e] || kept[e] {
                continue;
            }
            let (u, v, p) = edges[e];
            if u == v {
                alive[e] = false;
                changed = true;
                continue;
            }
            let key = (u.min(v), u.max(v));
            match seen.get(&key) {
                None => {
                    seen.insert(key, e);
                }
                Some(&f) => {
                    edges[f].2 = parallel_reduce(edges[f].2, p);
                    alive[e] = false;
                    changed = true;
                }
            }
        }
        if changed {
            continue;
        }
        for w in 0..n {
            if terminal[w] {
                continue;
            }
            match incident[w][..] {
                [e] if !kept[e] => {
                    alive[e] = false;
                    changed = true;
                    break;
                }
                [a, b] if !kept[a] && !kept[b] => {
                    let other = |e: usize| if edges[e].0 == w { edges[e].1 } else { edges[e].0 };
                    let (u, v) = (other(a), other(b));
                    edges[a] = (u, v, series_reduce(edges[a].2, edges[b].2, q));
                    alive[b] = false;
                    changed = true;
                    break;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }

    let mut vertex_map = vec![None; n];
    let mut next = 0;
    for v in 0..n {
        if terminal[v] || !incident[v].is_empty() {
            vertex_map[v] = Some(next);
            next += 1;
        }
    }
    let mut graph = RcGraph::new(next);
    let mut new_index = vec![usize::MAX; edges.len()];
    for &e in keep {
        let (u, v, p) = edges[e];
        new_index[e] = graph.add_edge(vertex_map[u].unwrap(), vertex_map[v].unwrap(), p);
    }
    for (e, &(u, v, p)) in edges.iter().enumerate() {
        if alive[e] && !kept[e] {
            graph.add_edge(vertex_map[u].unwrap(), vertex_map[v].unwrap(), p);
        }
    }
    Ok(Reduced { graph, kept: keep.iter().map(|&e| new_index[e]).collect(), vertex_map })
}

/// The depth-`k` tree with one attachment edge from each of its boundary
/// vertices to the supervertex of its class.
#[derive(Debug, Clone, PartialEq)]
pub struct AttachmentTree {
    /// Parameter of every attachment edge.
    pub p_n: f64,
    pub graph: RcGraph,
    /// Graph indices of the box edges of `Λ_k`, in box order.
    pub box_edges: Vec<usize>,
    /// Graph index of the attachment edge of each depth-`k` vertex.
    pub attachment_edges: Vec<usize>,
    /// Class of each depth-`k` vertex.
    pub classes: Vec<u32>,
}

fn depth_k_classes(m: usize, k: usize, relation: &RayRelation) -> Result<Vec<u32>> {
    match relation {
        RayRelation::Free => Err(Error::InvalidRelation("attachment trees need an open relation".into())),
        RayRelation::Open(o) if o.depth() > k => Err(Error::InvalidRelation(format!(
            "relation of depth {} does not act at depth {k}",
            o.depth()
        ))),
        RayRelation::Open(_) => relation.boundary_identification(k, m),
    }
}

fn attachment_graph(m: usize, p: f64, k: usize, classes: &[u32], p_att: f64) -> Result<AttachmentTree> {
    let tree = TreeBox::new(m, k)?;
    let class_count = classes.iter().max().map_or(0, |&c| c as usize + 1);
    let mut graph = RcGraph::new(tree.vertex_count() + class_count);
    let box_edges = (0..tree.edge_count())
        .map(|e| {
            let (u, v) = tree.edge(e);
            graph.add_edge(u, v, p)
        })
        .collect();
    let attachment_edges = tree
        .boundary()
        .zip(classes)
        .map(|(x, &c)| graph.add_edge(x, tree.vertex_count() + c as usize, p_att))
        .collect();
    Ok(AttachmentTree { p_n: p_att, graph, box_edges, attachment_edges, classes: classes.to_vec() })
}

/// Collapses each depth-`k` subtree of the `Λ_n` box, whose boundary is
/// wired inside each class of `relation`, into one attachment edge.
pub fn reduce_to_attachment_tree(
    m: usize,
    p: f64,
    q: f64,
    k: usize,
    n: usize,
    relation: &RayRelation,
) -> Result<AttachmentTree> {
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    if n < k {
        return Err(Error::domain(format!("n = {n} below k = {k}")));
    }
    let classes = depth_k_classes(m, k, relation)?;
    let p_n = attachment_parameter(m, p, q, n - k)?;
    attachment_graph(m, p, k, &classes, p_n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dependence {
    pub delta: f64,
    pub dependent: bool,
    /// Whether `x ∼_k y`.
    pub same_class: bool,
}

/// Threshold on `|delta|` above which two attachment edges count as dependent.
pub const DEPENDENCE_EPS: f64 = 1e-9;

/// Correlation between the attachment edges of `x` and `y` once every other
/// attachment edge is closed: `P(e_x | e_y) − P(e_x | not e_y)`.
#[allow(clippy::too_many_arguments)]
pub fn dependence_test(
    m: usize,
    p: f64,
    q: f64,
    relation: &RayRelation,
    k: usize,
    x: usize,
    y: usize,
    p_att: f64,
) -> Result<Dependence> {
    if x == y {
        return Err(Error::domain("x and y must differ"));
    }
    if !(p_att > 0.0 && p_att < 1.0) {
        return Err(Error::domain(format!("attachment parameter {p_att} outside (0, 1)")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("p = {p} outside (0, 1)")));
    }
    let classes = depth_k_classes(m, k, relation)?;
    if x >= classes.len() || y >= classes.len() {
        return Err(Error::domain(format!("boundary vertices {x}, {y} outside 0..{}", classes.len())));
    }
    let full = attachment_graph(m, p, k, &classes, p_att)?;
    // Closing every other attachment edge amounts to deleting it.
    let mut g = RcGraph::new(full.graph.vertex_count());
    for &e in &full.box_edges {
        let edge = full.graph.edge(e);
        g.add_edge(edge.u, edge.v, edge.p);
    }
    let ex = full.graph.edge(full.attachment_edges[x]);
    let ey = full.graph.edge(full.attachment_edges[y]);
    let ix = g.add_edge(ex.u, ex.v, ex.p);
    let iy = g.add_edge(ey.u, ey.v, ey.p);
    let joint = g.exact(q)?.joint(&[ix, iy]);
    let given_open = joint[0b11] / (joint[0b10] + joint[0b11]);
    let given_closed = joint[0b01] / (joint[0b00] + joint[0b01]);
    let delta = given_open - given_closed;
    Ok(Dependence { delta, dependent: delta.abs() > DEPENDENCE_EPS, same_class: classes[x] == classes[y] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rcm::{exact_distribution, RcSpec, TailMode};

    #[test]
    fn series_examples() {
        assert!((series_reduce(0.5, 0.5, 2.0) - 0.2).abs() < 1e-15);
        assert!((series_reduce(0.3, 0.7, 1.0) - 0.21).abs() < 1e-15);
        assert_eq!(series_reduce(1.0, 0.4, 3.0), 0.4);
        assert_eq!(parallel_reduce(0.5, 0.5), 0.75);
    }

    #[test]
    fn series_matches_three_vertex_enumeration() {
        for &(p1, p2, q) in &[(0.5f64, 0.5f64, 2.0f64), (0.2, 0.9, 4.0), (0.6, 0.3, 0.5)] {
            // path u - w - v: weights of u↔v versus not
            let joined = p1 * p2 * q.powi(1);
            let apart = (p1 * (1.0 - p2) + (1.0 - p1) * p2) * q.powi(2) + (1.0 - p1) * (1.0 - p2) * q.powi(3);
            let s = series_reduce(p1, p2, q);
            // an edge u - v: open gives one cluster, closed two
            assert!((s * q / ((1.0 - s) * q * q) - joined / apart).abs() < 1e-12);
        }
    }

    fn kept_joint_matches(g: &RcGraph, q: f64, keep: &[usize], terminals: &[usize]) {
        let r = reduce_graph(g, q, keep, terminals).unwrap();
        let a = g.exact(q).unwrap().joint(keep);
        let b = r.graph.exact(q).unwrap().joint(&r.kept);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn driver_collapses_paths_and_bundles() {
        for len in 1..=5 {
            let mut path = RcGraph::new(len + 1);
            for i in 0..len {
                path.add_edge(i, i + 1, 0.3 + 0.1 * i as f64);
            }
            let chord = path.add_edge(0, len, 0.45);
            kept_joint_matches(&path, 2.5, &[chord], &[]);
            let r = reduce_graph(&path, 2.5, &[chord], &[]).unwrap();
            assert_eq!(r.graph.edge_count(), 2);

            let mut bundle = RcGraph::new(3);
            for i in 0..len {
                bundle.add_edge(0, 1, 0.2 + 0.1 * i as f64);
            }
            let tail = bundle.add_edge(1, 2, 0.5);
            let back = bundle.add_edge(2, 0, 0.5);
            kept_joint_matches(&bundle, 3.0, &[tail, back], &[]);
        }
    }

    #[test]
    fn attachment_tree_for_k_equal_n_is_identification() {
        let t = reduce_to_attachment_tree(2, 0.6, 2.0, 1, 1, &RayRelation::wired(2)).unwrap();
        assert_eq!(t.p_n, 1.0);
        assert_eq!(t.attachment_edges.len(), 3);
        assert!(reduce_to_attachment_tree(2, 0.6, 2.0, 2, 1, &RayRelation::wired(2)).is_err());
        assert!(reduce_to_attachment_tree(2, 0.6, 2.0, 1, 2, &RayRelation::Free).is_err());
    }

    /// The reduced tree and the full wired box give the same law on `E_{Λ_k}`.
    #[test]
    fn attachment_tree_matches_full_box() {
        let rel = RayRelation::wired(2);
        let box2 = TreeBox::new(2, 2).unwrap();
        let full = exact_distribution(&box2, &RcSpec::new(0.6, 2.0, rel.clone(), TailMode::AllOpen).unwrap()).unwrap();
        let t = reduce_to_attachment_tree(2, 0.6, 2.0, 1, 2, &rel).unwrap();
        let red = t.graph.exact(2.0).unwrap();
        let a = full.joint(&[0, 1, 2]);
        let b = red.joint(&t.box_edges);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn driver_recovers_attachment_parameter() {
        let rel = RayRelation::open(2, 1, vec![0, 1, 0]).unwrap();
        for n in 2..=5 {
            let tree = TreeBox::new(2, n).unwrap();
            let spec = RcSpec::new(0.55, 3.0, rel.clone(), TailMode::AllOpen).unwrap();
            let g = spec.graph(&tree).unwrap();
            let supers: Vec<usize> = (tree.boundary().start..g.vertex_count()).collect();
            let mut terminals: Vec<usize> = (0..4).collect();
            terminals.extend(supers);
            let r = reduce_graph(&g, 3.0, &[0, 1, 2], &terminals).unwrap();
            let want = attachment_parameter(2, 0.55, 3.0, n - 1).unwrap();
            let extra: Vec<f64> = r.graph.edges()[3..].iter().map(|e| e.p).collect();
            {
                assert_eq!(extra.len(), 3);
                assert!(extra.iter().all(|&p| (p - want).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn dependence_examples() {
        let wired = RayRelation::wired(2);
        let d = dependence_test(2, 0.6, 2.0, &wired, 1, 0, 2, 0.7).unwrap();
        assert!(d.dependent && d.same_class && d.delta > 0.0);
        let split = RayRelation::open(2, 1, vec![0, 1, 1]).unwrap();
        let d = dependence_test(2, 0.6, 2.0, &split, 1, 0, 1, 0.7).unwrap();
        assert!(!d.dependent && !d.same_class && d.delta.abs() < 1e-12);
        let d = dependence_test(2, 0.6, 1.0, &wired, 1, 0, 1, 0.3).unwrap();
        assert!(d.delta.abs() < 1e-12);
        assert!(dependence_test(2, 0.6, 2.0, &wired, 1, 1, 1, 0.3).is_err());
    }
}
