//! Boundary conditions as equivalence relations on the rays of the
//! `(m+1)`-regular tree.
//!
//! The root has children `0..=m` and every other vertex children `0..m`, so a
//! ray is an infinite child-index sequence and a *stem* is its first `k`
//! entries. There are `(m+1)·m^(k−1)` stems of depth `k`; they are numbered in
//! lexicographic order, which coincides with breadth-first vertex order at
//! depth `k`.
//!
//! An open relation is determined by a partition of the depth-`k` stems: two
//! rays are equivalent iff their stems lie in the same class. The free
//! relation (all classes singletons) has no finite description of that kind
//! and is its own variant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uf::UnionFind;

/// Largest number of stems a relation may carry.
pub const MAX_STEMS: usize = 1 << 24;

/// Number of vertices at depth `k ≥ 1`.
pub fn stem_count(m: usize, k: usize) -> usize {
    assert!(k >= 1);
    (m + 1) * m.pow(k as u32 - 1)
}

fn checked_stem_count(m: usize, k: usize) -> Result<usize> {
    if m < 2 {
        return Err(Error::InvalidRelation(format!("m = {m} must be at least 2")));
    }
    if k == 0 {
        return Err(Error::InvalidRelation("stem depth must be at least 1".into()));
    }
    let count = (m as u128 + 1) * (m as u128).checked_pow(k as u32 - 1).unwrap_or(u128::MAX);
    if count > MAX_STEMS as u128 {
        return Err(Error::Guard { what: "stem count", size: count, limit: MAX_STEMS as u128 });
    }
    Ok(count as usize)
}

/// Lexicographic index of a vertex given by its child-index path.
pub fn stem_index(m: usize, path: &[usize]) -> Result<usize> {
    let Some((&first, rest)) = path.split_first() else {
        return Err(Error::InvalidRelation("the root is not a stem".into()));
    };
    if first > m {
        return Err(Error::InvalidRelation(format!("root child index {first} exceeds {m}")));
    }
    let mut idx = first;
    for &c in rest {
        if c >= m {
            return Err(Error::InvalidRelation(format!("child index {c} must be below {m}")));
        }
        idx = idx * m + c;
    }
    Ok(idx)
}

/// Inverse of [`stem_index`].
pub fn stem_path(m: usize, k: usize, mut idx: usize) -> Vec<usize> {
    let mut path = vec![0; k];
    for slot in path.iter_mut().skip(1).rev() {
        *slot = idx % m;
        idx /= m;
    }
    path[0] = idx;
    path
}

/// Index of the depth-`to` ancestor of the depth-`from` vertex `idx`.
pub fn ancestor_index(m: usize, idx: usize, from: usize, to: usize) -> usize {
    debug_assert!(to >= 1 && to <= from);
    idx / m.pow((from - to) as u32)
}

/// Partition of the depth-`k` stems in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OpenRelation {
    m: usize,
    depth: usize,
    classes: Vec<u32>,
    class_count: usize,
}

impl OpenRelation {
    pub fn new(m: usize, depth: usize, classes: Vec<u32>) -> Result<Self> {
        let expected = checked_stem_count(m, depth)?;
        if classes.len() != expected {
            return Err(Error::Dimension { expected, got: classes.len() });
        }
        Ok(Self::canonical(m, depth, classes))
    }

    /// Renumbers class ids by first occurrence.
    fn canonical(m: usize, depth: usize, raw: Vec<u32>) -> Self {
        let mut remap = std::collections::HashMap::new();
        let classes: Vec<u32> = raw
            .into_iter()
            .map(|c| {
                let next = remap.len() as u32;
                *remap.entry(c).or_insert(next)
            })
            .collect();
        OpenRelation { m, depth, classes, class_count: remap.len() }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Class id of every stem, in stem order.
    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn class_of(&self, stem: usize) -> u32 {
        self.classes[stem]
    }

    /// The same relation described at a deeper stem depth.
    pub fn refine(&self, depth: usize) -> Result<OpenRelation> {
        if depth < self.depth {
            return Err(Error::domain(format!("cannot refine depth {} to {depth}", self.depth)));
        }
        let count = checked_stem_count(self.m, depth)?;
        let classes =
            (0..count).map(|s| self.classes[ancestor_index(self.m, s, depth, self.depth)]).collect();
        Ok(OpenRelation { m: self.m, depth, classes, class_count: self.class_count })
    }

    /// Members of each class as stem indices.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.class_count];
        for (stem, &c) in self.classes.iter().enumerate() {
            groups[c as usize].push(stem);
        }
        groups
    }
}

/// A boundary condition on the rays of the tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RayRelation {
    /// Every class is a single ray.
    Free,
    Open(OpenRelation),
}

impl RayRelation {
    pub fn free() -> Self {
        RayRelation::Free
    }

    /// All rays equivalent.
    pub fn wired(m: usize) -> Self {
        let count = stem_count(m, 1);
        RayRelation::Open(OpenRelation { m, depth: 1, classes: vec![0; count], class_count: 1 })
    }

    pub fn open(m: usize, depth: usize, classes: Vec<u32>) -> Result<Self> {
        OpenRelation::new(m, depth, classes).map(RayRelation::Open)
    }

    /// Open relation from explicit groups of stems, each stem a child-index
    /// path of length `depth`. Every stem must appear exactly once.
    pub fn from_groups(m: usize, depth: usize, groups: &[Vec<Vec<usize>>]) -> Result<Self> {
        let count = checked_stem_count(m, depth)?;
        let mut classes = vec![u32::MAX; count];
        for (c, group) in groups.iter().enumerate() {
            for stem in group {
                if stem.len() != depth {
                    return Err(Error::InvalidRelation(format!("stem {stem:?} does not have depth {depth}")));
                }
                let idx = stem_index(m, stem)?;
                if classes[idx] != u32::MAX {
                    return Err(Error::InvalidRelation(format!("stem {stem:?} listed twice")));
                }
                classes[idx] = c as u32;
            }
        }
        if let Some(missing) = classes.iter().position(|&c| c == u32::MAX) {
            return Err(Error::InvalidRelation(format!(
                "stem {:?} belongs to no class",
                stem_path(m, depth, missing)
            )));
        }
        Self::open(m, depth, classes)
    }

    /// The relation whose classes are the ray sets through each member of the
    /// cutset `vertices` (child-index paths; the empty path is the root).
    pub fn cutset(m: usize, vertices: &[Vec<usize>]) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidRelation("empty vertex set is not a cutset".into()));
        }
        for (i, a) in vertices.iter().enumerate() {
            for b in &vertices[i + 1..] {
                let n = a.len().min(b.len());
                if a[..n] == b[..n] {
                    return Err(Error::InvalidRelation(format!("{a:?} and {b:?} are comparable")));
                }
            }
        }
        let depth = vertices.iter().map(Vec::len).max().unwrap_or(0).max(1);
        let count = checked_stem_count(m, depth)?;
        let mut classes = vec![u32::MAX; count];
        for (c, w) in vertices.iter().enumerate() {
            if w.is_empty() {
                classes.fill(c as u32);
                continue;
            }
            let idx = stem_index(m, w)?;
            let span = m.pow((depth - w.len()) as u32);
            classes[idx * span..(idx + 1) * span].fill(c as u32);
        }
        if let Some(missing) = classes.iter().position(|&c| c == u32::MAX) {
            return Err(Error::InvalidRelation(format!(
                "ray through {:?} meets no member: not a cutset",
                stem_path(m, depth, missing)
            )));
        }
        Self::open(m, depth, classes)
    }

    pub fn is_free(&self) -> bool {
        matches!(self, RayRelation::Free)
    }

    pub fn as_open(&self) -> Option<&OpenRelation> {
        match self {
            RayRelation::Free => None,
            RayRelation::Open(o) => Some(o),
        }
    }

    /// Stem depth of an open relation, 0 for the free one.
    pub fn depth(&self) -> usize {
        self.as_open().map_or(0, OpenRelation::depth)
    }

    /// `self ≤ other`: every class of `self` lies inside a class of `other`.
    pub fn leq(&self, other: &RayRelation) -> Result<bool> {
        match (self, other) {
            (RayRelation::Free, _) => Ok(true),
            (RayRelation::Open(_), RayRelation::Free) => Ok(false),
            (RayRelation::Open(a), RayRelation::Open(b)) => {
                if a.m != b.m {
                    return Err(Error::InvalidRelation(format!("relations on m = {} and m = {}", a.m, b.m)));
                }
                let depth = a.depth.max(b.depth);
                let (a, b) = (a.refine(depth)?, b.refine(depth)?);
                let mut image = vec![u32::MAX; a.class_count];
                for (&ca, &cb) in a.classes.iter().zip(&b.classes) {
                    let slot = &mut image[ca as usize];
                    if *slot == u32::MAX {
                        *slot = cb;
                    } else if *slot != cb {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }

    /// Class id of each boundary vertex of the depth-`n` box.
    ///
    /// Open relations need `n ≥ k`; the free relation maps every boundary
    /// vertex to its own class.
    pub fn boundary_identification(&self, n: usize, m: usize) -> Result<Vec<u32>> {
        let count = checked_stem_count(m, n)?;
        match self {
            RayRelation::Free => Ok((0..count as u32).collect()),
            RayRelation::Open(o) => {
                if o.m != m {
                    return Err(Error::InvalidRelation(format!("relation on m = {} used with m = {m}", o.m)));
                }
                if n < o.depth {
                    return Err(Error::domain(format!("box depth {n} below relation depth {}", o.depth)));
                }
                Ok((0..count).map(|v| o.classes[ancestor_index(m, v, n, o.depth)]).collect())
            }
        }
    }

    /// The coarsening `≈` seen from the depth-`n` box: depth-`n` cones are
    /// merged (transitively) whenever they hold equivalent rays.
    pub fn coarsen_to_box(&self, n: usize) -> Result<RayRelation> {
        let RayRelation::Open(o) = self else {
            return Err(Error::InvalidRelation("coarsening is undefined for the free relation".into()));
        };
        if n == 0 {
            return Err(Error::domain("box depth must be at least 1"));
        }
        if n >= o.depth {
            return Ok(self.clone());
        }
        let cones = checked_stem_count(o.m, n)?;
        let mut uf = UnionFind::new(cones);
        let mut first = vec![usize::MAX; o.class_count];
        for (stem, &c) in o.classes.iter().enumerate() {
            let cone = ancestor_index(o.m, stem, o.depth, n);
            match first[c as usize] {
                usize::MAX => first[c as usize] = cone,
                seen => {
                    uf.union(seen, cone);
                }
            }
        }
        let classes = (0..cones).map(|v| uf.find(v) as u32).collect();
        RayRelation::open(o.m, n, classes)
    }

    /// Whether depth-`k` vertices `x` and `y` carry equivalent rays (`x ∼_k y`).
    pub fn same_class_at(&self, m: usize, k: usize, x: usize, y: usize) -> Result<bool> {
        if x == y {
            return Ok(true);
        }
        match self {
            RayRelation::Free => Ok(false),
            RayRelation::Open(_) => {
                let ids = self.coarsen_to_box(k)?.boundary_identification(k, m)?;
                Ok(ids[x] == ids[y])
            }
        }
    }
}

/// JSON description of a relation; `m` comes from context where omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RelationSpec {
    Wired,
    Free,
    Open { m: usize, k: usize, classes: Vec<Vec<Vec<usize>>> },
    Cutset { vertices: Vec<Vec<usize>> },
}

impl RelationSpec {
    pub fn resolve(&self, m: usize) -> Result<RayRelation> {
        match self {
            RelationSpec::Wired => Ok(RayRelation::wired(m)),
            RelationSpec::Free => Ok(RayRelation::Free),
            RelationSpec::Open { m: own, k, classes } => {
                if *own != m {
                    return Err(Error::InvalidRelation(format!("relation declares m = {own}, context m = {m}")));
                }
                RayRelation::from_groups(m, *k, classes)
            }
            RelationSpec::Cutset { vertices } => RayRelation::cutset(m, vertices),
        }
    }

    /// Accepts `wired`, `free`, or a JSON object.
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "wired" => Ok(RelationSpec::Wired),
            "free" => Ok(RelationSpec::Free),
            json => serde_json::from_str(json).map_err(|e| Error::InvalidRelation(format!("bad relation JSON: {e}"))),
        }
    }
}

impl From<&RayRelation> for RelationSpec {
    fn from(rel: &RayRelation) -> Self {
        match rel {
            RayRelation::Free => RelationSpec::Free,
            RayRelation::Open(o) => RelationSpec::Open {
                m: o.m,
                k: o.depth,
                classes: o.groups().into_iter().map(|g| g.into_iter().map(|s| stem_path(o.m, o.depth, s)).collect()).collect(),
            },
        }
    }
}
