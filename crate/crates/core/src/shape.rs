//! Labeled neighborhoods of the root in the d-regular tree.
//!
//! A vertex is named by its path from the root: the root is `[]`, its
//! children are `[1]..[d]`, and every other vertex `P` has children
//! `P+[1]..P+[d-1]`. Vertices are stored in breadth-first order.

use crate::error::{Error, Result};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    /// `S_r`, the ball of radius `r` around the root (`r = 0` is the root alone).
    Ball,
    /// `E_r`, the vertices within distance `r-1` of the root edge `{o, 1}`.
    Edge,
}

impl ShapeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ShapeKind::Ball => "ball",
            ShapeKind::Edge => "edge",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BallShape {
    d: usize,
    r: usize,
    kind: ShapeKind,
    paths: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
}

impl PartialEq for BallShape {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.r == other.r && self.kind == other.kind
    }
}
impl Eq for BallShape {}

/// Number of vertices of `S_r` in the d-regular tree.
pub fn ball_size(d: usize, r: usize) -> usize {
    let mut total = 1;
    let mut layer = d;
    for _ in 0..r {
        total += layer;
        layer *= d - 1;
    }
    total
}

impl BallShape {
    pub fn ball(d: usize, r: usize) -> Result<Self> {
        Self::build(d, r, ShapeKind::Ball)
    }

    /// `E_r`; requires `r >= 1`.
    pub fn edge(d: usize, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::Shape("edge neighborhoods need r >= 1".into()));
        }
        Self::build(d, r, ShapeKind::Edge)
    }

    pub fn root(d: usize) -> Result<Self> {
        Self::build(d, 0, ShapeKind::Ball)
    }

    pub fn new(d: usize, r: usize, kind: ShapeKind) -> Result<Self> {
        match kind {
            ShapeKind::Ball => Self::ball(d, r),
            ShapeKind::Edge => Self::edge(d, r),
        }
    }

    fn build(d: usize, r: usize, kind: ShapeKind) -> Result<Self> {
        if d < 2 {
            return Err(Error::Shape(format!("degree {d} < 2")));
        }
        if d > 64 {
            return Err(Error::Shape(format!("degree {d} too large")));
        }
        if ball_size(d, r) > 1 << 16 {
            return Err(Error::Shape(format!("ball of radius {r} in degree {d} is too large")));
        }
        let keep = |p: &[u8]| -> bool {
            match kind {
                ShapeKind::Ball => p.len() <= r,
                ShapeKind::Edge => p.len() < r || (p.len() == r && p[0] == 1),
            }
        };
        let mut paths: Vec<Vec<u8>> = vec![Vec::new()];
        let mut parent = vec![None];
        let mut head = 0;
        while head < paths.len() {
            let p = paths[head].clone();
            if p.len() < r {
                let fan = if p.is_empty() { d } else { d - 1 };
                for c in 1..=fan {
                    let mut q = p.clone();
                    q.push(c as u8);
                    if keep(&q) {
                        paths.push(q);
                        parent.push(Some(head));
                    }
                }
            }
            head += 1;
        }
        let index = paths.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        let mut children = vec![Vec::new(); paths.len()];
        for (v, p) in parent.iter().enumerate() {
            if let Some(u) = p {
                children[*u].push(v);
            }
        }
        Ok(Self { d, r, kind, paths, index, parent, children })
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn r(&self) -> usize {
        self.r
    }
    pub fn kind(&self) -> ShapeKind {
        self.kind
    }
    pub fn len(&self) -> usize {
        self.paths.len()
    }
    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
    pub fn paths(&self) -> &[Vec<u8>] {
        &self.paths
    }
    pub fn path(&self, v: usize) -> &[u8] {
        &self.paths[v]
    }
    pub fn index_of(&self, path: &[u8]) -> Option<usize> {
        self.index.get(path).copied()
    }
    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }
    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }
    pub fn depth(&self, v: usize) -> usize {
        self.paths[v].len()
    }

    /// Edges as parent-child pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.len()).filter_map(|v| self.parent[v].map(|u| (u, v))).collect()
    }

    /// The edge neighborhood `E_r` sitting inside this ball (same radius).
    pub fn edge_part(&self) -> Result<BallShape> {
        BallShape::edge(self.d, self.r.max(1))
    }

    /// Positions of this shape's vertices inside `outer`, if it is a sub-shape.
    pub fn positions_in(&self, outer: &BallShape) -> Result<Vec<usize>> {
        if self.d != outer.d {
            return Err(Error::NotSubShape(format!("degree {} vs {}", self.d, outer.d)));
        }
        self.paths
            .iter()
            .map(|p| {
                outer.index_of(p).ok_or_else(|| {
                    Error::NotSubShape(format!(
                        "{} r={} is not inside {} r={}",
                        self.kind.as_str(),
                        self.r,
                        outer.kind.as_str(),
                        outer.r
                    ))
                })
            })
            .collect()
    }

    fn remap(&self, f: impl Fn(&[u8]) -> Vec<u8>) -> Vec<usize> {
        self.paths
            .iter()
            .map(|p| self.index_of(&f(p)).expect("path map stays inside the shape"))
            .collect()
    }

    /// Permutation exchanging the subtrees hanging at `u + [a]` and `u + [b]`.
    fn subtree_swap(&self, u: &[u8], a: u8, b: u8) -> Vec<usize> {
        let k = u.len();
        self.remap(|p| {
            let mut q = p.to_vec();
            if p.len() > k && &p[..k] == u {
                if p[k] == a {
                    q[k] = b;
                } else if p[k] == b {
                    q[k] = a;
                }
            }
            q
        })
    }

    /// Generators of the automorphism group: all of `Aut(S_r)` fixing the root for
    /// balls; for edge shapes, the automorphisms fixing the oriented root edge.
    pub fn automorphism_generators(&self) -> Vec<Vec<usize>> {
        let mut gens = Vec::new();
        for v in 0..self.len() {
            let kids: Vec<u8> = self.children[v]
                .iter()
                .map(|&c| *self.paths[c].last().unwrap())
                .filter(|&lab| !(self.kind == ShapeKind::Edge && v == 0 && lab == 1))
                .collect();
            for w in kids.windows(2) {
                gens.push(self.subtree_swap(&self.paths[v], w[0], w[1]));
            }
        }
        gens
    }

    /// The flip exchanging the two sides of the root edge; only for edge shapes.
    pub fn edge_flip(&self) -> Option<Vec<usize>> {
        if self.kind != ShapeKind::Edge {
            return None;
        }
        Some(self.remap(flip_path))
    }

    /// Generators of the full symmetry group used by `symmetrize`.
    pub fn symmetry_generators(&self) -> Vec<Vec<usize>> {
        let mut g = self.automorphism_generators();
        if let Some(f) = self.edge_flip() {
            g.push(f);
        }
        g
    }
}

/// Image of a path under the root-edge flip `o <-> 1`.
pub fn flip_path(p: &[u8]) -> Vec<u8> {
    if p.is_empty() {
        return vec![1];
    }
    if p[0] == 1 {
        if p.len() == 1 {
            return Vec::new();
        }
        let mut q = vec![p[1] + 1];
        q.extend_from_slice(&p[2..]);
        q
    } else {
        let mut q = vec![1, p[0] - 1];
        q.extend_from_slice(&p[1..]);
        q
    }
}

/// Mixed-radix coder between colorings and table indices. The first vertex is the
/// most significant digit, so index order is lexicographic order of colorings.
#[derive(Debug, Clone)]
pub struct Coder {
    m: u64,
    len: usize,
    size: u64,
}

impl Coder {
    pub fn new(m: usize, len: usize) -> Result<Self> {
        let mut size: u64 = 1;
        for _ in 0..len {
            size = size
                .checked_mul(m as u64)
                .ok_or_else(|| Error::Cap(format!("{m}^{len} colorings overflow 64-bit indices")))?;
        }
        Ok(Self { m: m as u64, len, size })
    }
    pub fn size(&self) -> u64 {
        self.size
    }
    pub fn len(&self) -> usize {
        self.len
    }
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
    pub fn m(&self) -> usize {
        self.m as usize
    }
    pub fn encode(&self, colors: &[u8]) -> u64 {
        debug_assert_eq!(colors.len(), self.len);
        colors.iter().fold(0u64, |acc, &c| acc * self.m + c as u64)
    }
    pub fn decode_into(&self, mut idx: u64, out: &mut [u8]) {
        for slot in out.iter_mut().rev() {
            *slot = (idx % self.m) as u8;
            idx /= self.m;
        }
    }
    pub fn decode(&self, idx: u64) -> Vec<u8> {
        let mut v = vec![0u8; self.len];
        self.decode_into(idx, &mut v);
        v
    }
}
