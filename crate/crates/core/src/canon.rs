//! Canonical encodings of rooted colored graphs up to root- and color-preserving
//! isomorphism, and distributions over those classes.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::shape::BallShape;
use std::collections::{BTreeMap, VecDeque};

/// Connected simple graph with a designated root and a color per vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedColoredGraph {
    pub adj: Vec<Vec<usize>>,
    pub colors: Vec<u8>,
    pub root: usize,
}

impl RootedColoredGraph {
    pub fn new(n: usize, edges: &[(usize, usize)], colors: Vec<u8>, root: usize) -> Result<Self> {
        if colors.len() != n || root >= n {
            return Err(Error::Graph("color vector or root out of range".into()));
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n || u == v || adj[u].contains(&v) {
                return Err(Error::Graph(format!("bad edge {u}-{v}")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        Ok(Self { adj, colors, root })
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Distances from the root; `None` for unreachable vertices.
    pub fn distances(&self) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.len()];
        dist[self.root] = Some(0);
        let mut q = VecDeque::from([self.root]);
        while let Some(u) = q.pop_front() {
            for &v in &self.adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(dist[u].unwrap() + 1);
                    q.push_back(v);
                }
            }
        }
        dist
    }
}

/// Canonical code of an unlabeled rooted colored graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalBallClass {
    code: String,
}

impl CanonicalBallClass {
    pub fn from_code(code: impl Into<String>) -> Self {
        Self { code: code.into() }
    }
    pub fn code(&self) -> &str {
        &self.code
    }
    pub fn is_tree(&self) -> bool {
        self.code.starts_with("T:")
    }
}

impl std::fmt::Display for CanonicalBallClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.code)
    }
}

/// Canonical form of a connected rooted colored graph whose radius is at most `r`.
pub fn canonicalize(g: &RootedColoredGraph, r: usize) -> Result<CanonicalBallClass> {
    let dist = g.distances();
    let mut radius = 0;
    for d in &dist {
        match d {
            None => return Err(Error::Graph("disconnected graph".into())),
            Some(x) => radius = radius.max(*x),
        }
    }
    if radius > r {
        return Err(Error::Radius { found: radius, limit: r });
    }
    if g.edge_count() + 1 == g.len() {
        Ok(CanonicalBallClass { code: format!("T:{}", tree_code_adj(&g.adj, &g.colors, g.root, usize::MAX)) })
    } else {
        Ok(CanonicalBallClass { code: cyclic_code(g) })
    }
}

/// Sorted-children code of the tree hanging at `v` away from `from`.
fn tree_code_adj(adj: &[Vec<usize>], colors: &[u8], v: usize, from: usize) -> String {
    let mut kids: Vec<String> =
        adj[v].iter().filter(|&&u| u != from).map(|&u| tree_code_adj(adj, colors, u, v)).collect();
    kids.sort();
    format!("{}[{}]", colors[v], kids.concat())
}

/// Sorted-children code of the subtree of a shape below `v`.
pub fn shape_subtree_code(shape: &BallShape, colors: &[u8], v: usize) -> String {
    let mut kids: Vec<String> = shape.children(v).iter().map(|&c| shape_subtree_code(shape, colors, c)).collect();
    kids.sort();
    format!("{}[{}]", colors[v], kids.concat())
}

/// Class of a colored ball given in the shape's vertex order (trees only).
pub fn ball_class(shape: &BallShape, colors: &[u8]) -> CanonicalBallClass {
    CanonicalBallClass { code: format!("T:{}", shape_subtree_code(shape, colors, 0)) }
}

/// Minimum over breadth-first orderings of (colors, sorted relabeled edges).
fn cyclic_code(g: &RootedColoredGraph) -> String {
    struct Search<'a> {
        g: &'a RootedColoredGraph,
        order: Vec<usize>,
        placed: Vec<bool>,
        best: Option<(Vec<u8>, Vec<(usize, usize)>)>,
    }
    impl Search<'_> {
        fn key(&self) -> (Vec<u8>, Vec<(usize, usize)>) {
            let n = self.order.len();
            let mut pos = vec![0; n];
            for (i, &v) in self.order.iter().enumerate() {
                pos[v] = i;
            }
            let colors = self.order.iter().map(|&v| self.g.colors[v]).collect();
            let mut edges = Vec::new();
            for u in 0..n {
                for &v in &self.g.adj[u] {
                    if pos[u] < pos[v] {
                        edges.push((pos[u], pos[v]));
                    }
                }
            }
            edges.sort_unstable();
            (colors, edges)
        }
        fn prefix_worse(&self) -> bool {
            match &self.best {
                None => false,
                Some((bc, _)) => {
                    let cur: Vec<u8> = self.order.iter().map(|&v| self.g.colors[v]).collect();
                    cur.as_slice() > &bc[..cur.len()]
                }
            }
        }
        fn run(&mut self, head: usize) {
            if self.prefix_worse() {
                return;
            }
            if head == self.order.len() {
                if self.order.len() == self.g.len() {
                    let k = self.key();
                    if self.best.as_ref().is_none_or(|b| k < *b) {
                        self.best = Some(k);
                    }
                }
                return;
            }
            let u = self.order[head];
            let fresh: Vec<usize> = self.g.adj[u].iter().copied().filter(|&v| !self.placed[v]).collect();
            let mut perm = fresh.clone();
            perm.sort_by_key(|&v| self.g.colors[v]);
            self.permute(head, &mut perm, 0);
        }
        fn permute(&mut self, head: usize, perm: &mut Vec<usize>, k: usize) {
            if k == perm.len() {
                let before = self.order.len();
                for &v in perm.iter() {
                    self.order.push(v);
                    self.placed[v] = true;
                }
                self.run(head + 1);
                for &v in perm.iter() {
                    self.placed[v] = false;
                }
                self.order.truncate(before);
                return;
            }
            for i in k..perm.len() {
                perm.swap(k, i);
                self.permute(head, perm, k + 1);
                perm.swap(k, i);
            }
        }
    }
    let mut placed = vec![false; g.len()];
    placed[g.root] = true;
    let mut s = Search { g, order: vec![g.root], placed, best: None };
    s.run(0);
    let (colors, edges) = s.best.expect("connected graph has an ordering");
    let cs: Vec<String> = colors.iter().map(|c| c.to_string()).collect();
    let es: Vec<String> = edges.iter().map(|(a, b)| format!("{a}-{b}")).collect();
    format!("G:{}:{}:{}", colors.len(), cs.join(","), es.join(","))
}

/// Probability distribution over canonical classes of a fixed radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution<T: Real = f64> {
    pub radius: usize,
    pub alphabet_size: usize,
    pub probs: BTreeMap<CanonicalBallClass, T>,
}

impl<T: Real> ClassDistribution<T> {
    pub fn new(radius: usize, alphabet_size: usize) -> Self {
        Self { radius, alphabet_size, probs: BTreeMap::new() }
    }

    pub fn add(&mut self, class: CanonicalBallClass, p: T) {
        *self.probs.entry(class).or_insert_with(T::zero) += p;
    }

    pub fn total(&self) -> T {
        self.probs.values().copied().sum()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, c: &CanonicalBallClass) -> T {
        self.probs.get(c).copied().unwrap_or_else(T::zero)
    }
}

/// `1/2 * sum |a - b|` over the union of supports.
pub fn tv_distance<T: Real>(a: &ClassDistribution<T>, b: &ClassDistribution<T>) -> Result<T> {
    if a.radius != b.radius || a.alphabet_size != b.alphabet_size {
        return Err(Error::ShapeMismatch(format!(
            "class distributions differ: radius {} vs {}, alphabet {} vs {}",
            a.radius, b.radius, a.alphabet_size, b.alphabet_size
        )));
    }
    let mut s = T::zero();
    for (c, &p) in &a.probs {
        s += (p - b.get(c)).abs();
    }
    for (c, &q) in &b.probs {
        if !a.probs.contains_key(c) {
            s += q;
        }
    }
    Ok(s / T::lit(2.0))
}

impl<T: Real> crate::law::LocalLaw<T> {
    /// Push-forward of a ball law onto unlabeled rooted classes.
    pub fn class_distribution(&self) -> ClassDistribution<T> {
        let mut out = ClassDistribution::new(self.r(), self.alphabet().len());
        for (c, p) in self.atoms() {
            out.add(ball_class(self.shape(), &c), p);
        }
        out
    }
}
