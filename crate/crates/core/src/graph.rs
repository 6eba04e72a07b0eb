//! Random graphs with a prescribed degree sequence, empirical ball statistics of
//! colorings, and exact or Monte Carlo counts of colorings whose statistics are
//! close to a target law.

use crate::canon::{canonicalize, CanonicalBallClass, ClassDistribution, RootedColoredGraph};
use crate::error::{Error, Result};
use crate::law::LocalLaw;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap, VecDeque};

/// Largest number of colorings enumerated exhaustively.
pub const EXHAUSTIVE_CAP: u64 = 1 << 24;
/// Default number of rejected pairings before the sampler gives up.
pub const DEFAULT_MAX_REJECTS: u64 = 1_000_000;
/// Slack added to `eps` in the membership test `TV <= eps`.
pub const TV_SLACK: f64 = 1e-12;

/// Independent generator for task `index` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Finite simple graph, optionally colored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColoredGraph {
    adj: Vec<Vec<usize>>,
    coloring: Option<Vec<u8>>,
}

impl ColoredGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Graph(format!("edge {u}-{v} out of range for n = {n}")));
            }
            if u == v {
                return Err(Error::Graph(format!("loop at {u}")));
            }
            if adj[u].contains(&v) {
                return Err(Error::Graph(format!("repeated edge {u}-{v}")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        Ok(Self { adj, coloring: None })
    }

    /// Complete graph on `n` vertices.
    pub fn complete(n: usize) -> Self {
        let edges: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        Self::new(n, &edges).expect("complete graph is simple")
    }

    /// Cycle on `n >= 3` vertices.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Graph("a cycle needs at least 3 vertices".into()));
        }
        let edges: Vec<(usize, usize)> = (0..n).map(|u| (u, (u + 1) % n)).collect();
        Self::new(n, &edges)
    }

    pub fn with_coloring(mut self, colors: Vec<u8>) -> Result<Self> {
        if colors.len() != self.n() {
            return Err(Error::Graph(format!("coloring has {} entries for {} vertices", colors.len(), self.n())));
        }
        self.coloring = Some(colors);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }
    pub fn coloring(&self) -> Option<&[u8]> {
        self.coloring.as_deref()
    }
    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }
    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> =
            (0..self.n()).flat_map(|u| self.adj[u].iter().filter(move |&&v| u < v).map(move |&v| (u, v))).collect();
        e.sort_unstable();
        e
    }

    /// Whether the graph is simple with the given degrees.
    pub fn check(&self, degrees: &[usize]) -> Result<()> {
        if self.degrees() != degrees {
            return Err(Error::Graph("degree sequence mismatch".into()));
        }
        for (u, a) in self.adj.iter().enumerate() {
            if a.contains(&u) || a.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Graph(format!("vertex {u} has a loop or repeated edge")));
            }
        }
        Ok(())
    }

    /// Vertices within distance `r` of `v` in breadth-first order, with distances.
    pub fn ball_vertices(&self, v: usize, r: usize) -> Vec<(usize, usize)> {
        let mut seen = HashMap::from([(v, 0usize)]);
        let mut out = vec![(v, 0)];
        let mut q = VecDeque::from([v]);
        while let Some(u) = q.pop_front() {
            let du = seen[&u];
            if du == r {
                continue;
            }
            for &w in &self.adj[u] {
                if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(w) {
                    e.insert(du + 1);
                    out.push((w, du + 1));
                    q.push_back(w);
                }
            }
        }
        out
    }

    /// Induced subgraph on the `r`-ball around `v`, rooted at `v`.
    pub fn rooted_ball(&self, v: usize, r: usize, colors: &[u8]) -> RootedColoredGraph {
        let verts = self.ball_vertices(v, r);
        let (edges, _) = self.ball_edges(&verts);
        let cols = verts.iter().map(|&(u, _)| colors[u]).collect();
        RootedColoredGraph::new(verts.len(), &edges, cols, 0).expect("ball of a simple graph is simple")
    }

    fn ball_edges(&self, verts: &[(usize, usize)]) -> (Vec<(usize, usize)>, HashMap<usize, usize>) {
        let local: HashMap<usize, usize> = verts.iter().enumerate().map(|(i, &(u, _))| (u, i)).collect();
        let mut edges = Vec::new();
        for (i, &(u, _)) in verts.iter().enumerate() {
            for w in &self.adj[u] {
                if let Some(&j) = local.get(w) {
                    if i < j {
                        edges.push((i, j));
                    }
                }
            }
        }
        (edges, local)
    }

    /// `u v` per line, 0-based, preceded by an `n=` header.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("n={}\n", self.n());
        for (u, v) in self.edges() {
            s.push_str(&format!("{u} {v}\n"));
        }
        s
    }

    /// Parse an edge list; without an `n=` header the vertex count is `max + 1`.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let (headers, body) = crate::io::split_lines(text)?;
        let mut edges = Vec::new();
        for (line, t) in body {
            let mut it = t.split_whitespace();
            let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::Parse { line, msg: "expected `u v`".into() });
            };
            let u: usize = a.parse().map_err(|_| Error::Parse { line, msg: format!("bad vertex {a:?}") })?;
            let v: usize = b.parse().map_err(|_| Error::Parse { line, msg: format!("bad vertex {b:?}") })?;
            edges.push((u, v));
        }
        let n = match headers.get("n") {
            Some(_) => headers.parse_usize("n")?,
            None => edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0),
        };
        Self::new(n, &edges)
    }
}

/// Erdos-Gallai test for a graphic degree sequence.
pub fn is_graphic(degrees: &[usize]) -> bool {
    let mut d = degrees.to_vec();
    d.sort_unstable_by(|a, b| b.cmp(a));
    if d.iter().sum::<usize>() % 2 == 1 {
        return false;
    }
    let n = d.len();
    let mut left = 0usize;
    for k in 1..=n {
        left += d[k - 1];
        let right: usize = k * (k - 1) + d[k..].iter().map(|&x| x.min(k)).sum::<usize>();
        if left > right {
            return false;
        }
    }
    true
}

/// Uniform simple graph with the given degrees: configuration-model pairing,
/// restarted whenever a loop or a repeated edge appears.
pub fn sample_graph<R: Rng + ?Sized>(degrees: &[usize], rng: &mut R, max_rejects: u64) -> Result<ColoredGraph> {
    let total: usize = degrees.iter().sum();
    if total % 2 == 1 {
        return Err(Error::Graph("degree sum is odd".into()));
    }
    if !is_graphic(degrees) {
        return Err(Error::Graph("degree sequence is not graphic".into()));
    }
    let n = degrees.len();
    let stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, degrees[v])).collect();
    let mut attempts = 0u64;
    'attempt: loop {
        if attempts > max_rejects {
            return Err(Error::Rejections { attempts });
        }
        let mut pool = stubs.clone();
        pool.shuffle(rng);
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for pair in pool.chunks_exact(2) {
            let (u, v) = (pair[0], pair[1]);
            if u == v || adj[u].contains(&v) {
                attempts += 1;
                continue 'attempt;
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        return Ok(ColoredGraph { adj, coloring: None });
    }
}

/// Uniform simple `d`-regular graph on `n` vertices.
pub fn sample_regular<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<ColoredGraph> {
    sample_graph(&vec![d; n], rng, DEFAULT_MAX_REJECTS)
}

/// Empirical distribution of rooted colored `r`-balls.
pub type BallStatistics = ClassDistribution<f64>;

/// `distr_G(f)_r`: average over vertices of the class of the induced `r`-ball.
pub fn local_statistics(g: &ColoredGraph, r: usize, alphabet_size: usize) -> Result<BallStatistics> {
    let colors = g.coloring().ok_or_else(|| Error::Graph("graph has no coloring".into()))?;
    let mut out = ClassDistribution::new(r, alphabet_size);
    let w = 1.0 / g.n() as f64;
    for v in 0..g.n() {
        out.add(canonicalize(&g.rooted_ball(v, r, colors), r)?, w);
    }
    Ok(out)
}

/// `-inf` or a finite log-count.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum LogValue {
    Empty,
    Finite(f64),
}

impl LogValue {
    pub fn from_ln(x: f64) -> Self {
        if x == f64::NEG_INFINITY {
            LogValue::Empty
        } else {
            LogValue::Finite(x)
        }
    }
    pub fn finite(&self) -> Option<f64> {
        match self {
            LogValue::Empty => None,
            LogValue::Finite(x) => Some(*x),
        }
    }
    /// Formats `-inf` for the empty value.
    pub fn render(&self) -> String {
        match self {
            LogValue::Empty => "-inf".into(),
            LogValue::Finite(x) => crate::entropy::fmt17(*x),
        }
    }
}

/// Interned ball classes with, for every vertex, the class of each coloring of its ball.
pub struct ColoringEnumerator {
    n: usize,
    m: usize,
    /// For each vertex `u`: `(v, m^pos)` for every ball of `v` containing `u` at position `pos`.
    touches: Vec<Vec<(usize, u64)>>,
    /// `tables[v][key]` is the class id of ball `v` under the coloring encoded by `key`.
    tables: Vec<Vec<u32>>,
    classes: Vec<CanonicalBallClass>,
}

/// Mutable enumeration state: coloring, per-ball keys and class counts.
#[derive(Clone)]
pub struct EnumState {
    pub colors: Vec<u8>,
    keys: Vec<u64>,
    pub counts: Vec<u32>,
}

impl ColoringEnumerator {
    /// Largest ball coloring table built per vertex.
    pub const BALL_CAP: u64 = 1 << 20;

    pub fn new(g: &ColoredGraph, r: usize, m: usize) -> Result<Self> {
        let n = g.n();
        let mut touches = vec![Vec::new(); n];
        let mut tables = Vec::with_capacity(n);
        let mut ids: HashMap<CanonicalBallClass, u32> = HashMap::new();
        let mut classes = Vec::new();
        for v in 0..n {
            let verts = g.ball_vertices(v, r);
            let size = (m as u64).checked_pow(verts.len() as u32).filter(|&s| s <= Self::BALL_CAP).ok_or_else(|| {
                Error::Cap(format!("ball of vertex {v} has {} vertices; too many colorings to tabulate", verts.len()))
            })?;
            let (edges, _) = g.ball_edges(&verts);
            let mut table = Vec::with_capacity(size as usize);
            let mut cols = vec![0u8; verts.len()];
            for key in 0..size {
                let mut k = key;
                for c in cols.iter_mut() {
                    *c = (k % m as u64) as u8;
                    k /= m as u64;
                }
                let rg = RootedColoredGraph::new(verts.len(), &edges, cols.clone(), 0)?;
                let class = canonicalize(&rg, r)?;
                let next = ids.len() as u32;
                let id = *ids.entry(class.clone()).or_insert_with(|| {
                    classes.push(class);
                    next
                });
                table.push(id);
            }
            let mut w = 1u64;
            for &(u, _) in &verts {
                touches[u].push((v, w));
                w *= m as u64;
            }
            tables.push(table);
        }
        Ok(Self { n, m, touches, tables, classes })
    }

    pub fn classes(&self) -> &[CanonicalBallClass] {
        &self.classes
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn total_colorings(&self) -> Option<u64> {
        (self.m as u64).checked_pow(self.n as u32)
    }

    pub fn state(&self, colors: Vec<u8>) -> EnumState {
        let mut keys = vec![0u64; self.n];
        for (u, t) in self.touches.iter().enumerate() {
            for &(v, w) in t {
                keys[v] += colors[u] as u64 * w;
            }
        }
        let mut counts = vec![0u32; self.classes.len()];
        for v in 0..self.n {
            counts[self.tables[v][keys[v] as usize] as usize] += 1;
        }
        EnumState { colors, keys, counts }
    }

    /// Recolor vertex `u`, updating keys and class counts.
    pub fn set(&self, s: &mut EnumState, u: usize, c: u8) {
        let old = s.colors[u];
        if old == c {
            return;
        }
        for &(v, w) in &self.touches[u] {
            let before = self.tables[v][s.keys[v] as usize];
            s.keys[v] = s.keys[v] + c as u64 * w - old as u64 * w;
            let after = self.tables[v][s.keys[v] as usize];
            s.counts[before as usize] -= 1;
            s.counts[after as usize] += 1;
        }
        s.colors[u] = c;
    }

    /// Visit every coloring exactly once, in reflected Gray-code order within
    /// blocks fixed by the leading vertices. Returns one accumulator per block,
    /// in block order.
    pub fn for_each<A: Send>(
        &self,
        init: impl Fn() -> A + Sync,
        visit: impl Fn(&mut A, &EnumState) + Sync,
    ) -> Result<Vec<A>> {
        let total = self.total_colorings().filter(|&t| t <= EXHAUSTIVE_CAP).ok_or_else(|| {
            Error::Cap(format!(
                "{}^{} colorings exceed the exhaustive cap 2^24; use the Monte Carlo estimate instead",
                self.m, self.n
            ))
        })?;
        let m = self.m as u64;
        let mut fixed = 0usize;
        while fixed < self.n && m.pow(fixed as u32 + 1) <= 64 && total / m.pow(fixed as u32 + 1) >= 256 {
            fixed += 1;
        }
        let blocks = m.pow(fixed as u32);
        let free = self.n - fixed;
        Ok((0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut colors = vec![0u8; self.n];
                let mut k = b;
                for c in colors[free..].iter_mut() {
                    *c = (k % m) as u8;
                    k /= m;
                }
                let mut st = self.state(colors);
                let mut acc = init();
                visit(&mut acc, &st);
                let mut dir = vec![1i8; free];
                loop {
                    let mut j = 0;
                    while j < free {
                        let nc = st.colors[j] as i64 + dir[j] as i64;
                        if nc >= 0 && nc < m as i64 {
                            break;
                        }
                        dir[j] = -dir[j];
                        j += 1;
                    }
                    if j == free {
                        break;
                    }
                    let nc = (st.colors[j] as i64 + dir[j] as i64) as u8;
                    self.set(&mut st, j, nc);
                    visit(&mut acc, &st);
                }
                acc
            })
            .collect())
    }
}

/// Total variation between the empirical class counts and a target.
#[derive(Debug, Clone)]
pub struct TvTarget {
    target: Vec<f64>,
    /// Target mass on classes never produced by this graph.
    missing: f64,
    n: f64,
}

impl TvTarget {
    pub fn new(e: &ColoringEnumerator, law: &ClassDistribution<f64>) -> Self {
        let mut target = vec![0.0; e.classes().len()];
        let index: HashMap<&CanonicalBallClass, usize> = e.classes().iter().enumerate().map(|(i, c)| (c, i)).collect();
        let mut missing = 0.0;
        for (c, &p) in &law.probs {
            match index.get(c) {
                Some(&i) => target[i] = p,
                None => missing += p,
            }
        }
        Self { target, missing, n: e.n() as f64 }
    }

    pub fn tv(&self, counts: &[u32]) -> f64 {
        let s: f64 = counts.iter().zip(&self.target).map(|(&c, &t)| (c as f64 / self.n - t).abs()).sum();
        0.5 * (s + self.missing)
    }
}

fn law_classes(law: &LocalLaw<f64>) -> Result<ClassDistribution<f64>> {
    law.ensure_valid()?;
    if law.kind() != crate::shape::ShapeKind::Ball {
        return Err(Error::InvalidLaw("target must be a ball law".into()));
    }
    Ok(law.class_distribution())
}

/// Exact count of colorings within each `eps` of the target.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroCount {
    pub eps: f64,
    pub count: u64,
    pub total: u64,
    /// `(1/n) ln count`.
    pub h: LogValue,
}

/// Exhaustive counts `|F_G(mu, r, eps)|` for several `eps` at once; `r` is the law radius.
pub fn count_microstates_multi(g: &ColoredGraph, law: &LocalLaw<f64>, eps: &[f64]) -> Result<Vec<MicroCount>> {
    let target = law_classes(law)?;
    let e = ColoringEnumerator::new(g, law.r(), law.alphabet().len())?;
    let tv = TvTarget::new(&e, &target);
    let blocks = e.for_each(
        || vec![0u64; eps.len()],
        |acc, st| {
            let d = tv.tv(&st.counts);
            for (a, &x) in acc.iter_mut().zip(eps) {
                if d <= x + TV_SLACK {
                    *a += 1;
                }
            }
        },
    )?;
    let total = e.total_colorings().unwrap_or(u64::MAX);
    let n = g.n() as f64;
    Ok(eps
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let count: u64 = blocks.iter().map(|b| b[i]).sum();
            let h = if count == 0 { LogValue::Empty } else { LogValue::Finite((count as f64).ln() / n) };
            MicroCount { eps: x, count, total, h }
        })
        .collect())
}

pub fn count_microstates(g: &ColoredGraph, law: &LocalLaw<f64>, eps: f64) -> Result<MicroCount> {
    Ok(count_microstates_multi(g, law, &[eps])?.remove(0))
}

pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Exhaustive `ln Z_G(beta) = ln sum_f exp(-n beta TV(distr_G(f), mu_r))`, one per beta.
pub fn log_z_exact(g: &ColoredGraph, law: &LocalLaw<f64>, betas: &[f64]) -> Result<Vec<f64>> {
    let target = law_classes(law)?;
    let e = ColoringEnumerator::new(g, law.r(), law.alphabet().len())?;
    let tv = TvTarget::new(&e, &target);
    let n = g.n() as f64;
    // histogram of TV values keeps the sum exact up to one rounding per distinct value
    let blocks = e.for_each(BTreeMap::<u64, u64>::new, |acc, st| {
        *acc.entry(tv.tv(&st.counts).to_bits()).or_default() += 1;
    })?;
    let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
    for b in blocks {
        for (k, c) in b {
            *hist.entry(k).or_default() += c;
        }
    }
    Ok(betas
        .iter()
        .map(|&beta| {
            if beta == 0.0 {
                return n * (e.m() as f64).ln();
            }
            hist.iter()
                .fold(f64::NEG_INFINITY, |acc, (&k, &c)| log_add(acc, (c as f64).ln() - n * beta * f64::from_bits(k)))
        })
        .collect())
}

/// The two inequalities relating `ln Z(beta)` and `ln |F(eps)|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub beta: f64,
    pub eps: f64,
    pub ln_z: f64,
    pub ln_f: LogValue,
    /// `ln Z >= ln F - n beta eps`.
    pub lower_ok: bool,
    /// `ln Z <= ln 2 + max(ln F, n (ln m - beta eps))`.
    pub upper_ok: bool,
}

pub fn bracket(ln_z: f64, ln_f: LogValue, n: usize, m: usize, beta: f64, eps: f64) -> Bracket {
    let n = n as f64;
    let lf = ln_f.finite().map(|h| h * n).unwrap_or(f64::NEG_INFINITY);
    let tol = 1e-9 * (1.0 + ln_z.abs());
    let lower_ok = ln_z >= lf - n * beta * eps - tol;
    let upper_ok = ln_z <= std::f64::consts::LN_2 + lf.max(n * ((m as f64).ln() - beta * eps)) + tol;
    Bracket { beta, eps, ln_z, ln_f, lower_ok, upper_ok }
}

/// Monte Carlo estimate of `(1/n) ln Z_G(beta_max)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZEstimate {
    pub beta: f64,
    pub value: f64,
    pub stderr: f64,
    /// Smallest effective sample size over the stages.
    pub min_ess: f64,
    /// Set when some stage mixes poorly.
    pub flagged: bool,
    /// Implied bounds on `(1/n) ln |F(eps)|`: always an upper bound, a lower bound
    /// when `ln Z` exceeds `ln 2 + n (ln m - beta eps)`.
    pub f_lower: LogValue,
    pub f_upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcSettings {
    pub schedule: Vec<f64>,
    pub burn_in: usize,
    pub sweeps: usize,
    pub batches: usize,
    pub min_ess: f64,
}

impl McmcSettings {
    /// Equally spaced schedule from 0 to `beta_max` with `n * step <= 1`.
    pub fn for_beta(beta_max: f64, n: usize) -> Self {
        let stages = ((beta_max * n as f64).ceil() as usize).max(1);
        let schedule = (0..=stages).map(|k| beta_max * k as f64 / stages as f64).collect();
        Self { schedule, burn_in: 200, sweeps: 4000, batches: 20, min_ess: 100.0 }
    }
}

/// Result of a stepping-stone run.
#[derive(Debug, Clone, PartialEq)]
pub struct SteppingStone {
    pub ln_z: f64,
    /// Standard error of `ln_z`.
    pub stderr: f64,
    pub min_ess: f64,
}

/// Stepping-stone estimate of `ln sum_f exp(b_K score(f))`:
/// `n ln m + sum_k ln E_{b_k}[exp((b_{k+1} - b_k) score)]`, each expectation from a
/// Metropolis chain at `b_k` with its own random stream.
pub fn stepping_stone(
    e: &ColoringEnumerator,
    score: impl Fn(&EnumState) -> f64 + Sync,
    settings: &McmcSettings,
    seed: u64,
) -> Result<SteppingStone> {
    let sched = &settings.schedule;
    if sched.first() != Some(&0.0) || sched.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("schedule must start at 0 and increase".into()));
    }
    if settings.batches < 2 || settings.sweeps < settings.batches {
        return Err(Error::Domain("need at least two batches and one sweep per batch".into()));
    }
    let n = e.n();
    let m = e.m();
    let stages: Vec<(f64, f64, f64)> = (0..sched.len() - 1)
        .into_par_iter()
        .map(|k| {
            let beta = sched[k];
            let step = sched[k + 1] - beta;
            let mut rng = stream_rng(seed, k as u64);
            let colors: Vec<u8> = (0..n).map(|_| rng.random_range(0..m) as u8).collect();
            let mut st = e.state(colors);
            let mut cur = score(&st);
            let mut samples = Vec::with_capacity(settings.sweeps);
            for sweep in 0..settings.burn_in + settings.sweeps {
                for _ in 0..n {
                    if m < 2 {
                        break;
                    }
                    let u = rng.random_range(0..n);
                    let old = st.colors[u];
                    let mut c = rng.random_range(0..m - 1) as u8;
                    if c >= old {
                        c += 1;
                    }
                    e.set(&mut st, u, c);
                    let new = score(&st);
                    let accept = new >= cur || rng.random::<f64>() < (beta * (new - cur)).exp();
                    if accept {
                        cur = new;
                    } else {
                        e.set(&mut st, u, old);
                    }
                }
                if sweep >= settings.burn_in {
                    samples.push(cur);
                }
            }
            let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = samples.iter().map(|&t| (step * (t - hi)).exp()).collect();
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (w.len() - 1).max(1) as f64;
            let per = w.len() / settings.batches;
            let bm: Vec<f64> =
                (0..settings.batches).map(|b| w[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64).collect();
            let bmean = bm.iter().sum::<f64>() / bm.len() as f64;
            let bvar = bm.iter().map(|x| (x - bmean).powi(2)).sum::<f64>() / (bm.len() - 1) as f64;
            let se_mean = (bvar / bm.len() as f64).sqrt();
            let ess = if bvar > 0.0 { (var / (bvar * per as f64)) * w.len() as f64 } else { w.len() as f64 };
            (mean.ln() + step * hi, se_mean / mean, ess.min(w.len() as f64))
        })
        .collect();
    let ln_z = n as f64 * (m as f64).ln() + stages.iter().map(|s| s.0).sum::<f64>();
    let stderr = stages.iter().map(|s| s.1 * s.1).sum::<f64>().sqrt();
    let min_ess = stages.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
    Ok(SteppingStone { ln_z, stderr, min_ess: if min_ess.is_finite() { min_ess } else { 0.0 } })
}

/// Monte Carlo estimate of `(1/n) ln Z_G(beta)` with `Z_G(beta) = sum_f exp(-n beta TV)`.
pub fn estimate_microstates(
    g: &ColoredGraph,
    law: &LocalLaw<f64>,
    eps: f64,
    settings: &McmcSettings,
    seed: u64,
) -> Result<ZEstimate> {
    let target = law_classes(law)?;
    let e = ColoringEnumerator::new(g, law.r(), law.alphabet().len())?;
    let tv = TvTarget::new(&e, &target);
    let nf = g.n() as f64;
    let m = e.m();
    let ss = stepping_stone(&e, |st| -nf * tv.tv(&st.counts), settings, seed)?;
    let ln_z = ss.ln_z;
    let beta = *settings.schedule.last().unwrap();
    let floor = std::f64::consts::LN_2 + nf * ((m as f64).ln() - beta * eps);
    let f_lower = if ln_z > floor { LogValue::Finite((ln_z - std::f64::consts::LN_2) / nf) } else { LogValue::Empty };
    Ok(ZEstimate {
        beta,
        value: ln_z / nf,
        stderr: ss.stderr / nf,
        min_ess: ss.min_ess,
        flagged: ss.min_ess < settings.min_ess,
        f_lower,
        f_upper: ln_z / nf + beta * eps,
    })
}

/// Largest `h` with empirical `P(H >= h) >= alpha`.
pub fn quantile(values: &[LogValue], alpha: f64) -> Result<LogValue> {
    if values.is_empty() || !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain("quantile needs values and alpha in (0, 1]".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.partial_cmp(a).expect("log values are ordered"));
    let k = ((alpha * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Ok(v[k - 1])
}

/// Graph sample specification: a fixed degree sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphModel {
    pub degrees: Vec<usize>,
    pub max_rejects: u64,
}

impl GraphModel {
    pub fn regular(n: usize, d: usize) -> Self {
        Self { degrees: vec![d; n], max_rejects: DEFAULT_MAX_REJECTS }
    }
    pub fn n(&self) -> usize {
        self.degrees.len()
    }
    /// Graph number `index` of a run seeded with `seed`.
    pub fn sample(&self, seed: u64, index: u64) -> Result<ColoredGraph> {
        sample_graph(&self.degrees, &mut stream_rng(seed, index), self.max_rejects)
    }
}

/// Per-graph micro-state entropies and their quantile.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroStateEstimate {
    pub n: usize,
    pub r: usize,
    pub eps: f64,
    pub alpha: f64,
    pub seed: u64,
    pub counts: Vec<u64>,
    pub values: Vec<LogValue>,
    pub h: LogValue,
}

impl MicroStateEstimate {
    pub fn quantile(&self, alpha: f64) -> Result<LogValue> {
        quantile(&self.values, alpha)
    }
}

/// Exhaustive `H_G` over `graphs` sampled graphs; `h_n` is the `alpha` quantile.
pub fn estimate_hn(
    law: &LocalLaw<f64>,
    eps: f64,
    model: &GraphModel,
    graphs: usize,
    alpha: f64,
    seed: u64,
) -> Result<MicroStateEstimate> {
    let results: Vec<Result<MicroCount>> = (0..graphs)
        .into_par_iter()
        .map(|i| count_microstates(&model.sample(seed, i as u64)?, law, eps))
        .collect();
    let mut counts = Vec::with_capacity(graphs);
    let mut values = Vec::with_capacity(graphs);
    for r in results {
        let c = r?;
        counts.push(c.count);
        values.push(c.h);
    }
    let h = quantile(&values, alpha)?;
    Ok(MicroStateEstimate { n: model.n(), r: law.r(), eps, alpha, seed, counts, values, h })
}

/// `(1/n) ln` of the mean count over graphs, with a percentile bootstrap interval.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealedEstimate {
    pub value: LogValue,
    pub ci_low: LogValue,
    pub ci_high: LogValue,
    pub counts: Vec<u64>,
    /// Set when the mean count is zero.
    pub flagged: bool,
}

pub fn estimate_sigma_n(
    law: &LocalLaw<f64>,
    eps: f64,
    model: &GraphModel,
    graphs: usize,
    seed: u64,
) -> Result<AnnealedEstimate> {
    let est = estimate_hn(law, eps, model, graphs, 0.5, seed)?;
    Ok(annealed_from_counts(&est.counts, model.n(), seed))
}

pub fn annealed_from_counts(counts: &[u64], n: usize, seed: u64) -> AnnealedEstimate {
    let nf = n as f64;
    let to_log = |mean: f64| if mean > 0.0 { LogValue::Finite(mean.ln() / nf) } else { LogValue::Empty };
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / counts.len().max(1) as f64;
    let mut rng = stream_rng(seed, u64::MAX);
    let mut boots: Vec<f64> = (0..1000)
        .map(|_| {
            (0..counts.len()).map(|_| counts[rng.random_range(0..counts.len())] as f64).sum::<f64>()
                / counts.len() as f64
        })
        .collect();
    boots.sort_by(f64::total_cmp);
    let (lo, hi) = if boots.is_empty() { (0.0, 0.0) } else { (boots[25], boots[974]) };
    AnnealedEstimate {
        value: to_log(mean),
        ci_low: to_log(lo),
        ci_high: to_log(hi),
        counts: counts.to_vec(),
        flagged: mean == 0.0,
    }
}

/// Sorted edge list, usable as a key for labeled graphs.
pub fn labeled_key(g: &ColoredGraph) -> Vec<(usize, usize)> {
    g.edges()
}
