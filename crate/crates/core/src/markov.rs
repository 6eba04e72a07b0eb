//! r-Markov and vertex-Markov processes on the d-regular tree, built from a
//! defining marginal, with exact extension to larger balls and sampling.

use crate::entropy::{sigma_e, sigma_r_value};
use crate::error::{Error, Result};
use crate::law::LocalLaw;
use crate::scalar::Real;
use crate::shape::{BallShape, Coder, ShapeKind};
use crate::table::Table;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// Largest table `extend_marginal` will build.
pub const EXTEND_CAP: u64 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkovKind {
    /// Defined by a law on `S_r`; the two sides of an edge are independent given `E_r`.
    RMarkov(usize),
    /// Defined by a law on `E_1`; pending subtrees are independent given a vertex color.
    VertexMarkov,
}

/// Conditional law of the new part `S_r \ E_r` given a coloring of `E_r`.
#[derive(Debug, Clone)]
pub struct Kernel<T: Real = f64> {
    edge_coder: Coder,
    block_coder: Coder,
    rows: HashMap<u64, Vec<(u64, T)>>,
}

impl<T: Real> Kernel<T> {
    fn from_ball_law(p: &LocalLaw<T>) -> Result<Self> {
        let shape = p.shape();
        let edge = BallShape::edge(p.d(), p.r())?;
        let e_pos = edge.positions_in(shape)?;
        let mut in_edge = vec![false; shape.len()];
        for &v in &e_pos {
            in_edge[v] = true;
        }
        let new_pos: Vec<usize> = (0..shape.len()).filter(|&v| !in_edge[v]).collect();
        let m = p.alphabet().len();
        let edge_coder = Coder::new(m, e_pos.len())?;
        let block_coder = Coder::new(m, new_pos.len())?;
        let mut rows: HashMap<u64, Vec<(u64, T)>> = HashMap::new();
        for (c, w) in p.atoms() {
            let e = edge_coder.encode(&e_pos.iter().map(|&v| c[v]).collect::<Vec<_>>());
            let n = block_coder.encode(&new_pos.iter().map(|&v| c[v]).collect::<Vec<_>>());
            rows.entry(e).or_default().push((n, w));
        }
        for row in rows.values_mut() {
            let total: T = row.iter().map(|(_, w)| *w).sum();
            for (_, w) in row.iter_mut() {
                *w /= total;
            }
        }
        Ok(Self { edge_coder, block_coder, rows })
    }

    pub fn edge_coder(&self) -> &Coder {
        &self.edge_coder
    }

    pub fn block_coder(&self) -> &Coder {
        &self.block_coder
    }

    /// Row for an edge configuration index. Unreachable configurations get the
    /// uniform row and `false`.
    pub fn row(&self, edge_index: u64) -> (Vec<(u64, T)>, bool) {
        match self.rows.get(&edge_index) {
            Some(r) => (r.clone(), true),
            None => {
                let n = self.block_coder.size();
                let u = T::one() / T::lit(n as f64);
                ((0..n).map(|i| (i, u)).collect(), false)
            }
        }
    }

    fn row_ref(&self, edge_index: u64) -> Option<&[(u64, T)]> {
        self.rows.get(&edge_index).map(Vec::as_slice)
    }

    /// Number of edge configurations never reached by the defining law.
    pub fn unused_rows(&self) -> u64 {
        self.edge_coder.size() - self.rows.len() as u64
    }

    pub fn used_rows(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Debug, Clone)]
pub struct MarkovProcess<T: Real = f64> {
    kind: MarkovKind,
    defining: LocalLaw<T>,
    /// Marginal on `S_r` (`S_1` for vertex-Markov processes).
    ball: LocalLaw<T>,
    kernel: Kernel<T>,
}

/// `S_1` law of the vertex-Markov process with edge law `p`.
pub fn vertex_markov_star<T: Real>(p: &LocalLaw<T>) -> Result<LocalLaw<T>> {
    let root = p.root_marginal();
    let star = BallShape::ball(p.d(), 1)?;
    LocalLaw::from_fn(star, p.alphabet().clone(), |c| {
        let a = c[0] as usize;
        if root[a] == T::zero() {
            return T::zero();
        }
        let mut w = root[a];
        for &b in &c[1..] {
            w *= p.prob(&[c[0], b]) / root[a];
        }
        w
    })
}

/// Build the Markov process defined by `p`.
pub fn build_markov<T: Real>(p: &LocalLaw<T>, kind: MarkovKind) -> Result<MarkovProcess<T>> {
    p.ensure_valid()?;
    let ball = match kind {
        MarkovKind::RMarkov(r) => {
            if p.kind() != ShapeKind::Ball || p.r() != r || r == 0 {
                return Err(Error::InvalidLaw(format!("an {r}-Markov process needs a ball law of radius {r} >= 1")));
            }
            p.clone()
        }
        MarkovKind::VertexMarkov => {
            if p.kind() != ShapeKind::Edge || p.r() != 1 {
                return Err(Error::InvalidLaw("a vertex-Markov process needs an edge law on E_1".into()));
            }
            vertex_markov_star(p)?
        }
    };
    let kernel = Kernel::from_ball_law(&ball)?;
    Ok(MarkovProcess { kind, defining: p.clone(), ball, kernel })
}

/// Local vertex -> vertex of `tree`, for the labeled ball centered at `center`
/// whose first root neighbor is `first`.
pub fn embed(local: &BallShape, tree: &BallShape, center: usize, first: usize) -> Vec<usize> {
    let neighbors = |y: usize| -> Vec<usize> {
        let mut n: Vec<usize> = tree.parent(y).into_iter().collect();
        n.extend_from_slice(tree.children(y));
        n
    };
    let mut map = vec![usize::MAX; local.len()];
    let mut pred = vec![usize::MAX; local.len()];
    map[0] = center;
    for x in 0..local.len() {
        let y = map[x];
        let mut nb = neighbors(y);
        if x == 0 {
            let k = nb.iter().position(|&z| z == first).expect("first is a neighbor of center");
            nb.remove(k);
            nb.insert(0, first);
        } else {
            nb.retain(|&z| z != pred[x]);
        }
        for (k, &c) in local.children(x).iter().enumerate() {
            map[c] = nb[k];
            pred[c] = y;
        }
    }
    map
}

/// One growth step `S_t -> S_{t+1}`: edge positions and new positions per center.
#[derive(Debug, Clone)]
struct Step {
    from_len: usize,
    to_len: usize,
    centers: Vec<(Vec<usize>, Vec<usize>)>,
}

fn plan_steps(d: usize, r: usize, t: usize) -> Result<Vec<Step>> {
    let local = BallShape::ball(d, r)?;
    let edge = BallShape::edge(d, r)?;
    let e_local = edge.positions_in(&local)?;
    let mut in_edge = vec![false; local.len()];
    for &v in &e_local {
        in_edge[v] = true;
    }
    let n_local: Vec<usize> = (0..local.len()).filter(|&v| !in_edge[v]).collect();
    let mut steps = Vec::new();
    for s in r..t {
        let tree = BallShape::ball(d, s + 1)?;
        let from_len = crate::shape::ball_size(d, s);
        let mut centers = Vec::new();
        let mut next_new = from_len;
        for v in 0..tree.len() {
            if tree.depth(v) != s + 1 - r {
                continue;
            }
            let u = tree.parent(v).expect("centers are below the root");
            let map = embed(&local, &tree, v, u);
            let e: Vec<usize> = e_local.iter().map(|&x| map[x]).collect();
            let n: Vec<usize> = n_local.iter().map(|&x| map[x]).collect();
            for &y in &n {
                if y != next_new {
                    return Err(Error::Shape("new vertices are not contiguous in breadth-first order".into()));
                }
                next_new += 1;
            }
            centers.push((e, n));
        }
        if next_new != tree.len() {
            return Err(Error::Shape("growth step does not cover the next layer".into()));
        }
        steps.push(Step { from_len, to_len: tree.len(), centers });
    }
    Ok(steps)
}

impl<T: Real> MarkovProcess<T> {
    pub fn kind(&self) -> MarkovKind {
        self.kind
    }
    pub fn defining_law(&self) -> &LocalLaw<T> {
        &self.defining
    }
    /// The marginal at the process radius (the star law for vertex-Markov processes).
    pub fn ball_law(&self) -> &LocalLaw<T> {
        &self.ball
    }
    pub fn kernel(&self) -> &Kernel<T> {
        &self.kernel
    }
    pub fn d(&self) -> usize {
        self.ball.d()
    }
    pub fn radius(&self) -> usize {
        self.ball.r()
    }

    /// Largest gap between `p_E(e) * kernel(n | e)` and the defining table.
    pub fn kernel_consistency(&self) -> f64 {
        let edge = self.ball.restrict_to_edge().expect("radius >= 1");
        let shape = self.ball.shape();
        let e_pos = edge.shape().positions_in(shape).expect("edge inside ball");
        let mut in_edge = vec![false; shape.len()];
        for &v in &e_pos {
            in_edge[v] = true;
        }
        let n_pos: Vec<usize> = (0..shape.len()).filter(|&v| !in_edge[v]).collect();
        let mut worst = 0.0f64;
        let mut c = vec![0u8; shape.len()];
        for i in 0..self.ball.coder().size() {
            self.ball.coder().decode_into(i, &mut c);
            let ec: Vec<u8> = e_pos.iter().map(|&v| c[v]).collect();
            let pe = edge.prob(&ec);
            if pe == T::zero() {
                continue;
            }
            let e = self.kernel.edge_coder.encode(&ec);
            let n = self.kernel.block_coder.encode(&n_pos.iter().map(|&v| c[v]).collect::<Vec<_>>());
            let k = self.kernel.row_ref(e).and_then(|row| row.iter().find(|(j, _)| *j == n)).map_or(T::zero(), |x| x.1);
            worst = worst.max((pe * k - self.ball.table().get(i)).abs().to_f64_lossy());
        }
        worst
    }

    /// Exact marginal on `S_t`.
    pub fn extend_marginal(&self, t: usize) -> Result<LocalLaw<T>> {
        let r = self.radius();
        if t < r {
            return Err(Error::Domain(format!("extension radius {t} is below the defining radius {r}")));
        }
        let target = BallShape::ball(self.d(), t)?;
        let m = self.ball.alphabet().len();
        let size = Coder::new(m, target.len())
            .map_err(|_| Error::Cap("table size overflows; use sample_coloring".into()))?
            .size();
        if size > EXTEND_CAP {
            return Err(Error::Cap(format!(
                "|M|^|S_{t}| = {size} exceeds the exact-extension cap {EXTEND_CAP}; use sample_coloring"
            )));
        }
        let mut cur: Vec<(u64, T)> = self.ball.table().iter().collect();
        for step in plan_steps(self.d(), r, t)? {
            let from = Coder::new(m, step.from_len)?;
            let b = self.kernel.block_coder.len();
            let k = step.centers.len();
            let block_size = self.kernel.block_coder.size();
            let shift = block_size.pow(k as u32);
            let mut next = Vec::new();
            let mut c = vec![0u8; step.from_len];
            let mut ec = vec![0u8; self.kernel.edge_coder.len()];
            for &(x, w) in &cur {
                from.decode_into(x, &mut c);
                let rows: Vec<&[(u64, T)]> = step
                    .centers
                    .iter()
                    .map(|(e, _)| {
                        for (slot, &v) in ec.iter_mut().zip(e) {
                            *slot = c[v];
                        }
                        self.kernel.row_ref(self.kernel.edge_coder.encode(&ec)).expect("reachable configuration")
                    })
                    .collect();
                let mut idx = vec![0usize; k];
                'odometer: loop {
                    let mut blk = 0u64;
                    let mut pr = w;
                    for (j, row) in rows.iter().enumerate() {
                        let (n, q) = row[idx[j]];
                        blk = blk * block_size + n;
                        pr *= q;
                    }
                    if pr != T::zero() {
                        next.push((x * shift + blk, pr));
                    }
                    let mut j = k;
                    loop {
                        if j == 0 {
                            break 'odometer;
                        }
                        j -= 1;
                        idx[j] += 1;
                        if idx[j] < rows[j].len() {
                            continue 'odometer;
                        }
                        idx[j] = 0;
                    }
                }
            }
            debug_assert_eq!(step.to_len, step.from_len + k * b);
            cur = next;
        }
        let table = Table::from_entries(size, cur);
        LocalLaw::from_table(target, self.ball.alphabet().clone(), table)
    }

    /// One coloring of `S_t` in breadth-first order.
    pub fn sample_coloring<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> Result<Vec<u8>> {
        let steps = plan_steps(self.d(), self.radius(), t.max(self.radius()))?;
        Ok(self.sample_with_plan(&steps, t, rng))
    }

    fn sample_with_plan<R: Rng + ?Sized>(&self, steps: &[Step], t: usize, rng: &mut R) -> Vec<u8> {
        let atoms: Vec<(u64, T)> = self.ball.table().iter().collect();
        let x = draw(&atoms, rng);
        let mut c = self.ball.coder().decode(x);
        let mut ec = vec![0u8; self.kernel.edge_coder.len()];
        let mut block = vec![0u8; self.kernel.block_coder.len()];
        for step in steps {
            c.resize(step.to_len, 0);
            for (e, n) in &step.centers {
                for (slot, &v) in ec.iter_mut().zip(e) {
                    *slot = c[v];
                }
                let row = self.kernel.row_ref(self.kernel.edge_coder.encode(&ec)).expect("reachable configuration");
                self.kernel.block_coder.decode_into(draw(row, rng), &mut block);
                for (&v, &col) in n.iter().zip(&block) {
                    c[v] = col;
                }
            }
        }
        if t < self.radius() {
            let pos = BallShape::ball(self.d(), t)
                .and_then(|s| s.positions_in(self.ball.shape()))
                .expect("smaller ball");
            return pos.iter().map(|&v| c[v]).collect();
        }
        c
    }

    /// `count` independent colorings of `S_t` from a seeded stream.
    pub fn sample_colorings(&self, t: usize, count: usize, seed: u64) -> Result<Vec<Vec<u8>>> {
        let steps = plan_steps(self.d(), self.radius(), t.max(self.radius()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..count).map(|_| self.sample_with_plan(&steps, t, &mut rng)).collect())
    }
}

/// Inverse-CDF draw from `(index, weight)` pairs summing to one.
fn draw<T: Real, R: Rng + ?Sized>(row: &[(u64, T)], rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(i, w) in row {
        acc += w.to_f64_lossy();
        if u < acc {
            return i;
        }
    }
    row.last().expect("non-empty row").0
}

/// `Sigma_r(p|S_r) - Sigma_{r+1}(p)` for a ball law of radius `r + 1 >= 2`.
pub fn markov_defect<T: Real>(p: &LocalLaw<T>, d: usize) -> Result<T> {
    if p.kind() != ShapeKind::Ball || p.r() < 2 || p.d() != d {
        return Err(Error::InvalidLaw(format!("expected a degree-{d} ball law of radius >= 2")));
    }
    p.ensure_valid()?;
    let (outer, _, _) = sigma_r_value(p)?;
    let (inner, _, _) = sigma_r_value(&p.restrict_to_ball(p.r() - 1)?)?;
    Ok(inner - outer)
}

/// `Sigma_e(p|E_1) - Sigma_1(p)` for a ball law of radius 1.
pub fn vertex_defect<T: Real>(p: &LocalLaw<T>, d: usize) -> Result<T> {
    if p.kind() != ShapeKind::Ball || p.r() != 1 || p.d() != d {
        return Err(Error::InvalidLaw(format!("expected a degree-{d} ball law of radius 1")));
    }
    p.ensure_valid()?;
    let (s1, _, _) = sigma_r_value(p)?;
    let se = sigma_e(&p.restrict_to_edge()?, d)?.value;
    Ok(se - s1)
}

/// Whether the ball law `p` of radius `r + 1` is the marginal of the `r`-Markov
/// process built from its own `S_r` marginal.
pub fn is_markov<T: Real>(p: &LocalLaw<T>, tol: f64) -> Result<bool> {
    if p.r() < 2 {
        return Err(Error::InvalidLaw("need radius >= 2".into()));
    }
    let inner = p.restrict_to_ball(p.r() - 1)?;
    let mp = build_markov(&inner, MarkovKind::RMarkov(p.r() - 1))?;
    Ok(mp.extend_marginal(p.r())?.tv(p)?.to_f64_lossy() <= tol)
}

/// Whether the star law `p` is the star marginal of the vertex-Markov process of its edge law.
pub fn is_vertex_markov<T: Real>(p: &LocalLaw<T>, tol: f64) -> Result<bool> {
    if p.kind() != ShapeKind::Ball || p.r() != 1 {
        return Err(Error::InvalidLaw("need a ball law of radius 1".into()));
    }
    let star = vertex_markov_star(&p.restrict_to_edge()?)?;
    Ok(star.tv(p)?.to_f64_lossy() <= tol)
}
