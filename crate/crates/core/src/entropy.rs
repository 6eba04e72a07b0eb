//! Shannon entropies and the annealed entropy functionals on the regular tree.
//! All values are in nats.

use crate::canon::{ball_class, ClassDistribution};
use crate::error::{Error, Result};
use crate::law::{LocalLaw, MASS_TOL};
use crate::scalar::{ln_factorial, Real};
use crate::shape::{BallShape, Coder, ShapeKind};
use std::collections::BTreeMap;

/// `-sum p ln p` without validation.
pub fn entropy_of<T: Real>(probs: impl IntoIterator<Item = T>) -> T {
    probs.into_iter().map(T::neg_x_ln_x).sum()
}

fn check_distribution<T: Real>(probs: &[T]) -> Result<()> {
    if let Some(x) = probs.iter().find(|x| **x < T::zero() || !x.is_finite()) {
        return Err(Error::InvalidLaw(format!("entry {x} is not a probability")));
    }
    let mass: T = probs.iter().copied().sum();
    if (mass - T::one()).abs() > T::tol(MASS_TOL) {
        return Err(Error::InvalidLaw(format!("mass = {mass}")));
    }
    Ok(())
}

/// Shannon entropy of a probability vector.
pub fn shannon<T: Real>(probs: &[T]) -> Result<T> {
    check_distribution(probs)?;
    Ok(entropy_of(probs.iter().copied()))
}

/// Entropy of a law's table.
pub fn law_entropy<T: Real>(law: &LocalLaw<T>) -> T {
    entropy_of(law.table().iter().map(|(_, p)| p))
}

/// Joint law of `(X, Y)` stored row-major: entry `x * ny + y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint2<T: Real = f64> {
    pub nx: usize,
    pub ny: usize,
    pub probs: Vec<T>,
}

impl<T: Real> Joint2<T> {
    pub fn new(nx: usize, ny: usize, probs: Vec<T>) -> Result<Self> {
        if nx == 0 || ny == 0 || probs.len() != nx * ny {
            return Err(Error::ShapeMismatch(format!("{} entries cannot split as {nx} x {ny}", probs.len())));
        }
        check_distribution(&probs)?;
        Ok(Self { nx, ny, probs })
    }

    pub fn marginal_x(&self) -> Vec<T> {
        (0..self.nx).map(|x| (0..self.ny).map(|y| self.probs[x * self.ny + y]).sum()).collect()
    }

    pub fn marginal_y(&self) -> Vec<T> {
        (0..self.ny).map(|y| (0..self.nx).map(|x| self.probs[x * self.ny + y]).sum()).collect()
    }

    pub fn joint_entropy(&self) -> T {
        entropy_of(self.probs.iter().copied())
    }
}

/// `H(X | Y) = H(X, Y) - H(Y)`, computed as the average over `Y` of `H(X | Y = y)`.
pub fn conditional_entropy<T: Real>(joint: &Joint2<T>) -> Result<T> {
    check_distribution(&joint.probs)?;
    let py = joint.marginal_y();
    let mut h = T::zero();
    for (y, &w) in py.iter().enumerate() {
        if w <= T::zero() {
            continue;
        }
        let row = (0..joint.nx).map(|x| joint.probs[x * joint.ny + y] / w);
        h += w * entropy_of(row);
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formula {
    /// `H(S_r) - d/2 H(E_r)`
    Regular,
    /// `d/2 H(E_1) - (d-1) H(o)`
    EdgeStar,
    /// Unlabeled-class route to the regular formula.
    Unlabeled,
    /// `H(S_r) - d/2 H(E_r) - H(pi)` on a Galton-Watson tree.
    Ugw,
    /// Same value through entropies conditional on the tree shape.
    UgwConditional,
    /// `d/2 H(E_1) - d H(o-> ) + H(o) - H(pi)` on a Galton-Watson tree.
    UgwEdgeStar,
}

impl Formula {
    pub fn as_str(self) -> &'static str {
        match self {
            Formula::Regular => "regular",
            Formula::EdgeStar => "edge-star",
            Formula::Unlabeled => "unlabeled",
            Formula::Ugw => "ugw",
            Formula::UgwConditional => "ugw-conditional",
            Formula::UgwEdgeStar => "ugw-edge-star",
        }
    }
}

/// A value together with the entropies it was assembled from.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport<T: Real = f64> {
    pub value: T,
    pub components: Vec<(String, T)>,
    pub formula: Formula,
}

impl<T: Real> EntropyReport<T> {
    pub fn component(&self, name: &str) -> Option<T> {
        self.components.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    /// `key=value` lines with 17 significant digits.
    pub fn to_kv_lines(&self) -> String {
        let mut s = format!("formula={}\nvalue={}\n", self.formula.as_str(), fmt17(self.value.to_f64_lossy()));
        for (k, v) in &self.components {
            s.push_str(&format!("{k}={}\n", fmt17(v.to_f64_lossy())));
        }
        s
    }
}

/// Shortest round-tripping rendering with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        // avoid printing negative zero
        format!("{:.16e}", x + 0.0)
    }
}

fn require_ball<T: Real>(p: &LocalLaw<T>, d: usize) -> Result<()> {
    if p.kind() != ShapeKind::Ball || p.r() == 0 {
        return Err(Error::InvalidLaw("expected a ball law of radius >= 1".into()));
    }
    if p.d() != d {
        return Err(Error::ShapeMismatch(format!("law has degree {}, asked for {d}", p.d())));
    }
    p.ensure_valid()
}

fn require_edge1<T: Real>(p: &LocalLaw<T>, d: usize) -> Result<()> {
    if p.kind() != ShapeKind::Edge || p.r() != 1 {
        return Err(Error::InvalidLaw("expected an edge law on E_1".into()));
    }
    if p.d() != d {
        return Err(Error::ShapeMismatch(format!("law has degree {}, asked for {d}", p.d())));
    }
    p.ensure_valid()
}

/// Annealed entropy `H(X_{S_r}) - d/2 H(X_{E_r})` without validation.
pub fn sigma_r_value<T: Real>(p: &LocalLaw<T>) -> Result<(T, T, T)> {
    let hs = law_entropy(p);
    let he = law_entropy(&p.restrict_to_edge()?);
    let d = T::lit(p.d() as f64);
    Ok((hs - d / T::lit(2.0) * he, hs, he))
}

pub fn sigma_r<T: Real>(p: &LocalLaw<T>, d: usize) -> Result<EntropyReport<T>> {
    require_ball(p, d)?;
    let (value, hs, he) = sigma_r_value(p)?;
    Ok(EntropyReport {
        value,
        components: vec![("H_S".into(), hs), ("H_E".into(), he)],
        formula: Formula::Regular,
    })
}

/// `d/2 H(edge) - (d-1) H(vertex)` for a real mean degree.
pub fn edge_star<T: Real>(h_edge: T, h_vertex: T, d: T) -> T {
    d / T::lit(2.0) * h_edge - (d - T::one()) * h_vertex
}

pub fn sigma_e<T: Real>(p: &LocalLaw<T>, d: usize) -> Result<EntropyReport<T>> {
    require_edge1(p, d)?;
    let he = law_entropy(p);
    let ho = entropy_of(p.root_marginal());
    Ok(EntropyReport {
        value: edge_star(he, ho, T::lit(d as f64)),
        components: vec![("H_E1".into(), he), ("H_o".into(), ho)],
        formula: Formula::EdgeStar,
    })
}

/// Code of the tree below `v` cut at absolute depth `max_depth`, skipping `skip`.
fn truncated_code(shape: &BallShape, colors: &[u8], v: usize, max_depth: usize, skip: Option<usize>) -> String {
    let mut kids: Vec<String> = shape
        .children(v)
        .iter()
        .filter(|&&c| Some(c) != skip && shape.depth(c) <= max_depth)
        .map(|&c| truncated_code(shape, colors, c, max_depth, None))
        .collect();
    kids.sort();
    format!("{}[{}]", colors[v], kids.concat())
}

/// The annealed entropy computed from unlabeled classes:
/// `H(class of S_r) - d/2 H(pi_mu) - sum_g E ln N(g)! + ln d!`, where `N(g)` counts
/// root neighbors whose edge neighborhood has class `g` and `pi_mu(g) = E N(g) / d`.
pub fn sigma_unlabeled<T: Real>(p: &LocalLaw<T>, d: usize) -> Result<EntropyReport<T>> {
    require_ball(p, d)?;
    let shape = p.shape();
    let r = p.r();
    let mut classes: ClassDistribution<T> = ClassDistribution::new(r, p.alphabet().len());
    let mut pi_mu: BTreeMap<String, T> = BTreeMap::new();
    let mut ln_fact = T::zero();
    let dd = T::lit(d as f64);
    let root_kids: Vec<usize> = shape.children(0).to_vec();
    for (c, w) in p.atoms() {
        classes.add(ball_class(shape, &c), w);
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for &v in &root_kids {
            let near = truncated_code(shape, &c, 0, r - 1, Some(v));
            let far = truncated_code(shape, &c, v, r, None);
            *counts.entry(format!("{near}|{far}")).or_default() += 1;
        }
        for (g, n) in counts {
            *pi_mu.entry(g).or_insert_with(T::zero) += w * T::lit(n as f64) / dd;
            ln_fact += w * T::lit(ln_factorial(n));
        }
    }
    let h_classes = entropy_of(classes.probs.values().copied());
    let h_pi = entropy_of(pi_mu.values().copied());
    let ln_d = T::lit(ln_factorial(d));
    let value = h_classes - dd / T::lit(2.0) * h_pi - ln_fact + ln_d;
    Ok(EntropyReport {
        value,
        components: vec![
            ("H_classes".into(), h_classes),
            ("H_pi_mu".into(), h_pi),
            ("E_ln_N_fact".into(), ln_fact),
            ("ln_d_fact".into(), ln_d),
        ],
        formula: Formula::Unlabeled,
    })
}

/// Law of a random vector in `F^n`, dense over the `|F|^n` words.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeableLaw<T: Real = f64> {
    pub n: usize,
    pub f: usize,
    pub probs: Vec<T>,
}

impl<T: Real> ExchangeableLaw<T> {
    pub fn new(n: usize, f: usize, probs: Vec<T>) -> Result<Self> {
        let coder = Coder::new(f, n)?;
        if coder.size() != probs.len() as u64 {
            return Err(Error::ShapeMismatch("table length is not |F|^n".into()));
        }
        check_distribution(&probs)?;
        let law = Self { n, f, probs };
        let dev = law.exchangeability_defect();
        if dev > MASS_TOL {
            return Err(Error::Invariance(format!("not exchangeable (deviation {dev:e})")));
        }
        Ok(law)
    }

    /// Largest change of the table under a transposition of adjacent coordinates.
    pub fn exchangeability_defect(&self) -> f64 {
        let coder = Coder::new(self.f, self.n).expect("checked size");
        let mut w = vec![0u8; self.n];
        let mut worst = 0.0f64;
        for (i, &p) in self.probs.iter().enumerate() {
            coder.decode_into(i as u64, &mut w);
            for k in 0..self.n.saturating_sub(1) {
                w.swap(k, k + 1);
                let q = self.probs[coder.encode(&w) as usize];
                w.swap(k, k + 1);
                worst = worst.max((p - q).abs().to_f64_lossy());
            }
        }
        worst
    }
}

/// Both sides of `H(Z) = H(N_Z) - sum_x E ln N_Z(x)! + ln n!` for exchangeable `Z`,
/// where `N_Z` is the vector of symbol counts.
pub fn exchangeable_entropy_identity<T: Real>(z: &ExchangeableLaw<T>) -> Result<(T, T)> {
    let coder = Coder::new(z.f, z.n)?;
    let lhs = entropy_of(z.probs.iter().copied());
    let mut counts_law: BTreeMap<Vec<usize>, T> = BTreeMap::new();
    let mut ln_fact = T::zero();
    let mut w = vec![0u8; z.n];
    for (i, &p) in z.probs.iter().enumerate() {
        if p == T::zero() {
            continue;
        }
        coder.decode_into(i as u64, &mut w);
        let mut counts = vec![0usize; z.f];
        for &x in &w {
            counts[x as usize] += 1;
        }
        ln_fact += p * T::lit(counts.iter().map(|&k| ln_factorial(k)).sum());
        *counts_law.entry(counts).or_insert_with(T::zero) += p;
    }
    let rhs = entropy_of(counts_law.values().copied()) - ln_fact + T::lit(ln_factorial(z.n));
    Ok((lhs, rhs))
}
