//! Standard laws used by examples, tests and the command line.

use crate::alphabet::ColorAlphabet;
use crate::error::{Error, Result};
use crate::law::LocalLaw;
use crate::markov::{build_markov, vertex_markov_star, MarkovKind};
use crate::shape::BallShape;
use rand::Rng;

/// Colors alternate with depth parity; root color is 0 or 1 with probability 1/2.
pub fn alternating(d: usize, r: usize) -> Result<LocalLaw<f64>> {
    let shape = BallShape::ball(d, r)?;
    let depth: Vec<u8> = (0..shape.len()).map(|v| (shape.depth(v) % 2) as u8).collect();
    let a: Vec<u8> = depth.clone();
    let b: Vec<u8> = depth.iter().map(|x| 1 - x).collect();
    LocalLaw::from_atoms(shape, ColorAlphabet::numeric(2), vec![(a, 0.5), (b, 0.5)])
}

/// Every vertex gets `color`.
pub fn monochromatic(shape: BallShape, m: usize, color: u8) -> Result<LocalLaw<f64>> {
    let n = shape.len();
    LocalLaw::point_mass(shape, ColorAlphabet::numeric(m), vec![color; n])
}

/// Edge law `p(a, b)` proportional to `exp(beta * s_a * s_b)` with spins `+-1`.
pub fn ising_edge(d: usize, beta: f64) -> Result<LocalLaw<f64>> {
    symmetric_edge(d, 2, |a, b| if a == b { beta.exp() } else { (-beta).exp() })
}

/// Edge law proportional to a symmetric weight.
pub fn symmetric_edge(d: usize, m: usize, w: impl Fn(u8, u8) -> f64) -> Result<LocalLaw<f64>> {
    let shape = BallShape::edge(d, 1)?;
    let total: f64 = (0..m as u8).flat_map(|a| (0..m as u8).map(move |b| (a, b))).map(|(a, b)| w(a, b)).sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::ZeroMass);
    }
    LocalLaw::from_fn(shape, ColorAlphabet::numeric(m), |c| w(c[0], c[1]) / total)
}

/// Ball law of radius `r` of the vertex-Markov process with the given edge law.
pub fn vertex_markov_ball(edge: &LocalLaw<f64>, r: usize) -> Result<LocalLaw<f64>> {
    let star = vertex_markov_star(edge)?;
    if r <= 1 {
        return star.restrict(&BallShape::ball(edge.d(), r)?);
    }
    build_markov(&star, MarkovKind::RMarkov(1))?.extend_marginal(r)
}

/// Random flip-symmetric edge law with full support.
pub fn random_edge<R: Rng + ?Sized>(d: usize, m: usize, rng: &mut R) -> Result<LocalLaw<f64>> {
    let mut w = vec![0.0; m * m];
    for a in 0..m {
        for b in a..m {
            let x: f64 = rng.random::<f64>() + 0.05;
            w[a * m + b] = x;
            w[b * m + a] = x;
        }
    }
    symmetric_edge(d, m, |a, b| w[a as usize * m + b as usize])
}

/// Random valid star law: a random symmetric pair law fixes the root color and the
/// one-child conditional, and the children are drawn either independently or all
/// equal (a mixture with weight `lambda` on independence). Not vertex-Markov in general.
pub fn random_star<R: Rng + ?Sized>(d: usize, m: usize, rng: &mut R) -> Result<LocalLaw<f64>> {
    let edge = random_edge(d, m, rng)?;
    let lambda: f64 = rng.random();
    let pair: Vec<f64> = (0..m as u8).flat_map(|a| (0..m as u8).map(move |b| (a, b))).map(|(a, b)| edge.prob(&[a, b])).collect();
    let root: Vec<f64> = (0..m).map(|a| pair[a * m..(a + 1) * m].iter().sum()).collect();
    let shape = BallShape::ball(d, 1)?;
    LocalLaw::from_fn(shape, ColorAlphabet::numeric(m), |c| {
        let a = c[0] as usize;
        let q = |b: u8| pair[a * m + b as usize] / root[a];
        let indep: f64 = c[1..].iter().map(|&b| q(b)).product();
        let equal = if c[1..].iter().all(|&b| b == c[1]) { q(c[1]) } else { 0.0 };
        root[a] * (lambda * indep + (1.0 - lambda) * equal)
    })
}

/// Mixture `sum w_i p_i` of laws on the same shape.
pub fn mixture(parts: &[(f64, LocalLaw<f64>)]) -> Result<LocalLaw<f64>> {
    let first = &parts.first().ok_or(Error::ZeroMass)?.1;
    let atoms = parts.iter().flat_map(|(w, p)| p.atoms().map(move |(c, x)| (c, w * x)));
    LocalLaw::from_atoms(first.shape().clone(), first.alphabet().clone(), atoms)
}

/// Random valid ball law of radius 2: a mixture of 1-Markov extensions of random star laws.
pub fn random_ball2<R: Rng + ?Sized>(d: usize, m: usize, components: usize, rng: &mut R) -> Result<LocalLaw<f64>> {
    let mut parts = Vec::with_capacity(components);
    let mut total = 0.0;
    for _ in 0..components.max(1) {
        let star = random_star(d, m, rng)?;
        let w: f64 = rng.random::<f64>() + 0.1;
        total += w;
        parts.push((w, build_markov(&star, MarkovKind::RMarkov(1))?.extend_marginal(2)?));
    }
    for p in &mut parts {
        p.0 /= total;
    }
    mixture(&parts)
}
