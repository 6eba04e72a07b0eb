//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every labeled simple `d`-regular graph on `n` vertices, as sorted edge lists,
/// found by brute force over edge subsets of the complete graph.
pub fn enumerate_regular(n: usize, d: usize) -> BTreeSet<Vec<(usize, usize)>> {
    let all: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    assert!(all.len() <= 24, "oracle is exponential in the number of vertex pairs");
    let mut out = BTreeSet::new();
    for mask in 0u32..(1u32 << all.len()) {
        if mask.count_ones() as usize * 2 != n * d {
            continue;
        }
        let mut deg = vec![0usize; n];
        let mut edges = Vec::new();
        for (i, &(u, v)) in all.iter().enumerate() {
            if mask >> i & 1 == 1 {
                deg[u] += 1;
                deg[v] += 1;
                edges.push((u, v));
            }
        }
        if deg.iter().all(|&x| x == d) {
            out.insert(edges);
        }
    }
    out
}

/// Plain Shannon entropy in nats.
pub fn h(probs: impl IntoIterator<Item = f64>) -> f64 {
    probs.into_iter().filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum()
}

/// Random probability vector with occasional exact zeros.
pub fn simplex(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..k).map(|_| if rng.random::<f64>() < 0.1 { 0.0 } else { -rng.random::<f64>().ln() }).collect();
    if w.iter().all(|&x| x == 0.0) {
        w[0] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// Adjacency lists of an edge list.
pub fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    adj
}
