mod common;

use common::rng;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::HashMap;
use tree_entropy::fixtures::{ising_edge, mixture, random_ball2, random_edge, random_star, vertex_markov_ball};
use tree_entropy::markov::{
    build_markov, is_markov, is_vertex_markov, markov_defect, vertex_defect, vertex_markov_star, MarkovKind,
};
use tree_entropy::{sigma_r, BallShape};

#[test]
fn extension_restricts_back() {
    let mut r = rng(31);
    for i in 0..20 {
        let star = random_star(3, 2, &mut r).unwrap();
        let proc = build_markov(&star, MarkovKind::RMarkov(1)).unwrap();
        assert!(proc.kernel_consistency() < 1e-12);
        let ball2 = proc.extend_marginal(2).unwrap();
        assert!(ball2.is_valid(), "{:?}", ball2.validate());
        assert!(ball2.restrict_to_ball(1).unwrap().max_abs_diff(&star) < 1e-13);
        if i < 2 {
            // radius 3 has 2^22 colorings
            let ball3 = proc.extend_marginal(3).unwrap();
            assert!(ball3.restrict_to_ball(2).unwrap().max_abs_diff(&ball2) < 1e-13);
        }
    }
}

#[test]
fn markov_extensions_keep_their_entropy() {
    let mut r = rng(32);
    for _ in 0..20 {
        let star = random_star(3, 2, &mut r).unwrap();
        let s1 = sigma_r(&star, 3).unwrap().value;
        let ball2 = build_markov(&star, MarkovKind::RMarkov(1)).unwrap().extend_marginal(2).unwrap();
        assert!((sigma_r(&ball2, 3).unwrap().value - s1).abs() < 1e-11);
        assert!(is_markov(&ball2, 1e-10).unwrap());
    }
}

#[test]
fn vertex_markov_star_matches_edge() {
    let mut r = rng(33);
    for _ in 0..20 {
        let edge = random_edge(3, 3, &mut r).unwrap();
        let star = vertex_markov_star(&edge).unwrap();
        assert!(star.restrict_to_edge().unwrap().max_abs_diff(&edge) < 1e-14);
        assert!(is_vertex_markov(&star, 1e-10).unwrap());
        // leaves are independent given the root: p(a; b, c, e) = p(a) prod p(b|a)
        let root = edge.root_marginal();
        for (colors, w) in star.atoms() {
            let a = colors[0];
            let mut expect = root[a as usize];
            for &b in &colors[1..] {
                expect *= edge.prob(&[a, b]) / root[a as usize];
            }
            assert!((w - expect).abs() < 1e-15);
        }
    }
}

#[test]
fn vertex_markov_balls_agree_with_two_routes() {
    let edge = ising_edge(3, 0.3).unwrap();
    let direct = vertex_markov_ball(&edge, 2).unwrap();
    let proc = build_markov(&edge, MarkovKind::VertexMarkov).unwrap();
    let via_process = proc.extend_marginal(2).unwrap();
    assert!(direct.max_abs_diff(&via_process) < 1e-14);
}

#[test]
fn mixtures_have_positive_defect() {
    let mut r = rng(34);
    let a = build_markov(&random_star(3, 2, &mut r).unwrap(), MarkovKind::RMarkov(1)).unwrap().extend_marginal(2).unwrap();
    let b = build_markov(&random_star(3, 2, &mut r).unwrap(), MarkovKind::RMarkov(1)).unwrap().extend_marginal(2).unwrap();
    assert!(markov_defect(&a, 3).unwrap().abs() < 1e-12);
    let mix = mixture(&[(0.5, a), (0.5, b)]).unwrap();
    assert!(markov_defect(&mix, 3).unwrap() > 1e-6);
    assert!(!is_markov(&mix, 1e-10).unwrap());
}

#[test]
fn samples_follow_the_ball_law() {
    let mut r = rng(35);
    let star = random_star(3, 2, &mut r).unwrap();
    let proc = build_markov(&star, MarkovKind::RMarkov(1)).unwrap();
    let ball2 = proc.extend_marginal(2).unwrap();
    let n = 40_000;
    let mut counts: HashMap<Vec<u8>, usize> = HashMap::new();
    for c in proc.sample_colorings(2, n, 36).unwrap() {
        assert_eq!(c.len(), BallShape::ball(3, 2).unwrap().len());
        *counts.entry(c).or_default() += 1;
    }
    // pool atoms with small expected counts into one cell
    let (mut chi2, mut cells, mut rest_obs, mut rest_exp) = (0.0, 0usize, 0.0, 0.0);
    for (c, w) in ball2.atoms() {
        let e = w * n as f64;
        let o = *counts.get(&c).unwrap_or(&0) as f64;
        if e >= 5.0 {
            chi2 += (o - e).powi(2) / e;
            cells += 1;
        } else {
            rest_obs += o;
            rest_exp += e;
        }
    }
    if rest_exp > 0.0 {
        chi2 += (rest_obs - rest_exp).powi(2) / rest_exp;
        cells += 1;
    }
    let p = ChiSquared::new((cells - 1) as f64).unwrap().sf(chi2);
    assert!(p > 1e-3, "chi2 {chi2} over {cells} cells, p = {p}");
}

#[test]
fn sampling_is_reproducible() {
    let star = random_star(3, 2, &mut rng(37)).unwrap();
    let proc = build_markov(&star, MarkovKind::RMarkov(1)).unwrap();
    assert_eq!(proc.sample_colorings(3, 50, 9).unwrap(), proc.sample_colorings(3, 50, 9).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn radius_defect_is_nonnegative(seed in any::<u64>(), comps in 1usize..4) {
        let p = random_ball2(3, 2, comps, &mut rng(seed)).unwrap();
        prop_assert!(markov_defect(&p, 3).unwrap() >= -1e-10);
    }

    #[test]
    fn vertex_defect_is_nonnegative(seed in any::<u64>(), m in 2usize..4) {
        let p = random_star(3, m, &mut rng(seed)).unwrap();
        prop_assert!(vertex_defect(&p, 3).unwrap() >= -1e-10);
    }
}
