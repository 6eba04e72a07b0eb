mod common;

use common::{adjacency, enumerate_regular, rng};
use proptest::prelude::*;
use std::collections::BTreeSet;
use std::f64::consts::LN_2;
use tree_entropy::fixtures::random_star;
use tree_entropy::graph::{
    bracket, count_microstates, count_microstates_multi, estimate_microstates, is_graphic, labeled_key, log_z_exact,
    quantile, sample_graph, stream_rng, ColoredGraph, GraphModel, LogValue, McmcSettings,
};
use tree_entropy::{canonicalize, tv_distance, BallShape, ClassDistribution, ColorAlphabet, LocalLaw};

/// Total variation of every coloring of `g`, through per-vertex canonical balls.
fn brute_tv(g: &ColoredGraph, law: &LocalLaw<f64>) -> Vec<f64> {
    let n = g.n();
    let m = law.alphabet().len();
    let target = law.class_distribution();
    let mut out = Vec::new();
    for code in 0..m.pow(n as u32) {
        let colors: Vec<u8> = (0..n).map(|v| ((code / m.pow(v as u32)) % m) as u8).collect();
        let mut emp = ClassDistribution::new(law.r(), m);
        for v in 0..n {
            emp.add(canonicalize(&g.rooted_ball(v, law.r(), &colors), law.r()).unwrap(), 1.0 / n as f64);
        }
        out.push(tv_distance(&emp, &target).unwrap());
    }
    out
}

fn prism() -> ColoredGraph {
    ColoredGraph::new(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (0, 3), (1, 4), (2, 5)]).unwrap()
}

fn iid_star() -> LocalLaw<f64> {
    LocalLaw::uniform_product(BallShape::ball(3, 1).unwrap(), ColorAlphabet::numeric(2)).unwrap()
}

#[test]
fn k4_is_the_only_cubic_graph_on_four_vertices() {
    let all = enumerate_regular(4, 3);
    assert_eq!(all.len(), 1);
    for i in 0..20 {
        let g = GraphModel::regular(4, 3).sample(1, i).unwrap();
        assert!(all.contains(&labeled_key(&g)));
    }
}

#[test]
fn every_labeled_five_cycle_appears() {
    let oracle = enumerate_regular(5, 2);
    assert_eq!(oracle.len(), 12);
    let seen: BTreeSet<_> = (0..2000).map(|i| labeled_key(&GraphModel::regular(5, 2).sample(2, i).unwrap())).collect();
    assert_eq!(seen, oracle);
}

#[test]
fn irregular_degree_sequences() {
    assert!(is_graphic(&[3, 3, 2, 2, 2]));
    assert!(!is_graphic(&[3, 3, 3, 1]));
    assert!(!is_graphic(&[2, 2, 1]));
    let g = sample_graph(&[3, 3, 2, 2, 2], &mut rng(3), 10_000).unwrap();
    assert_eq!(g.degrees(), vec![3, 3, 2, 2, 2]);
    assert!(sample_graph(&[3, 3, 3, 1], &mut rng(3), 100).is_err());
}

#[test]
fn sampling_is_reproducible() {
    let model = GraphModel::regular(10, 3);
    for i in 0..5 {
        assert_eq!(labeled_key(&model.sample(9, i).unwrap()), labeled_key(&model.sample(9, i).unwrap()));
    }
    let a = sample_graph(&[3; 10], &mut stream_rng(9, 0), 1000).unwrap();
    assert_eq!(labeled_key(&a), labeled_key(&model.sample(9, 0).unwrap()));
}

#[test]
fn edge_lists_round_trip() {
    let g = prism();
    let h = ColoredGraph::parse_edge_list(&g.to_edge_list()).unwrap();
    assert_eq!(labeled_key(&g), labeled_key(&h));
    let adj = adjacency(6, &g.edges());
    for (v, nbrs) in adj.iter().enumerate() {
        let mut a = nbrs.clone();
        let mut b = g.neighbors(v).to_vec();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }
}

#[test]
fn counts_match_brute_force() {
    let mut r = rng(4);
    let k33 = ColoredGraph::new(6, &[(0, 3), (0, 4), (0, 5), (1, 3), (1, 4), (1, 5), (2, 3), (2, 4), (2, 5)]).unwrap();
    for g in [prism(), k33] {
        for law in [iid_star(), random_star(3, 2, &mut r).unwrap()] {
            let tvs = brute_tv(&g, &law);
            for eps in [0.1, 0.3, 0.55, 1.0] {
                let expect = tvs.iter().filter(|&&t| t <= eps + 1e-12).count() as u64;
                let got = count_microstates(&g, &law, eps).unwrap();
                assert_eq!(got.count, expect, "eps {eps}");
                assert_eq!(got.total, 64);
            }
        }
    }
}

#[test]
fn partition_function_matches_brute_force() {
    let g = prism();
    let law = iid_star();
    let betas = [0.0, 0.5, 2.0, 10.0];
    let tvs = brute_tv(&g, &law);
    let got = log_z_exact(&g, &law, &betas).unwrap();
    for (k, &b) in betas.iter().enumerate() {
        let z: f64 = tvs.iter().map(|t| (-6.0 * b * t).exp()).sum();
        assert!((got[k] - z.ln()).abs() < 1e-12, "beta {b}");
    }
    assert_eq!(got[0], 6.0 * LN_2);
}

#[test]
fn brackets_hold() {
    let law = iid_star();
    let betas = [0.0, 1.0, 3.0];
    for i in 0..5 {
        let g = GraphModel::regular(8, 3).sample(5, i).unwrap();
        let ln_z = log_z_exact(&g, &law, &betas).unwrap();
        for c in count_microstates_multi(&g, &law, &[0.05, 0.2, 0.4]).unwrap() {
            for (k, &b) in betas.iter().enumerate() {
                let br = bracket(ln_z[k], c.h, 8, 2, b, c.eps);
                assert!(br.lower_ok && br.upper_ok, "{br:?}");
            }
        }
    }
}

#[test]
fn mcmc_tracks_exact_value() {
    let law = iid_star();
    let g = GraphModel::regular(8, 3).sample(6, 0).unwrap();
    let exact = log_z_exact(&g, &law, &[1.5]).unwrap()[0] / 8.0;
    let est = estimate_microstates(&g, &law, 0.2, &McmcSettings::for_beta(1.5, 8), 7).unwrap();
    assert!((est.value - exact).abs() <= 4.0 * est.stderr + 1e-12, "{} vs {exact} +- {}", est.value, est.stderr);
    assert!(est.f_upper >= est.value);
}

#[test]
fn quantiles_rank_from_the_top() {
    let v = [LogValue::Empty, LogValue::Finite(0.5), LogValue::Finite(0.2), LogValue::Finite(0.4)];
    assert_eq!(quantile(&v, 0.25).unwrap(), LogValue::Finite(0.5));
    assert_eq!(quantile(&v, 0.5).unwrap(), LogValue::Finite(0.4));
    assert_eq!(quantile(&v, 1.0).unwrap(), LogValue::Empty);
    assert!(quantile(&v, 0.0).is_err());
    assert!(quantile(&[], 0.5).is_err());
}

#[test]
fn exact_counts_refuse_large_graphs() {
    let g = GraphModel::regular(64, 3).sample(8, 0).unwrap();
    assert!(count_microstates(&g, &iid_star(), 0.1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn counts_grow_with_eps(seed in any::<u64>(), index in 0u64..50) {
        let g = GraphModel::regular(8, 3).sample(seed, index).unwrap();
        let law = random_star(3, 2, &mut rng(seed)).unwrap();
        let eps = [0.0, 0.05, 0.1, 0.2, 0.4, 0.8, 1.0];
        let counts = count_microstates_multi(&g, &law, &eps).unwrap();
        for w in counts.windows(2) {
            prop_assert!(w[0].count <= w[1].count);
        }
        prop_assert_eq!(counts.last().unwrap().count, 256);
    }
}
