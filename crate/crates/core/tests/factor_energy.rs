mod common;

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use tree_entropy::canon::ball_class;
use tree_entropy::energy::{
    energy_bounds, expected_potential, log_partition, log_partition_scaled, max_config, optimum_bounds,
    EnergySettings, FactorPotential,
};
use tree_entropy::graph::{ColoredGraph, GraphModel};
use tree_entropy::{BallShape, ColorAlphabet, LocalLaw};

/// `(1/n) ln sum_x exp(sum_v psi0(x_v) + sum_v sum_{u ~ v} psi1(x_v, x_u))` by brute force.
fn brute_log_partition(g: &ColoredGraph, m: usize, psi0: &[f64], psi1: &[f64]) -> f64 {
    let n = g.n();
    let mut terms = Vec::new();
    for code in 0..m.pow(n as u32) {
        let x: Vec<usize> = (0..n).map(|v| (code / m.pow(v as u32)) % m).collect();
        let mut s = 0.0;
        for v in 0..n {
            s += psi0[x[v]];
            for &u in g.neighbors(v) {
                s += psi1[x[v] * m + x[u]];
            }
        }
        terms.push(s);
    }
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()) / n as f64
}

fn two() -> ColorAlphabet {
    ColorAlphabet::numeric(2)
}

fn k33() -> ColoredGraph {
    ColoredGraph::new(6, &[(0, 3), (0, 4), (0, 5), (1, 3), (1, 4), (1, 5), (2, 3), (2, 4), (2, 5)]).unwrap()
}

#[test]
fn ising_on_k4_matches_brute_force() {
    // psi1 = beta s_a s_b / 2 so each edge carries beta s_a s_b
    let beta = 0.3;
    let psi1 = vec![beta / 2.0, -beta / 2.0, -beta / 2.0, beta / 2.0];
    let psi = FactorPotential::decomposed(two(), vec![0.0, 0.0], psi1.clone()).unwrap();
    let g = ColoredGraph::complete(4);
    let expect = brute_log_partition(&g, 2, &[0.0, 0.0], &psi1);
    assert!((log_partition(&g, &psi).unwrap() - expect).abs() < 1e-14);
    // closed form: Z = 2 e^{6b} + 8 e^{0} + 6 e^{-2b}
    let z = 2.0 * (6.0 * beta).exp() + 8.0 + 6.0 * (-2.0 * beta).exp();
    assert!((expect - z.ln() / 4.0).abs() < 1e-14);
}

#[test]
fn soft_independent_sets_match_brute_force() {
    let psi0 = [0.0, 0.5];
    let psi1 = [0.0, 0.0, 0.0, -2.0];
    let psi = FactorPotential::decomposed(two(), psi0.to_vec(), psi1.to_vec()).unwrap();
    for i in 0..3 {
        let g = GraphModel::regular(8, 3).sample(12, i).unwrap();
        let expect = brute_log_partition(&g, 2, &psi0, &psi1);
        assert!((log_partition(&g, &psi).unwrap() - expect).abs() < 1e-13);
    }
}

#[test]
fn class_form_agrees_with_decomposed_form() {
    let psi = FactorPotential::decomposed(two(), vec![0.1, -0.2], vec![0.0, 0.7, 0.7, 0.3]).unwrap();
    let shape = BallShape::ball(3, 1).unwrap();
    let mut classes = BTreeMap::new();
    for code in 0..16u32 {
        let colors: Vec<u8> = (0..4).map(|v| ((code >> v) & 1) as u8).collect();
        classes.insert(ball_class(&shape, &colors), psi.eval_star(3, &colors).unwrap());
    }
    let by_class = FactorPotential::classes(1, two(), classes, None).unwrap();
    let g = k33();
    let a = log_partition(&g, &psi).unwrap();
    let b = log_partition(&g, &by_class).unwrap();
    assert!((a - b).abs() < 1e-13);
    assert_eq!(max_config(&g, &psi).unwrap(), max_config(&g, &by_class).unwrap());
}

#[test]
fn perfect_cut_of_even_cycle() {
    let g = ColoredGraph::cycle(6).unwrap();
    let (value, x) = max_config(&g, &FactorPotential::max_cut(two())).unwrap();
    assert_eq!(value, 2.0);
    assert_eq!(x, vec![0, 1, 0, 1, 0, 1]);
}

#[test]
fn k4_cut() {
    let (value, x) = max_config(&ColoredGraph::complete(4), &FactorPotential::max_cut(two())).unwrap();
    assert_eq!(value, 2.0);
    assert_eq!(x, vec![0, 0, 1, 1]);
}

#[test]
fn zero_potential() {
    let g = GraphModel::regular(8, 3).sample(13, 0).unwrap();
    let zero = FactorPotential::zero(two());
    assert_eq!(max_config(&g, &zero).unwrap(), (0.0, vec![0; 8]));
    assert!((log_partition(&g, &zero).unwrap() - LN_2).abs() < 1e-15);
    let b = energy_bounds(&zero, 3, &EnergySettings::default()).unwrap();
    assert!(b.closed_form);
    assert_eq!(b.lower, Some(LN_2));
    assert_eq!(b.upper, LN_2);
}

#[test]
fn log_partition_is_convex_in_scale() {
    let psi = FactorPotential::decomposed(two(), vec![0.0, 0.5], vec![0.0, 0.0, 0.0, -2.0]).unwrap();
    let g = GraphModel::regular(10, 3).sample(14, 0).unwrap();
    let betas: Vec<f64> = (0..=20).map(|k| -2.0 + 0.25 * k as f64).collect();
    let v = log_partition_scaled(&g, &psi, &betas).unwrap();
    for w in v.windows(3) {
        assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-12);
    }
}

#[test]
fn partition_function_brackets_the_maximum() {
    // m^{-n} Z(beta) <= exp(beta L) <= Z(beta), per vertex
    let psi = FactorPotential::max_cut(two());
    let g = GraphModel::regular(10, 3).sample(15, 0).unwrap();
    let (best, _) = max_config(&g, &psi).unwrap();
    let betas = [0.5, 1.0, 4.0, 16.0];
    for (b, v) in betas.iter().zip(log_partition_scaled(&g, &psi, &betas).unwrap()) {
        assert!(v - LN_2 <= b * best + 1e-12);
        assert!(b * best <= v + 1e-12);
    }
}

#[test]
fn bounds_shift_exactly() {
    let settings = EnergySettings::default();
    let psi = FactorPotential::decomposed(two(), vec![0.25, 0.5], vec![0.0, 1.0, 1.0, 0.5]).unwrap();
    let moved = psi.shifted(0.75);
    let (a, b) = (energy_bounds(&psi, 3, &settings).unwrap(), energy_bounds(&moved, 3, &settings).unwrap());
    assert_eq!(a.upper + 0.75, b.upper);
    assert_eq!(a.lower.map(|x| x + 0.75), b.lower);
    let (a, b) = (optimum_bounds(&psi, 3, &settings).unwrap(), optimum_bounds(&moved, 3, &settings).unwrap());
    assert_eq!(a.upper + 0.75, b.upper);
    assert_eq!(a.lower.map(|x| x + 0.75), b.lower);
}

#[test]
fn weak_ising_brackets_the_bethe_value() {
    // high temperature: the limit is ln 2 + (d/2) ln cosh(J) with edge coupling J
    let j: f64 = 0.2;
    let psi = FactorPotential::decomposed(two(), vec![0.0, 0.0], vec![j / 2.0, -j / 2.0, -j / 2.0, j / 2.0]).unwrap();
    let bethe = LN_2 + 1.5 * j.cosh().ln();
    let b = energy_bounds(&psi, 3, &EnergySettings::default()).unwrap();
    let lower = b.lower.expect("a certified candidate");
    assert!(lower <= bethe + 1e-9 && bethe <= b.upper + 1e-9, "[{lower}, {}] vs {bethe}", b.upper);
    assert!(bethe - lower < 1e-3);
}

#[test]
fn optimum_bounds_for_cut() {
    let b = optimum_bounds(&FactorPotential::max_cut(two()), 3, &EnergySettings::default()).unwrap();
    let lower = b.lower.unwrap();
    assert!(lower <= b.upper);
    // no more than every edge cut
    assert!(b.upper <= 3.0);
    // the witness is certified and realizes the lower bound
    let w = b.witness.unwrap();
    let v = expected_potential(&w, &FactorPotential::max_cut(two()), 3).unwrap();
    assert!((v - lower).abs() < 1e-12);
}

#[test]
fn expected_potential_of_iid_law() {
    let p = LocalLaw::uniform_product(BallShape::ball(3, 1).unwrap(), two()).unwrap();
    let v = expected_potential(&p, &FactorPotential::max_cut(two()), 3).unwrap();
    assert!((v - 1.5).abs() < 1e-15);
}

#[test]
fn potential_files() {
    let text = "r=1\nalphabet=0,1\npsi0 1 0.5\npsi1 1 1 -2\n";
    let p = FactorPotential::parse(text).unwrap();
    assert_eq!(p.eval_star(3, &[1, 1, 0, 0]).unwrap(), -1.5);
    assert_eq!(p.eval_star(3, &[0, 1, 1, 1]).unwrap(), 0.0);
    assert!(FactorPotential::parse("r=1\nalphabet=0,1\npsi0 2 0.5\n").is_err());
    assert!(FactorPotential::parse("r=1\nalphabet=0,1\npsi0 1 nan\n").is_err());
    assert!(FactorPotential::parse("alphabet=0,1\npsi0 1 0.5\n").is_err());
    assert!(FactorPotential::parse("r=2\nalphabet=0,1\npsi0 1 0.5\n").is_err());
    let shape = BallShape::ball(3, 1).unwrap();
    let code = ball_class(&shape, &[1, 1, 0, 0]);
    let both = format!("r=1\nalphabet=0,1\npsi0 1 0.5\npsi1 1 1 -2\nclass {code} -1.5\n");
    assert!(FactorPotential::parse(&both).is_ok());
    let wrong = format!("r=1\nalphabet=0,1\npsi0 1 0.5\npsi1 1 1 -2\nclass {code} 7\n");
    assert!(FactorPotential::parse(&wrong).is_err());
}

#[test]
fn missing_class_values_are_errors() {
    let p = FactorPotential::classes(1, two(), BTreeMap::new(), None).unwrap();
    assert!(log_partition(&k33(), &p).is_err());
    let q = FactorPotential::classes(1, two(), BTreeMap::new(), Some(0.5)).unwrap();
    assert!((log_partition(&k33(), &q).unwrap() - (LN_2 + 0.5)).abs() < 1e-14);
}
