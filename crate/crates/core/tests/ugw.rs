mod common;

use common::{h, rng};
use tree_entropy::fixtures::{random_edge, random_star};
use tree_entropy::ugw::{
    sigma_e_ugw, sigma_e_ugw_pair, sigma_r_ugw, sigma_r_ugw_conditional, ugw_vertex_markov_star, DegreeDistribution,
    UgwLaw, UgwMarkovProcess,
};
use tree_entropy::{sigma_r, ColorAlphabet};

#[test]
fn degree_distributions() {
    let pi = DegreeDistribution::parse("1:0.25,3:0.75").unwrap();
    assert_eq!(pi.max_degree(), 3);
    assert!((pi.mean() - 2.5).abs() < 1e-15);
    assert_eq!(pi.is_dirac(), None);
    assert_eq!(DegreeDistribution::dirac(3).unwrap().is_dirac(), Some(3));
    // size-biased offspring law: k pi_k / mean shifted down by one
    let sb = pi.size_biased();
    assert!((sb[0] - 0.1).abs() < 1e-15 && (sb[2] - 0.9).abs() < 1e-15);
    assert!(DegreeDistribution::parse("1:0.5,2:0.6").is_err());
    assert!(DegreeDistribution::parse("0:1").is_err());
}

#[test]
fn iid_colorings_have_vertex_entropy() {
    let pi = DegreeDistribution::parse("1:0.2,2:0.3,3:0.5").unwrap();
    let q = [0.3, 0.7];
    let u = UgwLaw::iid(1, ColorAlphabet::numeric(2), pi.clone(), &q).unwrap();
    u.ensure_valid().unwrap();
    let hq = h(q);
    assert!((sigma_r_ugw(&u, &pi).unwrap().value - hq).abs() < 1e-12);
    assert!((sigma_r_ugw_conditional(&u, &pi).unwrap().value - hq).abs() < 1e-12);
    assert!((sigma_e_ugw(&u, &pi).unwrap().value - hq).abs() < 1e-12);
}

#[test]
fn regular_laws_embed() {
    let mut r = rng(51);
    for _ in 0..10 {
        let p = random_star(3, 2, &mut r).unwrap();
        let u = UgwLaw::from_regular(&p).unwrap();
        u.ensure_valid().unwrap();
        let pi = DegreeDistribution::dirac(3).unwrap();
        let a = sigma_r(&p, 3).unwrap().value;
        assert!((sigma_r_ugw(&u, &pi).unwrap().value - a).abs() < 1e-12);
    }
}

#[test]
fn vertex_markov_routes_agree() {
    let mut r = rng(52);
    let pi = DegreeDistribution::parse("1:0.3,2:0.3,3:0.4").unwrap();
    for _ in 0..5 {
        let edge = random_edge(3, 2, &mut r).unwrap();
        let star = ugw_vertex_markov_star(&edge, &pi).unwrap();
        star.ensure_valid().unwrap();
        let proc = UgwMarkovProcess::vertex_markov(&edge, &pi).unwrap();
        let pair = sigma_e_ugw_pair(&edge, &pi).unwrap().value;
        // the vertex-Markov star keeps the edge entropy at every radius
        assert!((sigma_r_ugw(&star, &pi).unwrap().value - pair).abs() < 1e-11);
        let ball2 = proc.extend_marginal(2).unwrap();
        assert!((sigma_r_ugw(&ball2, &pi).unwrap().value - pair).abs() < 1e-10);
        assert!((sigma_e_ugw(&ball2, &pi).unwrap().value - pair).abs() < 1e-10);
        assert!(ball2.restrict(1).unwrap().atoms().len() == star.atoms().len());
    }
}
