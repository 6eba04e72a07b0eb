mod common;

use common::rng;
use std::f64::consts::LN_2;
use tree_entropy::certify::{certify, CertKind, Mode, Verdict, CERT_TOL, DEFAULT_MAX_CELLS};
use tree_entropy::fixtures::{alternating, ising_edge, random_ball2, random_edge};
use tree_entropy::ugw::DegreeDistribution;
use tree_entropy::{sigma_e, BallShape, ColorAlphabet, LocalLaw};

fn net() -> Mode {
    Mode::RigorousNet { resolution: 1.0 / 32.0, max_cells: DEFAULT_MAX_CELLS }
}

/// Joint edge law over pairs built from a transport plan between the atoms of `p`.
fn plan_coupling(p: &LocalLaw<f64>, plan: &dyn Fn(&[u8], &[u8]) -> f64) -> LocalLaw<f64> {
    let m = p.alphabet().len() as u8;
    let atoms: Vec<Vec<u8>> = p.atoms().map(|(c, _)| c).collect();
    let mut out = Vec::new();
    for x in &atoms {
        for y in &atoms {
            let w = plan(x, y);
            if w > 0.0 {
                out.push((vec![x[0] * m + y[0], x[1] * m + y[1]], w));
            }
        }
    }
    LocalLaw::from_atoms(p.shape().clone(), p.alphabet().product(p.alphabet()).unwrap(), out).unwrap()
}

/// Largest coupling entropy over a grid on the hull of the independent,
/// diagonal and flipped transport plans.
fn grid_max(p: &LocalLaw<f64>, d: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let steps = 20;
    for i in 0..=steps {
        for j in 0..=steps - i {
            let (a, b) = (i as f64 / steps as f64, j as f64 / steps as f64);
            let c = 1.0 - a - b;
            let plan = |x: &[u8], y: &[u8]| {
                let mut w = a * p.prob(x) * p.prob(y);
                if x == y {
                    w += b * p.prob(x);
                }
                if x[0] == y[1] && x[1] == y[0] {
                    w += c * p.prob(x);
                }
                w
            };
            let joint = plan_coupling(p, &plan);
            best = best.max(sigma_e(&joint, d).unwrap().value);
        }
    }
    best
}

#[test]
fn upper_bound_dominates_grid() {
    let mut r = rng(41);
    let mut bounded = 0;
    for _ in 0..6 {
        let p = random_edge(3, 2, &mut r).unwrap();
        let cert = certify(&p, &CertKind::Vertex { d: 3.0 }, &net()).unwrap();
        let g = grid_max(&p, 3);
        // the independent plan alone reaches twice the entropy
        assert!(g >= cert.threshold - 1e-12);
        assert!(cert.s >= cert.threshold - 1e-9);
        if let Some(u) = cert.upper {
            assert!(g <= u + 1e-9, "grid {g} above bound {u}");
            bounded += 1;
        }
        if cert.verdict == Verdict::CertifiedTypical {
            assert!(g <= cert.threshold + CERT_TOL);
        }
    }
    assert!(bounded > 0);
}

#[test]
fn weak_coupling_is_certified() {
    let p = ising_edge(3, 0.1).unwrap();
    let cert = certify(&p, &CertKind::Vertex { d: 3.0 }, &net()).unwrap();
    assert_eq!(cert.verdict, Verdict::CertifiedTypical);
    let s = sigma_e(&p, 3).unwrap().value;
    assert!((cert.entropy.unwrap() - s).abs() < 1e-12);
    let coupling = cert.coupling.unwrap();
    assert!(coupling.joint().is_valid());
}

#[test]
fn strong_coupling_is_refuted() {
    let p = ising_edge(3, 2.0).unwrap();
    assert!(sigma_e(&p, 3).unwrap().value < 0.0);
    let cert = certify(&p, &CertKind::Vertex { d: 3.0 }, &net()).unwrap();
    assert_eq!(cert.verdict, Verdict::RefutedNecessary);
    assert!(cert.entropy.is_none());
}

#[test]
fn alternating_is_refuted() {
    let cert = certify(&alternating(3, 1).unwrap(), &CertKind::Ball, &net()).unwrap();
    assert_eq!(cert.verdict, Verdict::RefutedNecessary);
    assert!((cert.sigma + 0.5 * LN_2).abs() < 1e-12);
}

#[test]
fn iid_ball_law_is_certified() {
    let p = LocalLaw::uniform_product(BallShape::ball(3, 1).unwrap(), ColorAlphabet::numeric(2)).unwrap();
    let cert = certify(&p, &CertKind::Ball, &net()).unwrap();
    assert_eq!(cert.verdict, Verdict::CertifiedTypical);
    assert!((cert.entropy.unwrap() - LN_2).abs() < 1e-9);
}

#[test]
fn heuristic_never_certifies() {
    let p = LocalLaw::uniform_product(BallShape::edge(3, 1).unwrap(), ColorAlphabet::numeric(2)).unwrap();
    for seed in 0..3 {
        let mode = Mode::Heuristic { restarts: 4, seed, iters: 200 };
        let cert = certify(&p, &CertKind::Vertex { d: 3.0 }, &mode).unwrap();
        assert_ne!(cert.verdict, Verdict::CertifiedTypical);
        assert!(cert.entropy.is_none());
        assert!(cert.upper.is_none());
    }
}

#[test]
fn radius_two_balls_are_inconclusive() {
    let p = random_ball2(3, 2, 1, &mut rng(42)).unwrap();
    let cert = certify(&p, &CertKind::Ball, &net()).unwrap();
    if cert.sigma >= 0.0 {
        assert_eq!(cert.verdict, Verdict::Inconclusive);
    }
}

#[test]
fn dirac_degrees_match_regular_verdicts() {
    let mut r = rng(43);
    for _ in 0..4 {
        let p = random_edge(3, 2, &mut r).unwrap();
        let a = certify(&p, &CertKind::Vertex { d: 3.0 }, &net()).unwrap();
        let pi = DegreeDistribution::dirac(3).unwrap();
        let b = certify(&p, &CertKind::UgwVertex { pi }, &net()).unwrap();
        assert_eq!(a.verdict, b.verdict);
        assert!((a.sigma - b.sigma).abs() < 1e-12);
    }
}

#[test]
fn tiny_budget_is_inconclusive() {
    let p = ising_edge(3, 0.1).unwrap();
    let mode = Mode::RigorousNet { resolution: 1.0 / 32.0, max_cells: 1 };
    let cert = certify(&p, &CertKind::Vertex { d: 3.0 }, &mode).unwrap();
    assert_eq!(cert.verdict, Verdict::Inconclusive);
    // a valid bound is still reported
    if let Some(u) = cert.upper {
        assert!(u >= cert.s - 1e-12);
    }
}
