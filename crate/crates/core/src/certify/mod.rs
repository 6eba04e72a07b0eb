//! Typicality certificates: second-moment conditions over self-couplings.
//!
//! For a law `p` the certifier bounds the largest annealed entropy of an
//! invariant self-coupling. The coupling search is reduced to a small outer
//! variable (the root-pair law for the vertex kind, the edge-pair law for the
//! ball kind) and an inner maximum-entropy problem whose dual gives affine upper
//! bounds; see [`engine`].

pub(crate) mod engine;

use crate::entropy::{edge_star, law_entropy, sigma_r_value, entropy_of};
use crate::error::{Error, Result};
use crate::law::{couple, CouplingLaw, LocalLaw};
use crate::shape::{BallShape, ShapeKind};
use crate::ugw::{sigma_e_ugw_pair_value, DegreeDistribution};
use engine::{branch_and_bound, Goal, NuSpace, Problem, Slice, Status, Target};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

/// Slack allowed when comparing a coupling bound with twice the entropy.
pub const CERT_TOL: f64 = 1e-9;
/// Default cell budget of the rigorous search.
pub const DEFAULT_MAX_CELLS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub enum CertKind {
    /// Edge law on `E_1`, certified through its vertex-Markov extension; `d` may be real.
    Vertex { d: f64 },
    /// Ball law on `S_1`, certified through its 1-Markov extension.
    Ball,
    /// Edge law on `E_1` on a unimodular Galton-Watson tree.
    UgwVertex { pi: DegreeDistribution },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    RigorousNet { resolution: f64, max_cells: usize },
    Heuristic { restarts: usize, seed: u64, iters: usize },
}

impl Default for Mode {
    fn default() -> Self {
        Mode::RigorousNet { resolution: 1.0 / 32.0, max_cells: DEFAULT_MAX_CELLS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    EdgeMarkov { radius: usize },
    VertexMarkov,
    UgwVertexMarkov,
}

impl Theorem {
    pub fn as_str(&self) -> String {
        match self {
            Theorem::EdgeMarkov { radius } => format!("edge-markov({radius})"),
            Theorem::VertexMarkov => "vertex-markov".into(),
            Theorem::UgwVertexMarkov => "ugw-vertex-markov".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    CertifiedTypical,
    RefutedNecessary,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::CertifiedTypical => "certified-typical",
            Verdict::RefutedNecessary => "refuted-necessary",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModeReport {
    /// `resolution` is the initial cell width actually used.
    RigorousNet { resolution: f64, bound: Option<f64>, cells: usize },
    Heuristic { restarts: usize },
}

#[derive(Debug, Clone)]
pub struct Certificate {
    pub theorem: Theorem,
    pub verdict: Verdict,
    /// Annealed entropy of the law being certified.
    pub sigma: f64,
    /// `2 * sigma`.
    pub threshold: f64,
    /// Best coupling entropy found (a lower bound on the supremum).
    pub s: f64,
    /// Proven upper bound on the supremum, when the search finished.
    pub upper: Option<f64>,
    pub mode: ModeReport,
    /// The coupling attaining `s`.
    pub coupling: Option<CouplingLaw<f64>>,
    /// Certified entropy of the extension, only when certified.
    pub entropy: Option<f64>,
    pub notes: Vec<String>,
}

impl Certificate {
    /// `upper - s`, the width left between the found coupling and the bound.
    pub fn gap_bound(&self) -> Option<f64> {
        self.upper.map(|u| (u - self.s).max(0.0))
    }
}

/// The necessary condition: the annealed entropy must be non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NecessaryCheck {
    pub sigma: f64,
    pub pass: bool,
}

/// Annealed entropy governing the kind: edge-star entropy or the radius-r entropy.
pub fn kind_sigma(p: &LocalLaw<f64>, kind: &CertKind) -> Result<f64> {
    p.ensure_valid()?;
    match kind {
        CertKind::Vertex { d } => {
            let e = edge_law(p)?;
            Ok(edge_star(law_entropy(&e), entropy_of(e.root_marginal()), *d))
        }
        CertKind::UgwVertex { pi } => Ok(sigma_e_ugw_pair_value(&edge_law(p)?, pi)),
        CertKind::Ball => {
            if p.kind() != ShapeKind::Ball || p.r() == 0 {
                return Err(Error::InvalidLaw("ball certification needs a ball law of radius >= 1".into()));
            }
            Ok(sigma_r_value(p)?.0)
        }
    }
}

pub fn necessary_check(p: &LocalLaw<f64>, kind: &CertKind) -> Result<NecessaryCheck> {
    let sigma = kind_sigma(p, kind)?;
    Ok(NecessaryCheck { sigma, pass: sigma >= -CERT_TOL })
}

fn edge_law(p: &LocalLaw<f64>) -> Result<LocalLaw<f64>> {
    match (p.kind(), p.r()) {
        (ShapeKind::Edge, 1) => Ok(p.clone()),
        (_, r) if r >= 1 => p.restrict(&BallShape::edge(p.d(), 1)?),
        _ => Err(Error::InvalidLaw("a law of radius >= 1 is needed".into())),
    }
}

/// Outer problem plus what is needed to turn an optimum back into a coupling.
struct Built {
    problem: Problem,
    diag: Vec<f64>,
    inner: Vec<(usize, usize)>,
    atoms: Vec<Vec<u8>>,
    law: LocalLaw<f64>,
}

fn support(p: &LocalLaw<f64>) -> (Vec<Vec<u8>>, Vec<f64>) {
    p.atoms().filter(|(_, w)| *w > 0.0).unzip()
}

/// Vertex kind: outer variable is the root-pair law, inner is the `E_1` coupling.
fn build_vertex(pe: &LocalLaw<f64>, d: f64) -> Result<Built> {
    let m = pe.alphabet().len();
    let (atoms, w) = support(pe);
    let na = atoms.len();
    let po = pe.root_marginal();
    let colors: Vec<usize> = (0..m).filter(|&a| po[a] > 0.0).collect();
    let mut nu_index = vec![usize::MAX; m * m];
    let mut entries = Vec::new();
    for &a in &colors {
        for &b in &colors {
            nu_index[a * m + b] = entries.len();
            entries.push((a, b));
        }
    }
    let ne = entries.len();
    let mut targets: Vec<Target> = w.iter().map(|&x| Target::Const(x)).collect();
    targets.extend(w.iter().map(|&x| Target::Const(x)));
    targets.extend((0..ne).map(Target::Nu));
    targets.extend((0..ne).map(Target::Nu));
    let mut atom_rows = Vec::with_capacity(na * na);
    let mut inner = Vec::with_capacity(na * na);
    for i in 0..na {
        for j in 0..na {
            let (x, y) = (&atoms[i], &atoms[j]);
            let eo = nu_index[x[0] as usize * m + y[0] as usize];
            let e1 = nu_index[x[1] as usize * m + y[1] as usize];
            atom_rows.push(vec![i as u32, (na + j) as u32, (2 * na + eo) as u32, (2 * na + ne + e1) as u32]);
            inner.push((i, j));
        }
    }
    let groups = vec![
        (0..na).collect(),
        (na..2 * na).collect(),
        (2 * na..2 * na + ne).collect(),
        (2 * na + ne..2 * na + 2 * ne).collect(),
    ];
    let tilt = vec![0.0; atom_rows.len()];
    let slice = Slice { atom_rows, groups, targets, tilt };

    let mut eqs = Vec::new();
    let mut row_group = Vec::new();
    let mut col_group = Vec::new();
    for &a in &colors {
        let row: Vec<usize> = colors.iter().map(|&b| nu_index[a * m + b]).collect();
        let col: Vec<usize> = colors.iter().map(|&b| nu_index[b * m + a]).collect();
        eqs.push((row.iter().map(|&e| (e, 1.0)).collect(), po[a]));
        eqs.push((col.iter().map(|&e| (e, 1.0)).collect(), po[a]));
        row_group.push((row, po[a]));
        col_group.push((col, po[a]));
    }
    let hi: Vec<f64> = entries.iter().map(|&(a, b)| po[a].min(po[b])).collect();
    let interior: Vec<f64> = entries.iter().map(|&(a, b)| po[a] * po[b]).collect();
    let diag: Vec<f64> = entries.iter().map(|&(a, b)| if a == b { po[a] } else { 0.0 }).collect();
    let space = NuSpace::new(ne, &eqs, hi, interior, vec![row_group, col_group], vec![])
        .ok_or_else(|| Error::InvalidLaw("inconsistent root marginal".into()))?;
    let problem = Problem { slice, space, alpha: d / 2.0, beta: d - 1.0, c: vec![0.0; ne] };
    Ok(Built { problem, diag, inner, atoms, law: pe.clone() })
}

/// Ball kind at radius 1: outer variable is the `E_1` pair law, inner is the `S_1` coupling.
fn build_ball(p: &LocalLaw<f64>) -> Result<Built> {
    let d = p.d();
    let m = p.alphabet().len();
    let pe = p.restrict(&BallShape::edge(d, 1)?)?;
    let (e_atoms, e_w) = support(&pe);
    let nea = e_atoms.len();
    let e_pos = |a: u8, b: u8| e_atoms.iter().position(|c| c[0] == a && c[1] == b);
    let (atoms, w) = support(p);
    let na = atoms.len();
    let ne = nea * nea;
    let mut targets: Vec<Target> = w.iter().map(|&x| Target::Const(x)).collect();
    targets.extend(w.iter().map(|&x| Target::Const(x)));
    for _ in 0..d {
        targets.extend((0..ne).map(Target::Nu));
    }
    let mut atom_rows = Vec::with_capacity(na * na);
    let mut inner = Vec::with_capacity(na * na);
    for i in 0..na {
        for j in 0..na {
            let (x, y) = (&atoms[i], &atoms[j]);
            let mut rows = vec![i as u32, (na + j) as u32];
            for k in 1..=d {
                let u = e_pos(x[0], x[k]).ok_or_else(|| Error::InvalidLaw("edge marginal misses an atom".into()))?;
                let v = e_pos(y[0], y[k]).ok_or_else(|| Error::InvalidLaw("edge marginal misses an atom".into()))?;
                rows.push((2 * na + (k - 1) * ne + u * nea + v) as u32);
            }
            atom_rows.push(rows);
            inner.push((i, j));
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![(0..na).collect(), (na..2 * na).collect()];
    for k in 0..d {
        groups.push((2 * na + k * ne..2 * na + (k + 1) * ne).collect());
    }
    let tilt = vec![0.0; atom_rows.len()];
    let slice = Slice { atom_rows, groups, targets, tilt };

    let flip: Vec<usize> = e_atoms.iter().map(|c| e_pos(c[1], c[0]).expect("edge law is flip invariant")).collect();
    let mut eqs = Vec::new();
    let mut row_group = Vec::new();
    let mut col_group = Vec::new();
    for u in 0..nea {
        let row: Vec<usize> = (0..nea).map(|v| u * nea + v).collect();
        let col: Vec<usize> = (0..nea).map(|v| v * nea + u).collect();
        eqs.push((row.iter().map(|&e| (e, 1.0)).collect(), e_w[u]));
        eqs.push((col.iter().map(|&e| (e, 1.0)).collect(), e_w[u]));
        row_group.push((row, e_w[u]));
        col_group.push((col, e_w[u]));
    }
    let mut sym_pairs = Vec::new();
    for u in 0..nea {
        for v in 0..nea {
            let (a, b) = (u * nea + v, flip[u] * nea + flip[v]);
            if a < b {
                eqs.push((vec![(a, 1.0), (b, -1.0)], 0.0));
                sym_pairs.push((a, b));
            }
        }
    }
    let hi: Vec<f64> = (0..ne).map(|e| e_w[e / nea].min(e_w[e % nea])).collect();
    let interior: Vec<f64> = (0..ne).map(|e| e_w[e / nea] * e_w[e % nea]).collect();
    let diag: Vec<f64> = (0..ne).map(|e| if e / nea == e % nea { e_w[e / nea] } else { 0.0 }).collect();
    let space = NuSpace::new(ne, &eqs, hi, interior, vec![row_group, col_group], sym_pairs)
        .ok_or_else(|| Error::InvalidLaw("inconsistent edge marginal".into()))?;
    let _ = m;
    let problem = Problem { slice, space, alpha: 1.0, beta: d as f64 / 2.0, c: vec![0.0; ne] };
    Ok(Built { problem, diag, inner, atoms, law: p.clone() })
}

impl Built {
    /// Turn an inner table into an invariant coupling and its entropy.
    fn coupling(&self, z: &[f64], kind: &CertKind) -> Result<(CouplingLaw<f64>, f64)> {
        let p = &self.law;
        let m = p.alphabet().len() as u8;
        let alpha = p.alphabet().product(p.alphabet())?;
        let atoms = self.inner.iter().zip(z).filter(|(_, &w)| w > 0.0).map(|(&(i, j), &w)| {
            let c: Vec<u8> = self.atoms[i].iter().zip(&self.atoms[j]).map(|(&a, &b)| a * m + b).collect();
            (c, w)
        });
        let joint = LocalLaw::from_atoms(p.shape().clone(), alpha, atoms)?.symmetrize()?;
        let value = coupling_sigma(&joint, kind)?;
        Ok((couple(p, p, joint)?, value))
    }
}

/// Annealed entropy of a joint law under the kind's formula.
fn coupling_sigma(joint: &LocalLaw<f64>, kind: &CertKind) -> Result<f64> {
    match kind {
        CertKind::Vertex { d } => Ok(edge_star(law_entropy(joint), entropy_of(joint.root_marginal()), *d)),
        CertKind::UgwVertex { pi } => Ok(edge_star(law_entropy(joint), entropy_of(joint.root_marginal()), pi.mean())),
        CertKind::Ball => Ok(sigma_r_value(joint)?.0),
    }
}

/// Result of a coupling search.
#[derive(Debug, Clone)]
pub struct CouplingSearch {
    pub coupling: CouplingLaw<f64>,
    pub s: f64,
    pub upper: Option<f64>,
    pub cells: usize,
    pub resolution: f64,
    pub status: Option<Status>,
}

fn explicit_best(b: &Built, kind: &CertKind, candidates: &[Vec<f64>]) -> Result<(CouplingLaw<f64>, f64)> {
    let mut best: Option<(CouplingLaw<f64>, f64)> = None;
    for nu in candidates {
        let Some((_, z)) = b.problem.value_explicit(nu) else { continue };
        let Ok((c, v)) = b.coupling(&z, kind) else { continue };
        if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
            best = Some((c, v));
        }
    }
    best.ok_or_else(|| Error::Domain("no explicit coupling could be built".into()))
}

fn search(b: &Built, kind: &CertKind, mode: &Mode, threshold: Option<f64>) -> Result<CouplingSearch> {
    let sp = &b.problem.space;
    match mode {
        Mode::RigorousNet { resolution, max_cells } => {
            if !(*resolution > 0.0 && *resolution <= 1.0) {
                return Err(Error::Domain(format!("resolution must lie in (0, 1], got {resolution}")));
            }
            let goal = match threshold {
                Some(t) => Goal::Threshold(t),
                None => Goal::Tolerance(1e-6),
            };
            let out = branch_and_bound(&b.problem, goal, *resolution, *max_cells);
            let mut cands = vec![b.diag.clone(), sp.interior.clone()];
            if let Some(nu) = &out.best_nu {
                cands.push(nu.clone());
            }
            let (coupling, s) = explicit_best(b, kind, &cands)?;
            let upper = (out.status == Status::Done).then_some(out.upper.max(s));
            Ok(CouplingSearch { coupling, s, upper, cells: out.cells, resolution: out.resolution, status: Some(out.status) })
        }
        Mode::Heuristic { restarts, seed, iters } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut starts = vec![b.diag.clone(), sp.interior.clone()];
            for _ in 0..*restarts {
                let w: Vec<f64> = (0..sp.n).map(|_| Exp1.sample(&mut rng)).collect();
                starts.push(sp.scale_to_marginals(w));
            }
            let mut cands = vec![b.diag.clone(), sp.interior.clone()];
            let mut found = 0;
            for st in &starts {
                if let Some((_, nu)) = b.problem.ascend(st, *iters) {
                    cands.push(nu);
                    found += 1;
                }
            }
            let _ = found;
            let (coupling, s) = explicit_best(b, kind, &cands)?;
            Ok(CouplingSearch { coupling, s, upper: None, cells: 0, resolution: 0.0, status: None })
        }
    }
}

/// Search self-couplings of `p` for the largest annealed entropy.
pub fn maximize_coupling_sigma(p: &LocalLaw<f64>, kind: &CertKind, mode: &Mode) -> Result<CouplingSearch> {
    p.ensure_valid()?;
    let built = match kind {
        CertKind::Vertex { d } => build_vertex(&edge_law(p)?, *d)?,
        CertKind::UgwVertex { pi } => build_vertex(&edge_law(p)?, pi.mean())?,
        CertKind::Ball => {
            if p.kind() != ShapeKind::Ball || p.r() != 1 {
                return Err(Error::Domain("coupling search for ball laws is implemented at radius 1".into()));
            }
            build_ball(p)?
        }
    };
    search(&built, kind, mode, None)
}

/// Certify that the extension of `p` has entropy equal to its annealed entropy.
pub fn certify(p: &LocalLaw<f64>, kind: &CertKind, mode: &Mode) -> Result<Certificate> {
    let sigma = kind_sigma(p, kind)?;
    let theorem = match kind {
        CertKind::Vertex { .. } => Theorem::VertexMarkov,
        CertKind::UgwVertex { .. } => Theorem::UgwVertexMarkov,
        CertKind::Ball => Theorem::EdgeMarkov { radius: p.r() },
    };
    let threshold = 2.0 * sigma;
    let mut notes = Vec::new();
    if matches!(theorem, Theorem::EdgeMarkov { .. } | Theorem::VertexMarkov) {
        notes.push("the coupling condition at the defining radius covers every larger radius".into());
    }
    let empty_mode = match mode {
        Mode::RigorousNet { resolution, .. } => ModeReport::RigorousNet { resolution: *resolution, bound: None, cells: 0 },
        Mode::Heuristic { restarts, .. } => ModeReport::Heuristic { restarts: *restarts },
    };
    if sigma < -CERT_TOL {
        return Ok(Certificate {
            theorem,
            verdict: Verdict::RefutedNecessary,
            sigma,
            threshold,
            s: sigma,
            upper: None,
            mode: empty_mode,
            coupling: None,
            entropy: None,
            notes: vec!["annealed entropy is negative".into()],
        });
    }
    let limit = threshold + CERT_TOL;
    let built = match kind {
        CertKind::Vertex { d } => build_vertex(&edge_law(p)?, *d)?,
        CertKind::UgwVertex { pi } => build_vertex(&edge_law(p)?, pi.mean())?,
        CertKind::Ball if p.r() != 1 => {
            notes.push("coupling search is implemented at radius 1 only".into());
            return Ok(Certificate {
                theorem,
                verdict: Verdict::Inconclusive,
                sigma,
                threshold,
                s: sigma,
                upper: None,
                mode: empty_mode,
                coupling: None,
                entropy: None,
                notes,
            });
        }
        CertKind::Ball => {
            // Any coupling's radius-1 entropy is at most its edge-star entropy,
            // so a vertex-kind bound below the threshold already suffices.
            if let Mode::RigorousNet { .. } = mode {
                let relaxed = build_vertex(&edge_law(p)?, p.d() as f64)?;
                let res = search(&relaxed, &CertKind::Vertex { d: p.d() as f64 }, mode, Some(limit))?;
                if res.status == Some(Status::Done) && res.upper.is_some_and(|u| u <= limit) {
                    notes.push("proved through the edge-star relaxation".into());
                    let direct = build_ball(p)?;
                    let (coupling, s) = explicit_best(&direct, kind, &[direct.diag.clone(), direct.problem.space.interior.clone()])?;
                    let upper = res.upper.map(|u| u.max(s));
                    return Ok(Certificate {
                        theorem,
                        verdict: Verdict::CertifiedTypical,
                        sigma,
                        threshold,
                        s,
                        upper,
                        mode: ModeReport::RigorousNet { resolution: res.resolution, bound: upper.map(|u| u - s), cells: res.cells },
                        coupling: Some(coupling),
                        entropy: Some(sigma),
                        notes,
                    });
                }
            }
            build_ball(p)?
        }
    };
    let res = search(&built, kind, mode, Some(limit))?;
    let certified = matches!(mode, Mode::RigorousNet { .. })
        && res.status == Some(Status::Done)
        && res.upper.is_some_and(|u| u <= limit);
    match res.status {
        Some(Status::Violated) => notes.push("found a coupling above twice the annealed entropy".into()),
        Some(Status::Budget) => notes.push("cell budget exhausted".into()),
        _ => {}
    }
    if matches!(mode, Mode::Heuristic { .. }) {
        notes.push("heuristic search gives lower bounds only".into());
    }
    let mode_report = match mode {
        Mode::RigorousNet { .. } => ModeReport::RigorousNet {
            resolution: res.resolution,
            bound: res.upper.map(|u| u - res.s),
            cells: res.cells,
        },
        Mode::Heuristic { restarts, .. } => ModeReport::Heuristic { restarts: *restarts },
    };
    Ok(Certificate {
        theorem,
        verdict: if certified { Verdict::CertifiedTypical } else { Verdict::Inconclusive },
        sigma,
        threshold,
        s: res.s,
        upper: res.upper,
        mode: mode_report,
        coupling: Some(res.coupling),
        entropy: certified.then_some(sigma),
        notes,
    })
}
