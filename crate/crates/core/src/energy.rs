//! Local potentials: exact free energy and optimum on small graphs, and bounds
//! on their large-graph limits through certified and annealed entropies.

use crate::alphabet::ColorAlphabet;
use crate::canon::{ball_class, canonicalize, CanonicalBallClass, RootedColoredGraph};
use crate::certify::engine::{branch_and_bound, Goal, NuSpace, Problem, Slice, Target};
use crate::certify::{certify, CertKind, Mode, Verdict};
use crate::entropy::{edge_star, entropy_of, law_entropy, sigma_r_value};
use crate::error::{Error, Result};
use crate::graph::{log_add, stepping_stone, stream_rng, ColoredGraph, ColoringEnumerator, EnumState, McmcSettings};
use rand::Rng;
use crate::io::{parse_alphabet, split_lines};
use crate::law::LocalLaw;
use crate::shape::BallShape;
use std::collections::BTreeMap;

/// `psi0(color) + sum over neighbors psi1(color, neighbor color)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposed {
    pub psi0: Vec<f64>,
    /// Row-major `m x m`.
    pub psi1: Vec<f64>,
}

/// A potential on rooted colored balls (`psi = ln phi`).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPotential {
    radius: usize,
    alphabet: ColorAlphabet,
    classes: BTreeMap<CanonicalBallClass, f64>,
    default: Option<f64>,
    decomposed: Option<Decomposed>,
}

impl FactorPotential {
    pub fn decomposed(alphabet: ColorAlphabet, psi0: Vec<f64>, psi1: Vec<f64>) -> Result<Self> {
        let m = alphabet.len();
        if psi0.len() != m || psi1.len() != m * m {
            return Err(Error::Potential("psi0 needs m entries and psi1 m*m entries".into()));
        }
        if psi0.iter().chain(&psi1).any(|x| !x.is_finite()) {
            return Err(Error::Potential("potential values must be finite".into()));
        }
        Ok(Self {
            radius: 1,
            alphabet,
            classes: BTreeMap::new(),
            default: None,
            decomposed: Some(Decomposed { psi0, psi1 }),
        })
    }

    pub fn classes(
        radius: usize,
        alphabet: ColorAlphabet,
        classes: BTreeMap<CanonicalBallClass, f64>,
        default: Option<f64>,
    ) -> Result<Self> {
        if classes.values().chain(default.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Potential("potential values must be finite".into()));
        }
        Ok(Self { radius, alphabet, classes, default, decomposed: None })
    }

    /// The zero potential.
    pub fn zero(alphabet: ColorAlphabet) -> Self {
        let m = alphabet.len();
        Self::decomposed(alphabet, vec![0.0; m], vec![0.0; m * m]).expect("zero potential is finite")
    }

    /// `1(a != b)` on each incident edge: twice the cut size when summed over vertices.
    pub fn max_cut(alphabet: ColorAlphabet) -> Self {
        let m = alphabet.len();
        let psi1 = (0..m * m).map(|i| if i / m != i % m { 1.0 } else { 0.0 }).collect();
        Self::decomposed(alphabet, vec![0.0; m], psi1).expect("finite")
    }

    pub fn radius(&self) -> usize {
        self.radius
    }
    pub fn alphabet(&self) -> &ColorAlphabet {
        &self.alphabet
    }
    pub fn decomposition(&self) -> Option<&Decomposed> {
        self.decomposed.as_ref()
    }

    /// Value at the root of a rooted colored graph.
    pub fn eval(&self, g: &RootedColoredGraph) -> Result<f64> {
        if let Some(dc) = &self.decomposed {
            let m = self.alphabet.len();
            let a = g.colors[g.root] as usize;
            return Ok(dc.psi0[a] + g.adj[g.root].iter().map(|&u| dc.psi1[a * m + g.colors[u] as usize]).sum::<f64>());
        }
        self.eval_class(&canonicalize(g, self.radius)?)
    }

    pub fn eval_class(&self, c: &CanonicalBallClass) -> Result<f64> {
        self.classes
            .get(c)
            .copied()
            .or(self.default)
            .ok_or_else(|| Error::Potential(format!("no value for class {c} and no default")))
    }

    /// Value on a coloring of the regular star `S_1`.
    pub fn eval_star(&self, d: usize, colors: &[u8]) -> Result<f64> {
        if let Some(dc) = &self.decomposed {
            let m = self.alphabet.len();
            let a = colors[0] as usize;
            return Ok(dc.psi0[a] + colors[1..=d].iter().map(|&b| dc.psi1[a * m + b as usize]).sum::<f64>());
        }
        let shape = BallShape::ball(d, 1)?;
        self.eval_class(&ball_class(&shape, colors))
    }

    /// Adds `c` to every value.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        if let Some(dc) = &mut out.decomposed {
            for x in &mut dc.psi0 {
                *x += c;
            }
        }
        for v in out.classes.values_mut() {
            *v += c;
        }
        if let Some(x) = &mut out.default {
            *x += c;
        }
        out
    }

    pub fn scaled(&self, t: f64) -> Self {
        let mut out = self.clone();
        if let Some(dc) = &mut out.decomposed {
            dc.psi0.iter_mut().chain(dc.psi1.iter_mut()).for_each(|x| *x *= t);
        }
        out.classes.values_mut().for_each(|x| *x *= t);
        if let Some(x) = &mut out.default {
            *x *= t;
        }
        out
    }

    /// Constant split off before optimizing, so that bounds shift exactly with the potential.
    fn base_shift(&self) -> f64 {
        if let Some(dc) = &self.decomposed {
            return dc.psi0[0];
        }
        self.default.or_else(|| self.classes.values().next().copied()).unwrap_or(0.0)
    }

    /// `Some(c)` when the potential equals `c` on every ball of a `d`-regular graph.
    pub fn constant_value(&self, d: usize) -> Option<f64> {
        if let Some(dc) = &self.decomposed {
            let c1 = dc.psi1[0];
            if dc.psi1.iter().all(|&x| x == c1) && dc.psi0.iter().all(|&x| x == dc.psi0[0]) {
                return Some(dc.psi0[0] + d as f64 * c1);
            }
            return None;
        }
        let mut vals = self.classes.values().chain(self.default.iter());
        let first = *vals.next()?;
        (vals.all(|&x| x == first) && self.default.is_some()).then_some(first)
    }

    /// Largest value on any star coloring (an upper bound on `L_G / n` for `d`-regular trees' balls).
    pub fn max_star(&self, d: usize) -> Result<f64> {
        let m = self.alphabet.len();
        if let Some(dc) = &self.decomposed {
            return Ok((0..m)
                .map(|a| dc.psi0[a] + d as f64 * (0..m).map(|b| dc.psi1[a * m + b]).fold(f64::NEG_INFINITY, f64::max))
                .fold(f64::NEG_INFINITY, f64::max));
        }
        let vals = self.classes.values().chain(self.default.iter());
        Ok(vals.copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Parse a potential file.
    ///
    /// ```text
    /// r=1
    /// alphabet=0,1
    /// psi1 0 1 1.0
    /// psi1 1 0 1.0
    /// ```
    ///
    /// or `class <code> <value>` lines with an optional `default=<value>` header.
    pub fn parse(text: &str) -> Result<Self> {
        let (headers, body) = split_lines(text)?;
        let radius = headers.parse_usize("r")?;
        let alphabet = parse_alphabet(&headers)?;
        let m = alphabet.len();
        let num = |s: &str, line: usize| -> Result<f64> {
            let x: f64 = s.parse().map_err(|_| Error::Parse { line, msg: format!("bad number {s:?}") })?;
            if !x.is_finite() {
                return Err(Error::Parse { line, msg: "potential values must be finite".into() });
            }
            Ok(x)
        };
        let color = |s: &str, line: usize| {
            alphabet.index_of(s).map(|c| c as usize).ok_or_else(|| Error::Parse { line, msg: format!("unknown color {s:?}") })
        };
        let default = match headers.get("default") {
            Some(v) => Some(num(v, headers.values["default"].0)?),
            None => None,
        };
        let mut psi0 = vec![0.0; m];
        let mut psi1 = vec![0.0; m * m];
        let mut decomposed = false;
        let mut classes = BTreeMap::new();
        for (line, t) in body {
            let parts: Vec<&str> = t.split_whitespace().collect();
            match parts.as_slice() {
                ["psi0", a, v] => {
                    psi0[color(a, line)?] = num(v, line)?;
                    decomposed = true;
                }
                ["psi1", a, b, v] => {
                    psi1[color(a, line)? * m + color(b, line)?] = num(v, line)?;
                    decomposed = true;
                }
                ["class", code, v] => {
                    if classes.insert(CanonicalBallClass::from_code(*code), num(v, line)?).is_some() {
                        return Err(Error::Parse { line, msg: "repeated class".into() });
                    }
                }
                _ => return Err(Error::Parse { line, msg: "expected `psi0 a v`, `psi1 a b v` or `class code v`".into() }),
            }
        }
        if decomposed {
            if radius != 1 {
                return Err(Error::Potential("the decomposed form has radius 1".into()));
            }
            let mut p = Self::decomposed(alphabet, psi0, psi1)?;
            if !classes.is_empty() {
                p.classes = classes;
                p.check_decomposition()?;
            }
            return Ok(p);
        }
        if classes.is_empty() && default.is_none() {
            return Err(Error::Potential("no potential values given".into()));
        }
        Self::classes(radius, alphabet, classes, default)
    }

    /// Listed class values must agree with the decomposed form on star classes.
    fn check_decomposition(&self) -> Result<()> {
        let Some(dc) = &self.decomposed else { return Ok(()) };
        let m = self.alphabet.len();
        for (c, &v) in &self.classes {
            let Some((root, kids)) = parse_star(c.code()) else { continue };
            let w = dc.psi0[root] + kids.iter().map(|&b| dc.psi1[root * m + b]).sum::<f64>();
            if (w - v).abs() > 1e-12 {
                return Err(Error::Potential(format!("class {c}: listed {v}, decomposed form gives {w}")));
            }
        }
        Ok(())
    }
}

/// Root color and leaf colors of a star class code `T:a[b[]c[]...]`.
fn parse_star(code: &str) -> Option<(usize, Vec<usize>)> {
    let body = code.strip_prefix("T:")?;
    let (root, rest) = body.split_once('[')?;
    let inner = rest.strip_suffix(']')?;
    let kids = inner
        .split("[]")
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().ok())
        .collect::<Option<Vec<usize>>>()?;
    Some((root.parse().ok()?, kids))
}

fn class_values(e: &ColoringEnumerator, g: &ColoredGraph, psi: &FactorPotential) -> Result<Vec<f64>> {
    let reps = representatives(e, g, psi.radius())?;
    reps.iter().map(|rg| psi.eval(rg)).collect()
}

/// One rooted ball per class of the enumerator.
fn representatives(e: &ColoringEnumerator, g: &ColoredGraph, r: usize) -> Result<Vec<RootedColoredGraph>> {
    let mut reps: Vec<Option<RootedColoredGraph>> = vec![None; e.classes().len()];
    let index: BTreeMap<&CanonicalBallClass, usize> = e.classes().iter().enumerate().map(|(i, c)| (c, i)).collect();
    let m = e.m() as u64;
    for v in 0..g.n() {
        let verts = g.ball_vertices(v, r);
        let size = m.pow(verts.len() as u32);
        let mut colors = vec![0u8; g.n()];
        for key in 0..size {
            let mut k = key;
            for &(u, _) in &verts {
                colors[u] = (k % m) as u8;
                k /= m;
            }
            let rg = g.rooted_ball(v, r, &colors);
            let c = canonicalize(&rg, r)?;
            let slot = &mut reps[index[&c]];
            if slot.is_none() {
                *slot = Some(rg);
            }
        }
    }
    Ok(reps.into_iter().map(|x| x.expect("every class has a ball")).collect())
}

fn energy_of(st: &EnumState, values: &[f64]) -> f64 {
    st.counts.iter().zip(values).map(|(&c, &v)| c as f64 * v).sum()
}

/// Exact `(1/n) ln Z_G(beta psi)` for each `beta`.
pub fn log_partition_scaled(g: &ColoredGraph, psi: &FactorPotential, betas: &[f64]) -> Result<Vec<f64>> {
    let e = ColoringEnumerator::new(g, psi.radius(), psi.alphabet().len())?;
    let values = class_values(&e, g, psi)?;
    let blocks = e.for_each(
        || vec![f64::NEG_INFINITY; betas.len()],
        |acc, st| {
            let s = energy_of(st, &values);
            for (a, &b) in acc.iter_mut().zip(betas) {
                *a = log_add(*a, b * s);
            }
        },
    )?;
    let n = g.n() as f64;
    Ok((0..betas.len())
        .map(|i| blocks.iter().fold(f64::NEG_INFINITY, |a, b| log_add(a, b[i])) / n)
        .collect())
}

/// Exact `(1/n) ln Z_G` with `Z_G = sum_f prod_v phi(ball of v)`.
pub fn log_partition(g: &ColoredGraph, psi: &FactorPotential) -> Result<f64> {
    Ok(log_partition_scaled(g, psi, &[1.0])?[0])
}

/// Exact maximum `L_G / n` and the lexicographically smallest maximizer.
pub fn max_config(g: &ColoredGraph, psi: &FactorPotential) -> Result<(f64, Vec<u8>)> {
    let e = ColoringEnumerator::new(g, psi.radius(), psi.alphabet().len())?;
    let values = class_values(&e, g, psi)?;
    let better = |a: &(f64, Vec<u8>), b: &(f64, Vec<u8>)| a.0 > b.0 || (a.0 == b.0 && a.1 < b.1);
    let blocks = e.for_each(
        || (f64::NEG_INFINITY, Vec::new()),
        |acc: &mut (f64, Vec<u8>), st| {
            let s = energy_of(st, &values);
            if s > acc.0 || (s == acc.0 && st.colors < acc.1) {
                *acc = (s, st.colors.clone());
            }
        },
    )?;
    let best = blocks.into_iter().reduce(|a, b| if better(&b, &a) { b } else { a }).expect("at least one block");
    Ok((best.0 / g.n() as f64, best.1))
}

/// Monte Carlo estimate of `(1/n) ln Z_G`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionEstimate {
    pub value: f64,
    pub stderr: f64,
    pub min_ess: f64,
    /// Set when some stage mixes poorly.
    pub flagged: bool,
}

/// Schedule over the inverse temperature from 0 to 1 with steps of at most `1 / (n * spread)`.
pub fn partition_schedule(g: &ColoredGraph, psi: &FactorPotential) -> Result<McmcSettings> {
    let e = ColoringEnumerator::new(g, psi.radius(), psi.alphabet().len())?;
    let values = class_values(&e, g, psi)?;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(McmcSettings::for_beta(1.0, ((hi - lo) * g.n() as f64).ceil().max(1.0) as usize))
}

/// Stepping-stone estimate of `(1/n) ln Z_G` for graphs beyond the exhaustive cap.
pub fn estimate_log_partition(
    g: &ColoredGraph,
    psi: &FactorPotential,
    settings: &McmcSettings,
    seed: u64,
) -> Result<PartitionEstimate> {
    if settings.schedule.last() != Some(&1.0) {
        return Err(Error::Domain("the schedule must end at 1".into()));
    }
    let e = ColoringEnumerator::new(g, psi.radius(), psi.alphabet().len())?;
    let values = class_values(&e, g, psi)?;
    let ss = stepping_stone(&e, |st| energy_of(st, &values), settings, seed)?;
    let n = g.n() as f64;
    Ok(PartitionEstimate {
        value: ss.ln_z / n,
        stderr: ss.stderr / n,
        min_ess: ss.min_ess,
        flagged: ss.min_ess < settings.min_ess,
    })
}

/// Simulated annealing for `L_G / n`. The result is a lower bound on the maximum.
pub fn anneal_max(g: &ColoredGraph, psi: &FactorPotential, sweeps: usize, seed: u64) -> Result<(f64, Vec<u8>)> {
    let e = ColoringEnumerator::new(g, psi.radius(), psi.alphabet().len())?;
    let values = class_values(&e, g, psi)?;
    let n = g.n();
    let m = e.m();
    let mut rng = stream_rng(seed, 0);
    let mut st = e.state((0..n).map(|_| rng.random_range(0..m) as u8).collect());
    let mut cur = energy_of(&st, &values);
    let mut best = (cur, st.colors.clone());
    for sweep in 0..sweeps {
        let beta = 0.1 + 10.0 * sweep as f64 / sweeps.max(1) as f64;
        for _ in 0..n {
            if m < 2 {
                break;
            }
            let u = rng.random_range(0..n);
            let old = st.colors[u];
            let mut c = rng.random_range(0..m - 1) as u8;
            if c >= old {
                c += 1;
            }
            e.set(&mut st, u, c);
            let new = energy_of(&st, &values);
            if new >= cur || rng.random::<f64>() < (beta * (new - cur)).exp() {
                cur = new;
                if cur > best.0 || (cur == best.0 && st.colors < best.1) {
                    best = (cur, st.colors.clone());
                }
            } else {
                e.set(&mut st, u, old);
            }
        }
    }
    Ok((best.0 / n as f64, best.1))
}

/// Settings for the entropy-based bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySettings {
    /// Certification mode for candidate laws.
    pub cert_mode: Mode,
    /// Initial cell width of the upper-bound search.
    pub resolution: f64,
    pub max_cells: usize,
    /// Target width of the upper-bound bracket.
    pub tolerance: f64,
    /// Multiples of the potential used to generate candidate laws.
    pub scales: Vec<f64>,
    /// Inverse temperatures for the optimum upper bound.
    pub betas: Vec<f64>,
}

impl Default for EnergySettings {
    fn default() -> Self {
        Self {
            cert_mode: Mode::default(),
            resolution: 1.0 / 32.0,
            max_cells: 100_000,
            tolerance: 1e-6,
            scales: vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 4.0, 8.0],
            betas: vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
        }
    }
}

/// Bracket of a large-graph limit.
#[derive(Debug, Clone)]
pub struct Bounds {
    /// `None` when no candidate could be certified.
    pub lower: Option<f64>,
    pub upper: f64,
    /// Law attaining the lower bound.
    pub witness: Option<LocalLaw<f64>>,
    /// Both sides come from a closed form.
    pub closed_form: bool,
    /// Width of the bracket on the first-moment supremum behind `upper`.
    pub upper_slack: f64,
    pub candidates: usize,
    pub certified: usize,
    pub notes: Vec<String>,
}

impl Bounds {
    fn shifted(mut self, c: f64) -> Self {
        self.lower = self.lower.map(|x| x + c);
        self.upper += c;
        self
    }
}

/// Optimization problem `sup_p annealed(p) + <p, psi>` in reduced coordinates.
struct EnergyProblem {
    problem: Problem,
    /// Inner atoms as colorings of `E_1` (decomposed) or `S_1` (class form).
    atoms: Vec<Vec<u8>>,
    shape: BallShape,
    decomposed: bool,
}

fn energy_problem(psi: &FactorPotential, d: usize) -> Result<EnergyProblem> {
    if psi.radius() != 1 {
        return Err(Error::Potential("entropy bounds are implemented for radius-1 potentials".into()));
    }
    let m = psi.alphabet().len();
    if let Some(dc) = psi.decomposition() {
        // outer: root law nu; inner: edge law with both endpoint marginals nu
        let mut atom_rows = Vec::with_capacity(m * m);
        let mut tilt = Vec::with_capacity(m * m);
        let mut atoms = Vec::with_capacity(m * m);
        for a in 0..m {
            for b in 0..m {
                atom_rows.push(vec![a as u32, (m + b) as u32]);
                tilt.push(dc.psi1[a * m + b] + dc.psi1[b * m + a]);
                atoms.push(vec![a as u8, b as u8]);
            }
        }
        let targets = (0..m).map(Target::Nu).chain((0..m).map(Target::Nu)).collect();
        let slice = Slice { atom_rows, groups: vec![(0..m).collect(), (m..2 * m).collect()], targets, tilt };
        let all: Vec<usize> = (0..m).collect();
        let eqs = vec![(all.iter().map(|&e| (e, 1.0)).collect(), 1.0)];
        let space = NuSpace::new(m, &eqs, vec![1.0; m], vec![1.0 / m as f64; m], vec![vec![(all, 1.0)]], vec![])
            .expect("simplex");
        let problem = Problem { slice, space, alpha: d as f64 / 2.0, beta: d as f64 - 1.0, c: dc.psi0.clone() };
        return Ok(EnergyProblem { problem, atoms, shape: BallShape::edge(d, 1)?, decomposed: true });
    }
    // outer: symmetric edge law nu; inner: star law whose d root-edge marginals are nu
    let shape = BallShape::ball(d, 1)?;
    let n_star = m.pow(d as u32 + 1);
    let mut atom_rows = Vec::with_capacity(n_star);
    let mut tilt = Vec::with_capacity(n_star);
    let mut atoms = Vec::with_capacity(n_star);
    let mut colors = vec![0u8; d + 1];
    for idx in 0..n_star {
        let mut k = idx;
        for c in colors.iter_mut().rev() {
            *c = (k % m) as u8;
            k /= m;
        }
        let rows = (1..=d).map(|j| ((j - 1) * m * m + colors[0] as usize * m + colors[j] as usize) as u32).collect();
        atom_rows.push(rows);
        tilt.push(psi.eval_star(d, &colors)?);
        atoms.push(colors.clone());
    }
    let ne = m * m;
    let targets = (0..d).flat_map(|_| (0..ne).map(Target::Nu)).collect();
    let groups = (0..d).map(|j| (j * ne..(j + 1) * ne).collect()).collect();
    let slice = Slice { atom_rows, groups, targets, tilt };
    let all: Vec<usize> = (0..ne).collect();
    let mut eqs = vec![(all.iter().map(|&e| (e, 1.0)).collect(), 1.0)];
    let mut sym = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            eqs.push((vec![(a * m + b, 1.0), (b * m + a, -1.0)], 0.0));
            sym.push((a * m + b, b * m + a));
        }
    }
    let space = NuSpace::new(ne, &eqs, vec![1.0; ne], vec![1.0 / ne as f64; ne], vec![vec![(all, 1.0)]], sym)
        .expect("symmetric simplex");
    let problem = Problem { slice, space, alpha: 1.0, beta: d as f64 / 2.0, c: vec![0.0; ne] };
    Ok(EnergyProblem { problem, atoms, shape, decomposed: false })
}

impl EnergyProblem {
    /// Candidate law: the inner maximum-entropy table at `nu`.
    fn law_at(&self, nu: &[f64], alphabet: &ColorAlphabet) -> Option<LocalLaw<f64>> {
        let (_, z) = self.problem.value_explicit(nu)?;
        let atoms = self.atoms.iter().cloned().zip(z).filter(|(_, w)| *w > 0.0);
        LocalLaw::from_atoms(self.shape.clone(), alphabet.clone(), atoms).ok()?.symmetrize().ok()
    }
}

/// `<p, psi>` for an edge law (decomposed form) or a star law.
pub fn expected_potential(p: &LocalLaw<f64>, psi: &FactorPotential, d: usize) -> Result<f64> {
    let m = psi.alphabet().len();
    if let (Some(dc), crate::shape::ShapeKind::Edge) = (psi.decomposition(), p.kind()) {
        let po = p.root_marginal();
        let mut s: f64 = po.iter().zip(&dc.psi0).map(|(a, b)| a * b).sum();
        for (c, w) in p.atoms() {
            s += d as f64 * w * dc.psi1[c[0] as usize * m + c[1] as usize];
        }
        return Ok(s);
    }
    let mut s = 0.0;
    for (c, w) in p.atoms() {
        s += w * psi.eval_star(d, &c)?;
    }
    Ok(s)
}

fn annealed(p: &LocalLaw<f64>, d: usize) -> Result<f64> {
    match p.kind() {
        crate::shape::ShapeKind::Edge => Ok(edge_star(law_entropy(p), entropy_of(p.root_marginal()), d as f64)),
        crate::shape::ShapeKind::Ball => Ok(sigma_r_value(p)?.0),
    }
}

/// Upper bound on the first-moment supremum and the gap to the best value found.
fn upper_value(ep: &EnergyProblem, settings: &EnergySettings) -> (f64, f64) {
    let out = branch_and_bound(&ep.problem, Goal::Tolerance(settings.tolerance), settings.resolution, settings.max_cells);
    (out.upper, out.upper - out.best_value)
}

/// Certified candidates along `t * psi`: `(law, annealed entropy, <p, psi>)`.
fn certified_candidates(
    psi: &FactorPotential,
    d: usize,
    settings: &EnergySettings,
) -> Result<(Vec<(LocalLaw<f64>, f64, f64)>, usize)> {
    let mut out = Vec::new();
    let mut tried = 0;
    for &t in &settings.scales {
        let ep = energy_problem(&psi.scaled(t), d)?;
        let start = ep.problem.space.interior.clone();
        let Some((_, nu)) = ep.problem.ascend(&start, 300) else { continue };
        let Some(law) = ep.law_at(&nu, psi.alphabet()) else { continue };
        tried += 1;
        let kind = if ep.decomposed { CertKind::Vertex { d: d as f64 } } else { CertKind::Ball };
        let cert = certify(&law, &kind, &settings.cert_mode)?;
        if cert.verdict == Verdict::CertifiedTypical {
            let sigma = annealed(&law, d)?;
            let e = expected_potential(&law, psi, d)?;
            out.push((law, sigma, e));
        }
    }
    Ok((out, tried))
}

/// Bounds on `lim (1/n) E ln Z_{G_n}` for `d`-regular graphs.
pub fn energy_bounds(psi: &FactorPotential, d: usize, settings: &EnergySettings) -> Result<Bounds> {
    let m = psi.alphabet().len() as f64;
    if let Some(c) = psi.constant_value(d) {
        let v = m.ln() + c;
        return Ok(Bounds {
            lower: Some(v),
            upper: v,
            witness: None,
            closed_form: true,
            upper_slack: 0.0,
            candidates: 0,
            certified: 0,
            notes: vec!["constant potential: i.i.d. uniform colorings attain both sides".into()],
        });
    }
    let shift = psi.base_shift();
    if shift != 0.0 {
        return Ok(energy_bounds(&psi.shifted(-shift), d, settings)?.shifted(shift));
    }
    let ep = energy_problem(psi, d)?;
    let (upper, upper_slack) = upper_value(&ep, settings);
    let (cands, tried) = certified_candidates(psi, d, settings)?;
    let best = cands
        .into_iter()
        .map(|(law, s, e)| (s + e, law))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    let mut notes = Vec::new();
    if best.is_none() {
        notes.push("no candidate law was certified; lower bound unavailable".into());
    }
    let certified = best.is_some() as usize;
    let (lower, witness) = match best {
        Some((v, law)) => (Some(v), Some(law)),
        None => (None, None),
    };
    Ok(Bounds { lower, upper, witness, closed_form: false, upper_slack, candidates: tried, certified, notes })
}

/// Bounds on `lim E L_{G_n} / n` for `d`-regular graphs.
pub fn optimum_bounds(psi: &FactorPotential, d: usize, settings: &EnergySettings) -> Result<Bounds> {
    if let Some(c) = psi.constant_value(d) {
        return Ok(Bounds {
            lower: Some(c),
            upper: c,
            witness: None,
            closed_form: true,
            upper_slack: 0.0,
            candidates: 0,
            certified: 0,
            notes: vec!["constant potential".into()],
        });
    }
    let shift = psi.base_shift();
    if shift != 0.0 {
        return Ok(optimum_bounds(&psi.shifted(-shift), d, settings)?.shifted(shift));
    }
    let mut upper = psi.max_star(d)?;
    let mut upper_slack = 0.0;
    for &b in &settings.betas {
        let ep = energy_problem(&psi.scaled(b), d)?;
        let (u, slack) = upper_value(&ep, settings);
        if u / b < upper {
            upper = u / b;
            upper_slack = slack / b;
        }
    }
    let (cands, tried) = certified_candidates(psi, d, settings)?;
    let certified = cands.len();
    let best = cands.into_iter().map(|(law, _, e)| (e, law)).max_by(|a, b| a.0.total_cmp(&b.0));
    let mut notes = Vec::new();
    if best.is_none() {
        notes.push("no candidate law was certified; lower bound unavailable".into());
    }
    let (lower, witness) = match best {
        Some((v, law)) => (Some(v), Some(law)),
        None => (None, None),
    };
    Ok(Bounds { lower, upper, witness, closed_form: false, upper_slack, candidates: tried, certified, notes })
}
