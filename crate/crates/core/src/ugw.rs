//! Colorings of unimodular Galton-Watson trees truncated at a finite radius.
//!
//! A ball atom is a colored rooted tree given by the offspring counts of the
//! vertices at depth `< r` in breadth-first order and the colors of all
//! vertices in the same order. Tree shape randomness is part of the law.

use crate::alphabet::ColorAlphabet;
use crate::entropy::{edge_star, entropy_of, fmt17, EntropyReport, Formula};
use crate::error::{Error, Result};
use crate::io::{format_coloring, parse_alphabet, parse_coloring, parse_prob, split_lines};
use crate::law::{LocalLaw, MARGINAL_TOL, MASS_TOL};
use crate::shape::ShapeKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, HashMap, VecDeque};

/// Largest number of atoms an exact UGW extension will produce.
pub const UGW_ATOM_CAP: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    probs: Vec<f64>,
}

impl DegreeDistribution {
    /// `probs[k]` is the probability of degree `k`.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Degree("negative or non-finite probability".into()));
        }
        let mass: f64 = probs.iter().sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Degree(format!("mass = {mass}")));
        }
        while probs.last() == Some(&0.0) {
            probs.pop();
        }
        if probs.len() > 64 {
            return Err(Error::Degree("maximum degree above 63".into()));
        }
        let out = Self { probs };
        if out.mean() <= 0.0 {
            return Err(Error::Degree("mean degree must be positive".into()));
        }
        Ok(out)
    }

    pub fn dirac(d: usize) -> Result<Self> {
        let mut p = vec![0.0; d + 1];
        p[d] = 1.0;
        Self::new(p)
    }

    /// Parse `k:p,k:p,...`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut probs = Vec::new();
        for item in s.split(',') {
            let (k, p) = item
                .split_once(':')
                .ok_or_else(|| Error::Degree(format!("expected k:p, got {item:?}")))?;
            let k: usize = k.trim().parse().map_err(|_| Error::Degree(format!("bad degree {k:?}")))?;
            let p: f64 = p.trim().parse().map_err(|_| Error::Degree(format!("bad probability {p:?}")))?;
            if k >= 64 {
                return Err(Error::Degree("maximum degree above 63".into()));
            }
            if probs.len() <= k {
                probs.resize(k + 1, 0.0);
            }
            if probs[k] != 0.0 {
                return Err(Error::Degree(format!("degree {k} listed twice")));
            }
            probs[k] = p;
        }
        Self::new(probs)
    }

    pub fn format(&self) -> String {
        self.support().map(|k| format!("{k}:{}", fmt17(self.probs[k]))).collect::<Vec<_>>().join(",")
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.probs.len()).filter(|&k| self.probs[k] > 0.0)
    }

    /// Largest degree with positive probability.
    pub fn max_degree(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    /// `k -> (k+1) pi(k+1) / d`.
    pub fn size_biased(&self) -> Vec<f64> {
        let d = self.mean();
        (0..self.probs.len().saturating_sub(1)).map(|k| (k + 1) as f64 * self.probs[k + 1] / d).collect()
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(self.probs.iter().copied())
    }

    pub fn is_dirac(&self) -> Option<usize> {
        let s: Vec<usize> = self.support().collect();
        (s.len() == 1).then(|| s[0])
    }
}

/// A colored rooted tree in breadth-first order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColoredTree {
    /// Offspring counts of the vertices at depth `< radius`.
    pub offspring: Vec<u8>,
    pub colors: Vec<u8>,
}

/// Parent/children arrays of a tree given by offspring counts.
#[derive(Debug, Clone)]
pub struct TreeIndex {
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    pub depth: Vec<usize>,
}

impl TreeIndex {
    pub fn build(offspring: &[u8], radius: usize) -> Result<Self> {
        let mut parent = vec![None];
        let mut children = vec![Vec::new()];
        let mut depth = vec![0];
        let mut next = 0;
        let mut v = 0;
        while v < depth.len() {
            if depth[v] < radius {
                let k = *offspring
                    .get(next)
                    .ok_or_else(|| Error::Shape("offspring list too short".into()))? as usize;
                next += 1;
                for _ in 0..k {
                    let c = depth.len();
                    parent.push(Some(v));
                    children.push(Vec::new());
                    depth.push(depth[v] + 1);
                    children[v].push(c);
                }
            }
            v += 1;
        }
        if next != offspring.len() {
            return Err(Error::Shape("offspring list too long".into()));
        }
        Ok(Self { parent, children, depth })
    }

    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }

    fn neighbors(&self, x: usize) -> Vec<usize> {
        let mut n: Vec<usize> = self.parent[x].into_iter().collect();
        n.extend_from_slice(&self.children[x]);
        n
    }

    /// The tree hanging at `start` away from `exclude`, cut at distance `max_dist`.
    /// Also returns the number of vertices at distance `< max_dist`.
    pub fn side(&self, colors: &[u8], start: usize, exclude: Option<usize>, max_dist: usize) -> (ColoredTree, usize) {
        let mut off = Vec::new();
        let mut col = Vec::new();
        let mut inner = 0;
        let mut q = VecDeque::from([(start, exclude, 0usize)]);
        while let Some((x, pred, dist)) = q.pop_front() {
            col.push(colors[x]);
            if dist < max_dist {
                inner += 1;
                let nb: Vec<usize> = self.neighbors(x).into_iter().filter(|&z| Some(z) != pred).collect();
                off.push(nb.len() as u8);
                for z in nb {
                    q.push_back((z, Some(x), dist + 1));
                }
            }
        }
        (ColoredTree { offspring: off, colors: col }, inner)
    }
}

/// Recursive form used to apply child permutations.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Nested {
    color: u8,
    kids: Vec<Nested>,
}

impl Nested {
    fn from_tree(t: &ColoredTree, radius: usize) -> Result<Self> {
        let ix = TreeIndex::build(&t.offspring, radius)?;
        fn go(ix: &TreeIndex, colors: &[u8], v: usize) -> Nested {
            Nested { color: colors[v], kids: ix.children[v].iter().map(|&c| go(ix, colors, c)).collect() }
        }
        Ok(go(&ix, &t.colors, 0))
    }

    fn to_tree(&self, radius: usize) -> ColoredTree {
        let mut off = Vec::new();
        let mut col = Vec::new();
        let mut q = VecDeque::from([(self, 0usize)]);
        while let Some((n, d)) = q.pop_front() {
            col.push(n.color);
            if d < radius {
                off.push(n.kids.len() as u8);
                for k in &n.kids {
                    q.push_back((k, d + 1));
                }
            }
        }
        ColoredTree { offspring: off, colors: col }
    }

    /// Every tree obtained by one adjacent swap of sibling subtrees.
    fn swaps(&self) -> Vec<Nested> {
        let mut out = Vec::new();
        for i in 0..self.kids.len().saturating_sub(1) {
            let mut t = self.clone();
            t.kids.swap(i, i + 1);
            out.push(t);
        }
        for (i, k) in self.kids.iter().enumerate() {
            for v in k.swaps() {
                let mut t = self.clone();
                t.kids[i] = v;
                out.push(t);
            }
        }
        out
    }
}

/// Offspring sequences of UGW(pi) truncated at `radius`, with probabilities.
/// Neumaier summation; extended laws can carry millions of atoms.
fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        carry += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + carry
}

pub fn ugw_shape_law(pi: &DegreeDistribution, radius: usize) -> BTreeMap<Vec<u8>, f64> {
    let hat = pi.size_biased();
    let mut out = BTreeMap::new();
    fn go(
        pi: &DegreeDistribution,
        hat: &[f64],
        radius: usize,
        depths: &mut Vec<usize>,
        next: usize,
        off: &mut Vec<u8>,
        w: f64,
        out: &mut BTreeMap<Vec<u8>, f64>,
    ) {
        if next == depths.len() || depths[next] >= radius {
            *out.entry(off.clone()).or_insert(0.0) += w;
            return;
        }
        let dep = depths[next];
        let choices: Vec<(usize, f64)> = if next == 0 {
            pi.support().map(|k| (k, pi.prob(k))).collect()
        } else {
            hat.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(k, p)| (k, *p)).collect()
        };
        for (k, p) in choices {
            off.push(k as u8);
            let before = depths.len();
            depths.extend(std::iter::repeat_n(dep + 1, k));
            go(pi, hat, radius, depths, next + 1, off, w * p, out);
            depths.truncate(before);
            off.pop();
        }
    }
    go(pi, &hat, radius, &mut vec![0], 0, &mut Vec::new(), 1.0, &mut out);
    out
}

/// Law of the colored neighborhood of a directed root edge: (o-side, far side).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRootedLaw {
    pub radius: usize,
    pub atoms: BTreeMap<(ColoredTree, ColoredTree), f64>,
}

impl EdgeRootedLaw {
    pub fn entropy(&self) -> f64 {
        entropy_of(self.atoms.values().copied())
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.atoms.values().copied())
    }

    pub fn flipped(&self) -> Self {
        let atoms = self.atoms.iter().map(|((a, b), p)| ((b.clone(), a.clone()), *p)).collect();
        Self { radius: self.radius, atoms }
    }

    /// Largest change of the table under the flip.
    pub fn flip_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for ((a, b), p) in &self.atoms {
            let q = self.atoms.get(&(b.clone(), a.clone())).copied().unwrap_or(0.0);
            worst = worst.max((p - q).abs());
        }
        worst
    }

    /// `H(X | T)`: entropy of colors given the two tree shapes.
    pub fn conditional_color_entropy(&self) -> f64 {
        let mut groups: BTreeMap<(&[u8], &[u8]), Vec<f64>> = BTreeMap::new();
        for ((a, b), p) in &self.atoms {
            groups.entry((&a.offspring, &b.offspring)).or_default().push(*p);
        }
        conditional_from_groups(groups.into_values())
    }
}

fn conditional_from_groups(groups: impl Iterator<Item = Vec<f64>>) -> f64 {
    let mut h = 0.0;
    for g in groups {
        let w: f64 = g.iter().sum();
        if w > 0.0 {
            h += w * entropy_of(g.iter().map(|p| p / w));
        }
    }
    h
}

/// Law of a colored UGW tree truncated at radius `r >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct UgwLaw {
    radius: usize,
    alphabet: ColorAlphabet,
    pi: DegreeDistribution,
    atoms: BTreeMap<ColoredTree, f64>,
}

impl UgwLaw {
    pub fn new(
        radius: usize,
        alphabet: ColorAlphabet,
        pi: DegreeDistribution,
        atoms: impl IntoIterator<Item = (ColoredTree, f64)>,
    ) -> Result<Self> {
        if radius == 0 {
            return Err(Error::Shape("UGW laws need radius >= 1".into()));
        }
        let mut map = BTreeMap::new();
        for (t, p) in atoms {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidLaw(format!("entry {p} is not a probability")));
            }
            let ix = TreeIndex::build(&t.offspring, radius)?;
            if ix.len() != t.colors.len() {
                return Err(Error::ShapeMismatch(format!(
                    "tree has {} vertices, coloring has {}",
                    ix.len(),
                    t.colors.len()
                )));
            }
            if t.colors.iter().any(|&c| c as usize >= alphabet.len()) {
                return Err(Error::ShapeMismatch("color outside the alphabet".into()));
            }
            if t.offspring.iter().enumerate().any(|(i, &k)| {
                let bound = if i == 0 { pi.max_degree() } else { pi.max_degree().saturating_sub(1) };
                k as usize > bound
            }) {
                return Err(Error::Degree("tree exceeds the maximum degree".into()));
            }
            if p > 0.0 {
                *map.entry(t).or_insert(0.0) += p;
            }
        }
        Ok(Self { radius, alphabet, pi, atoms: map })
    }

    /// The regular-tree law `p` as a UGW law with `pi = Dirac(d)`.
    pub fn from_regular(p: &LocalLaw<f64>) -> Result<Self> {
        if p.kind() != ShapeKind::Ball || p.r() == 0 {
            return Err(Error::InvalidLaw("expected a ball law of radius >= 1".into()));
        }
        let shape = p.shape();
        let off: Vec<u8> =
            (0..shape.len()).filter(|&v| shape.depth(v) < p.r()).map(|v| shape.children(v).len() as u8).collect();
        let atoms = p.atoms().map(|(c, w)| (ColoredTree { offspring: off.clone(), colors: c }, w));
        Self::new(p.r(), p.alphabet().clone(), DegreeDistribution::dirac(p.d())?, atoms)
    }

    /// Colors drawn independently from `vertex`, tree from UGW(pi).
    pub fn iid(radius: usize, alphabet: ColorAlphabet, pi: DegreeDistribution, vertex: &[f64]) -> Result<Self> {
        let mut atoms = Vec::new();
        for (off, w) in ugw_shape_law(&pi, radius) {
            let n = TreeIndex::build(&off, radius)?.len();
            let mut colors = vec![0u8; n];
            loop {
                let pc: f64 = colors.iter().map(|&c| vertex[c as usize]).product();
                atoms.push((ColoredTree { offspring: off.clone(), colors: colors.clone() }, w * pc));
                let mut i = n;
                while i > 0 {
                    i -= 1;
                    colors[i] += 1;
                    if (colors[i] as usize) < alphabet.len() {
                        break;
                    }
                    colors[i] = 0;
                    if i == 0 {
                        i = usize::MAX;
                        break;
                    }
                }
                if i == usize::MAX {
                    break;
                }
            }
        }
        Self::new(radius, alphabet, pi, atoms)
    }

    pub fn radius(&self) -> usize {
        self.radius
    }
    pub fn alphabet(&self) -> &ColorAlphabet {
        &self.alphabet
    }
    pub fn degrees(&self) -> &DegreeDistribution {
        &self.pi
    }
    pub fn atoms(&self) -> &BTreeMap<ColoredTree, f64> {
        &self.atoms
    }
    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.atoms.values().copied())
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(self.atoms.values().copied())
    }

    pub fn shape_marginal(&self) -> BTreeMap<Vec<u8>, f64> {
        let mut out = BTreeMap::new();
        for (t, p) in &self.atoms {
            *out.entry(t.offspring.clone()).or_insert(0.0) += p;
        }
        out
    }

    /// Total variation between the shape marginal and UGW(pi) at this radius.
    pub fn shape_defect(&self) -> f64 {
        let want = ugw_shape_law(&self.pi, self.radius);
        let have = self.shape_marginal();
        let mut s = 0.0;
        for (k, p) in &want {
            s += (p - have.get(k).copied().unwrap_or(0.0)).abs();
        }
        for (k, p) in &have {
            if !want.contains_key(k) {
                s += p;
            }
        }
        s / 2.0
    }

    /// Largest change of an atom's probability under a swap of sibling subtrees.
    pub fn labeling_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (t, p) in &self.atoms {
            let n = Nested::from_tree(t, self.radius).expect("checked at construction");
            for s in n.swaps() {
                let q = self.atoms.get(&s.to_tree(self.radius)).copied().unwrap_or(0.0);
                worst = worst.max((p - q).abs());
            }
        }
        worst
    }

    /// Mass, shape marginal, random labeling and edge-flip invariance.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mass = self.total_mass();
        if (mass - 1.0).abs() > MASS_TOL {
            out.push(format!("mass = {mass}"));
        }
        let sd = self.shape_defect();
        if sd > MARGINAL_TOL {
            out.push(format!("shape marginal differs from UGW(pi) by {sd:e} in total variation"));
        }
        let ld = self.labeling_defect();
        if ld > MASS_TOL {
            out.push(format!("not invariant under relabeling of children (max deviation {ld:e})"));
        }
        let fd = self.edge_law().flip_defect();
        if fd > MARGINAL_TOL {
            out.push(format!("edge-rooted law not flip invariant (max deviation {fd:e})"));
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let sd = self.shape_defect();
        if sd > MARGINAL_TOL {
            return Err(Error::MarginalMismatch { tv: sd, tol: MARGINAL_TOL });
        }
        match self.validate().first() {
            Some(m) => Err(Error::InvalidLaw(m.clone())),
            None => Ok(()),
        }
    }

    /// Marginal at a smaller radius.
    pub fn restrict(&self, t: usize) -> Result<Self> {
        if t == 0 || t > self.radius {
            return Err(Error::NotSubShape(format!("radius {t} is not in 1..={}", self.radius)));
        }
        let mut atoms: BTreeMap<ColoredTree, f64> = BTreeMap::new();
        for (tree, p) in &self.atoms {
            let ix = TreeIndex::build(&tree.offspring, self.radius)?;
            let (cut, _) = ix.side(&tree.colors, 0, None, t);
            *atoms.entry(cut).or_insert(0.0) += p;
        }
        Ok(Self { radius: t, alphabet: self.alphabet.clone(), pi: self.pi.clone(), atoms })
    }

    /// The size-biased edge-rooted law on `E_r`.
    pub fn edge_law(&self) -> EdgeRootedLaw {
        let d = self.pi.mean();
        let r = self.radius;
        let mut atoms: BTreeMap<(ColoredTree, ColoredTree), f64> = BTreeMap::new();
        for (t, p) in &self.atoms {
            let ix = TreeIndex::build(&t.offspring, r).expect("checked at construction");
            for &j in &ix.children[0] {
                let (near, _) = ix.side(&t.colors, 0, Some(j), r - 1);
                let (far, _) = ix.side(&t.colors, j, Some(0), r - 1);
                *atoms.entry((near, far)).or_insert(0.0) += p / d;
            }
        }
        EdgeRootedLaw { radius: r, atoms }
    }

    /// Joint law of root degree and root color.
    pub fn root_law(&self) -> BTreeMap<(u8, u8), f64> {
        let mut out = BTreeMap::new();
        for (t, p) in &self.atoms {
            *out.entry((t.offspring[0], t.colors[0])).or_insert(0.0) += p;
        }
        out
    }

    /// `H(X | T)` for the ball.
    pub fn conditional_color_entropy(&self) -> f64 {
        let mut groups: BTreeMap<&[u8], Vec<f64>> = BTreeMap::new();
        for (t, p) in &self.atoms {
            groups.entry(&t.offspring).or_default().push(*p);
        }
        conditional_from_groups(groups.into_values())
    }
}

fn check_pi(p: &UgwLaw, pi: &DegreeDistribution) -> Result<()> {
    if p.pi.probs.len() != pi.probs.len() || p.pi.probs.iter().zip(&pi.probs).any(|(a, b)| (a - b).abs() > MASS_TOL) {
        return Err(Error::Degree("law was built for a different degree distribution".into()));
    }
    Ok(())
}

/// `H(X_{S_r}) - d/2 H(X->_{E_r}) - H(pi)`.
pub fn sigma_r_ugw(p: &UgwLaw, pi: &DegreeDistribution) -> Result<EntropyReport<f64>> {
    check_pi(p, pi)?;
    p.ensure_valid()?;
    let hs = p.entropy();
    let he = p.edge_law().entropy();
    let hpi = pi.entropy();
    let d = pi.mean();
    Ok(EntropyReport {
        value: hs - d / 2.0 * he - hpi,
        components: vec![("H_S".into(), hs), ("H_E_vec".into(), he), ("H_pi".into(), hpi), ("d".into(), d)],
        formula: Formula::Ugw,
    })
}

/// `H(X_{S_r} | T_{S_r}) - d/2 H(X->_{E_r} | T->_{E_r})`, computed by grouping atoms by shape.
pub fn sigma_r_ugw_conditional(p: &UgwLaw, pi: &DegreeDistribution) -> Result<EntropyReport<f64>> {
    check_pi(p, pi)?;
    p.ensure_valid()?;
    let hs = p.conditional_color_entropy();
    let he = p.edge_law().conditional_color_entropy();
    let d = pi.mean();
    Ok(EntropyReport {
        value: hs - d / 2.0 * he,
        components: vec![("H_S_given_T".into(), hs), ("H_E_vec_given_T".into(), he), ("d".into(), d)],
        formula: Formula::UgwConditional,
    })
}

/// `d/2 H(X->_{E_1}) - d H(X->_o) + H(X_o) - H(pi)`. Colors under the edge-rooted law
/// carry no tree data; `X_o` is the pair (root degree, root color).
pub fn sigma_e_ugw(p: &UgwLaw, pi: &DegreeDistribution) -> Result<EntropyReport<f64>> {
    check_pi(p, pi)?;
    p.ensure_valid()?;
    let d = pi.mean();
    let mut pair: BTreeMap<(u8, u8), f64> = BTreeMap::new();
    let mut vec_root: BTreeMap<u8, f64> = BTreeMap::new();
    for (t, w) in &p.atoms {
        let k = t.offspring[0] as usize;
        for j in 1..=k {
            *pair.entry((t.colors[0], t.colors[j])).or_insert(0.0) += w / d;
        }
        *vec_root.entry(t.colors[0]).or_insert(0.0) += w * k as f64 / d;
    }
    let he = entropy_of(pair.values().copied());
    let hvo = entropy_of(vec_root.values().copied());
    let ho = entropy_of(p.root_law().values().copied());
    let hpi = pi.entropy();
    Ok(EntropyReport {
        value: d / 2.0 * he - d * hvo + ho - hpi,
        components: vec![
            ("H_E1_vec".into(), he),
            ("H_o_vec".into(), hvo),
            ("H_o".into(), ho),
            ("H_pi".into(), hpi),
            ("d".into(), d),
        ],
        formula: Formula::UgwEdgeStar,
    })
}

/// Star-edge entropy of the vertex-Markov process with edge law `p` on UGW(pi).
/// Root colors are independent of degrees, so `H(X_o) = H(pi) + H(p_o)`.
pub fn sigma_e_ugw_pair(p: &LocalLaw<f64>, pi: &DegreeDistribution) -> Result<EntropyReport<f64>> {
    if p.kind() != ShapeKind::Edge || p.r() != 1 {
        return Err(Error::InvalidLaw("expected an edge law on E_1".into()));
    }
    p.ensure_valid()?;
    let d = pi.mean();
    let he = entropy_of(p.table().iter().map(|(_, w)| w));
    let hvo = entropy_of(p.root_marginal());
    let hpi = pi.entropy();
    let ho = hpi + hvo;
    Ok(EntropyReport {
        value: d / 2.0 * he - d * hvo + ho - hpi,
        components: vec![
            ("H_E1_vec".into(), he),
            ("H_o_vec".into(), hvo),
            ("H_o".into(), ho),
            ("H_pi".into(), hpi),
            ("d".into(), d),
        ],
        formula: Formula::UgwEdgeStar,
    })
}

/// Same value through the regular edge-star formula with real mean degree.
pub fn sigma_e_ugw_pair_value(p: &LocalLaw<f64>, pi: &DegreeDistribution) -> f64 {
    let he = entropy_of(p.table().iter().map(|(_, w)| w));
    let hvo = entropy_of(p.root_marginal());
    edge_star(he, hvo, pi.mean())
}

type NewPart = (Vec<u8>, Vec<u8>);

/// Markov process on UGW(pi) built from a ball law (r-Markov) or an edge pair law
/// (vertex-Markov, converted to its radius-one ball law first).
#[derive(Debug, Clone)]
pub struct UgwMarkovProcess {
    ball: UgwLaw,
    rows: HashMap<(ColoredTree, ColoredTree), Vec<(NewPart, f64)>>,
}

/// Radius-one law of the vertex-Markov process with edge law `p` on UGW(pi):
/// root color from the edge marginal, child colors from the edge kernel.
pub fn ugw_vertex_markov_star(p: &LocalLaw<f64>, pi: &DegreeDistribution) -> Result<UgwLaw> {
    if p.kind() != ShapeKind::Edge || p.r() != 1 {
        return Err(Error::InvalidLaw("a vertex-Markov process needs an edge law on E_1".into()));
    }
    p.ensure_valid()?;
    let root = p.root_marginal();
    let m = p.alphabet().len();
    let mut atoms = Vec::new();
    for k in pi.support() {
        let n = 1 + k;
        let total = (m as u64).pow(n as u32);
        for idx in 0..total {
            let mut colors = vec![0u8; n];
            let mut x = idx;
            for slot in colors.iter_mut().rev() {
                *slot = (x % m as u64) as u8;
                x /= m as u64;
            }
            let a = colors[0] as usize;
            if root[a] == 0.0 {
                continue;
            }
            let mut w = pi.prob(k) * root[a];
            for &b in &colors[1..] {
                w *= p.prob(&[colors[0], b]) / root[a];
            }
            if w > 0.0 {
                atoms.push((ColoredTree { offspring: vec![k as u8], colors }, w));
            }
        }
    }
    UgwLaw::new(1, p.alphabet().clone(), pi.clone(), atoms)
}

impl UgwMarkovProcess {
    pub fn r_markov(p: &UgwLaw) -> Result<Self> {
        p.ensure_valid()?;
        let r = p.radius;
        let d = p.pi.mean();
        let mut rows: HashMap<(ColoredTree, ColoredTree), Vec<(NewPart, f64)>> = HashMap::new();
        for (t, w) in &p.atoms {
            let ix = TreeIndex::build(&t.offspring, r)?;
            for &j in &ix.children[0] {
                let (full, inner) = ix.side(&t.colors, 0, Some(j), r);
                let (near, _) = ix.side(&t.colors, 0, Some(j), r - 1);
                let (far, _) = ix.side(&t.colors, j, Some(0), r - 1);
                let cols = near.colors.len();
                let new = (full.offspring[near.offspring.len()..].to_vec(), full.colors[cols..].to_vec());
                debug_assert_eq!(full.offspring.len(), inner);
                let row = rows.entry((near, far)).or_default();
                match row.iter_mut().find(|(n, _)| *n == new) {
                    Some(e) => e.1 += w / d,
                    None => row.push((new, w / d)),
                }
            }
        }
        for row in rows.values_mut() {
            let s: f64 = row.iter().map(|(_, w)| w).sum();
            for e in row.iter_mut() {
                e.1 /= s;
            }
            row.sort_by(|a, b| a.0.cmp(&b.0));
        }
        Ok(Self { ball: p.clone(), rows })
    }

    pub fn vertex_markov(p: &LocalLaw<f64>, pi: &DegreeDistribution) -> Result<Self> {
        Self::r_markov(&ugw_vertex_markov_star(p, pi)?)
    }

    pub fn ball_law(&self) -> &UgwLaw {
        &self.ball
    }

    pub fn radius(&self) -> usize {
        self.ball.radius
    }

    /// Conditioning configurations reached by the defining law.
    pub fn used_rows(&self) -> usize {
        self.rows.len()
    }

    fn step_keys(&self, t: &ColoredTree, depth: usize) -> Result<(TreeIndex, Vec<(ColoredTree, ColoredTree)>)> {
        let r = self.radius();
        let ix = TreeIndex::build(&t.offspring, depth)?;
        let keys = (0..ix.len())
            .filter(|&v| ix.depth[v] + r == depth + 1)
            .map(|v| {
                let u = ix.parent[v].expect("centers are below the root");
                let (near, _) = ix.side(&t.colors, v, Some(u), r - 1);
                let (far, _) = ix.side(&t.colors, u, Some(v), r - 1);
                (near, far)
            })
            .collect();
        Ok((ix, keys))
    }

    fn row(&self, key: &(ColoredTree, ColoredTree)) -> Result<&[(NewPart, f64)]> {
        self.rows
            .get(key)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Domain("reached a conditioning configuration of probability zero".into()))
    }

    /// Exact law at radius `t >= r`.
    pub fn extend_marginal(&self, t: usize) -> Result<UgwLaw> {
        let r = self.radius();
        if t < r {
            return Err(Error::Domain(format!("extension radius {t} is below the defining radius {r}")));
        }
        let mut cur: Vec<(ColoredTree, f64)> = self.ball.atoms.iter().map(|(k, v)| (k.clone(), *v)).collect();
        for depth in r..t {
            let mut next = Vec::new();
            for (tree, w) in &cur {
                let (_, keys) = self.step_keys(tree, depth)?;
                let rows: Vec<&[(NewPart, f64)]> = keys.iter().map(|k| self.row(k)).collect::<Result<_>>()?;
                let mut idx = vec![0usize; rows.len()];
                'odometer: loop {
                    let mut off = tree.offspring.clone();
                    let mut col = tree.colors.clone();
                    let mut pr = *w;
                    for (j, row) in rows.iter().enumerate() {
                        let ((o, c), q) = &row[idx[j]];
                        off.extend_from_slice(o);
                        col.extend_from_slice(c);
                        pr *= q;
                    }
                    next.push((ColoredTree { offspring: off, colors: col }, pr));
                    if next.len() > UGW_ATOM_CAP {
                        return Err(Error::Cap(format!("more than {UGW_ATOM_CAP} atoms; use sampling")));
                    }
                    let mut j = rows.len();
                    loop {
                        if j == 0 {
                            break 'odometer;
                        }
                        j -= 1;
                        idx[j] += 1;
                        if idx[j] < rows[j].len() {
                            continue 'odometer;
                        }
                        idx[j] = 0;
                    }
                }
            }
            cur = next;
        }
        UgwLaw::new(t, self.ball.alphabet.clone(), self.ball.pi.clone(), cur)
    }

    /// One colored tree of radius `t >= r`.
    pub fn sample<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> Result<ColoredTree> {
        let r = self.radius();
        if t < r {
            return Err(Error::Domain(format!("sampling radius {t} is below the defining radius {r}")));
        }
        let atoms: Vec<(&ColoredTree, f64)> = self.ball.atoms.iter().map(|(k, v)| (k, *v)).collect();
        let mut tree = pick(&atoms, rng).clone();
        for depth in r..t {
            let (_, keys) = self.step_keys(&tree, depth)?;
            for k in &keys {
                let row = self.row(k)?;
                let choices: Vec<(&NewPart, f64)> = row.iter().map(|(n, w)| (n, *w)).collect();
                let (o, c) = pick(&choices, rng);
                tree.offspring.extend_from_slice(o);
                tree.colors.extend_from_slice(c);
            }
        }
        Ok(tree)
    }

    pub fn sample_many(&self, t: usize, count: usize, seed: u64) -> Result<Vec<ColoredTree>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.sample(t, &mut rng)).collect()
    }
}

fn pick<'a, X, R: Rng + ?Sized>(items: &[(&'a X, f64)], rng: &mut R) -> &'a X {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (x, w) in items {
        acc += w;
        if u < acc {
            return x;
        }
    }
    items.last().expect("non-empty").0
}

/// Parse a UGW law file:
///
/// ```text
/// r=1
/// alphabet=0,1
/// kind=ugw
/// pi=1:0.5,3:0.5
/// 3;0,1,1,1 0.0625
/// ```
pub fn parse_ugw_law(text: &str) -> Result<UgwLaw> {
    let (headers, body) = split_lines(text)?;
    let r = headers.parse_usize("r")?;
    let alphabet = parse_alphabet(&headers)?;
    if let Some(k) = headers.get("kind") {
        if k != "ugw" {
            return Err(Error::Parse { line: headers.values["kind"].0, msg: "kind must be ugw".into() });
        }
    }
    let pi_line = headers.values.get("pi").map(|(l, _)| *l).unwrap_or(0);
    let pi = DegreeDistribution::parse(headers.require("pi")?)
        .map_err(|e| Error::Parse { line: pi_line, msg: e.to_string() })?;
    let mut atoms = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (line, text) in body {
        let mut parts = text.split_whitespace();
        let (Some(tree), Some(p), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse { line, msg: "expected `<offspring>;<coloring> <probability>`".into() });
        };
        let (off, col) =
            tree.split_once(';').ok_or_else(|| Error::Parse { line, msg: "missing `;` after offspring".into() })?;
        let offspring = off
            .split(',')
            .map(|s| s.trim().parse::<u8>().map_err(|_| Error::Parse { line, msg: format!("bad offspring {s:?}") }))
            .collect::<Result<Vec<u8>>>()?;
        let colors = parse_coloring(col, &alphabet, line)?;
        let t = ColoredTree { offspring, colors };
        if !seen.insert(t.clone()) {
            return Err(Error::Parse { line, msg: "repeated atom".into() });
        }
        atoms.push((t, parse_prob::<f64>(p, line)?));
    }
    UgwLaw::new(r, alphabet, pi, atoms)
}

pub fn write_ugw_law(p: &UgwLaw) -> String {
    let mut s = format!(
        "r={}\nalphabet={}\nkind=ugw\npi={}\n",
        p.radius,
        p.alphabet.symbols().join(","),
        p.pi.format()
    );
    for (t, w) in &p.atoms {
        let off: Vec<String> = t.offspring.iter().map(|k| k.to_string()).collect();
        s.push_str(&format!("{};{} {}\n", off.join(","), format_coloring(&t.colors, &p.alphabet), fmt17(*w)));
    }
    s
}
