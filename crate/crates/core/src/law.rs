//! Finite marginal laws on tree neighborhoods and their couplings.

use crate::alphabet::ColorAlphabet;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::shape::{BallShape, Coder, ShapeKind};
use crate::table::Table;
use std::collections::{HashSet, VecDeque};

/// Normalization tolerance.
pub const MASS_TOL: f64 = 1e-12;
/// Tolerance for marginal and invariance comparisons.
pub const MARGINAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Mass,
    Range,
    Automorphism,
    EdgeFlip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Worst absolute discrepancy observed.
    pub discrepancy: f64,
    pub message: String,
}

/// Probability table over colorings of a ball `S_r` or edge neighborhood `E_r`.
///
/// Ball laws are meant to live in `I_{d,r}(M)` and edge laws in the flip-invariant
/// class; construction does not enforce this, `validate` reports it.
#[derive(Debug, Clone)]
pub struct LocalLaw<T: Real = f64> {
    shape: BallShape,
    alphabet: ColorAlphabet,
    coder: Coder,
    table: Table<T>,
}

impl<T: Real> PartialEq for LocalLaw<T> {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.alphabet == other.alphabet && self.table == other.table
    }
}

impl<T: Real> LocalLaw<T> {
    pub fn from_table(shape: BallShape, alphabet: ColorAlphabet, table: Table<T>) -> Result<Self> {
        let coder = Coder::new(alphabet.len(), shape.len())?;
        if coder.size() != table.size() {
            return Err(Error::ShapeMismatch(format!(
                "table has {} slots, shape needs {}",
                table.size(),
                coder.size()
            )));
        }
        for (_, x) in table.iter() {
            if !x.is_finite() {
                return Err(Error::InvalidLaw(format!("non-finite entry {x}")));
            }
        }
        Ok(Self { shape, alphabet, coder, table })
    }

    pub fn from_atoms<I>(shape: BallShape, alphabet: ColorAlphabet, atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u8>, T)>,
    {
        let coder = Coder::new(alphabet.len(), shape.len())?;
        let mut table = Table::zeros(coder.size());
        for (colors, p) in atoms {
            if colors.len() != shape.len() {
                return Err(Error::ShapeMismatch(format!(
                    "coloring has {} entries, shape has {} vertices",
                    colors.len(),
                    shape.len()
                )));
            }
            if colors.iter().any(|&c| c as usize >= alphabet.len()) {
                return Err(Error::ShapeMismatch("color outside the alphabet".into()));
            }
            table.add(coder.encode(&colors), p);
        }
        Self::from_table(shape, alphabet, table)
    }

    pub fn from_fn(shape: BallShape, alphabet: ColorAlphabet, f: impl Fn(&[u8]) -> T) -> Result<Self> {
        let coder = Coder::new(alphabet.len(), shape.len())?;
        let mut buf = vec![0u8; shape.len()];
        let table = Table::from_entries(
            coder.size(),
            (0..coder.size()).map(|i| {
                coder.decode_into(i, &mut buf);
                (i, f(&buf))
            }),
        );
        Self::from_table(shape, alphabet, table)
    }

    /// Independent colors with the given one-vertex law.
    pub fn product(shape: BallShape, alphabet: ColorAlphabet, vertex: &[T]) -> Result<Self> {
        if vertex.len() != alphabet.len() {
            return Err(Error::ShapeMismatch("vertex law length differs from alphabet".into()));
        }
        let v = vertex.to_vec();
        Self::from_fn(shape, alphabet, move |c| c.iter().map(|&x| v[x as usize]).fold(T::one(), |a, b| a * b))
    }

    pub fn uniform_product(shape: BallShape, alphabet: ColorAlphabet) -> Result<Self> {
        let m = alphabet.len();
        let v = vec![T::one() / T::lit(m as f64); m];
        Self::product(shape, alphabet, &v)
    }

    pub fn point_mass(shape: BallShape, alphabet: ColorAlphabet, colors: Vec<u8>) -> Result<Self> {
        Self::from_atoms(shape, alphabet, [(colors, T::one())])
    }

    pub fn shape(&self) -> &BallShape {
        &self.shape
    }
    pub fn alphabet(&self) -> &ColorAlphabet {
        &self.alphabet
    }
    pub fn kind(&self) -> ShapeKind {
        self.shape.kind()
    }
    pub fn coder(&self) -> &Coder {
        &self.coder
    }
    pub fn table(&self) -> &Table<T> {
        &self.table
    }
    pub fn d(&self) -> usize {
        self.shape.d()
    }
    pub fn r(&self) -> usize {
        self.shape.r()
    }

    pub fn prob(&self, colors: &[u8]) -> T {
        self.table.get(self.coder.encode(colors))
    }

    /// Non-zero atoms as `(coloring, probability)` in lexicographic order.
    pub fn atoms(&self) -> impl Iterator<Item = (Vec<u8>, T)> + '_ {
        self.table.iter().map(move |(i, p)| (self.coder.decode(i), p))
    }

    /// Probabilities of the non-zero atoms.
    pub fn probs(&self) -> Vec<T> {
        self.table.iter().map(|(_, p)| p).collect()
    }

    pub fn total_mass(&self) -> T {
        self.table.total()
    }

    pub fn normalized(&self) -> Result<Self> {
        let total = self.total_mass();
        if total <= T::zero() {
            return Err(Error::ZeroMass);
        }
        let mut out = self.clone();
        out.table.scale(T::one() / total);
        Ok(out)
    }

    pub fn cast<U: Real>(&self) -> LocalLaw<U> {
        LocalLaw {
            shape: self.shape.clone(),
            alphabet: self.alphabet.clone(),
            coder: self.coder.clone(),
            table: self.table.map_values(|x| U::lit(x.to_f64_lossy())),
        }
    }

    /// Relabel vertices: vertex `v` of the result carries the color of `perm^{-1}(v)`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut src = vec![0u8; self.shape.len()];
        let mut dst = vec![0u8; self.shape.len()];
        let table = Table::from_entries(
            self.coder.size(),
            self.table.iter().map(|(i, p)| {
                self.coder.decode_into(i, &mut src);
                for (v, &c) in src.iter().enumerate() {
                    dst[perm[v]] = c;
                }
                (self.coder.encode(&dst), p)
            }),
        );
        Self { table, ..self.clone() }
    }

    /// Largest entrywise difference between two tables on the same space.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0f64;
        for (i, p) in self.table.iter() {
            worst = worst.max((p - other.table.get(i)).abs().to_f64_lossy());
        }
        for (i, q) in other.table.iter() {
            worst = worst.max((q - self.table.get(i)).abs().to_f64_lossy());
        }
        worst
    }

    /// Total variation between two laws on the same shape and alphabet.
    pub fn tv(&self, other: &Self) -> Result<T> {
        if self.shape != other.shape || self.alphabet != other.alphabet {
            return Err(Error::ShapeMismatch("laws live on different spaces".into()));
        }
        let mut s = T::zero();
        for (i, p) in self.table.iter() {
            s += (p - other.table.get(i)).abs();
        }
        for (i, q) in other.table.iter() {
            if self.table.get(i) == T::zero() {
                s += q;
            }
        }
        Ok(s / T::lit(2.0))
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mass = self.total_mass();
        if (mass - T::one()).abs() > T::tol(MASS_TOL) {
            out.push(Violation {
                kind: ViolationKind::Mass,
                discrepancy: (mass - T::one()).abs().to_f64_lossy(),
                message: format!("mass = {mass}"),
            });
        }
        let mut worst = T::zero();
        for (_, p) in self.table.iter() {
            if p < T::zero() {
                worst = worst.max(-p);
            } else if p > T::one() {
                worst = worst.max(p - T::one());
            }
        }
        if worst > T::zero() {
            out.push(Violation {
                kind: ViolationKind::Range,
                discrepancy: worst.to_f64_lossy(),
                message: format!("entry outside [0,1] by {worst}"),
            });
        }
        let tol = T::tol(MASS_TOL).to_f64_lossy();
        let aut = self
            .shape
            .automorphism_generators()
            .iter()
            .map(|g| self.max_abs_diff(&self.permuted(g)))
            .fold(0.0, f64::max);
        if aut > tol {
            out.push(Violation {
                kind: ViolationKind::Automorphism,
                discrepancy: aut,
                message: format!("not invariant under automorphisms (max deviation {aut:e})"),
            });
        }
        let flip_dev = match self.kind() {
            ShapeKind::Edge => {
                let f = self.shape.edge_flip().expect("edge shape");
                Some(self.max_abs_diff(&self.permuted(&f)))
            }
            ShapeKind::Ball if self.r() >= 1 => self.restrict_to_edge().ok().map(|e| {
                let f = e.shape.edge_flip().expect("edge shape");
                e.max_abs_diff(&e.permuted(&f))
            }),
            ShapeKind::Ball => None,
        };
        if let Some(dev) = flip_dev {
            if dev > tol {
                out.push(Violation {
                    kind: ViolationKind::EdgeFlip,
                    discrepancy: dev,
                    message: format!("root-edge restriction not flip invariant (max deviation {dev:e})"),
                });
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Error unless the law is valid.
    pub fn ensure_valid(&self) -> Result<()> {
        match self.validate().first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidLaw(v.message.clone())),
        }
    }

    /// Marginal on a sub-shape.
    pub fn restrict(&self, target: &BallShape) -> Result<Self> {
        let pos = target.positions_in(&self.shape)?;
        let coder = Coder::new(self.alphabet.len(), target.len())?;
        let mut src = vec![0u8; self.shape.len()];
        let mut dst = vec![0u8; target.len()];
        let table = Table::from_entries(
            coder.size(),
            self.table.iter().map(|(i, p)| {
                self.coder.decode_into(i, &mut src);
                for (k, &v) in pos.iter().enumerate() {
                    dst[k] = src[v];
                }
                (coder.encode(&dst), p)
            }),
        );
        Ok(Self { shape: target.clone(), alphabet: self.alphabet.clone(), coder, table })
    }

    /// Marginal on `E_r` (same radius).
    pub fn restrict_to_edge(&self) -> Result<Self> {
        let e = BallShape::edge(self.d(), self.r().max(1))?;
        self.restrict(&e)
    }

    /// Marginal on `E_t`.
    pub fn restrict_to_edge_radius(&self, t: usize) -> Result<Self> {
        self.restrict(&BallShape::edge(self.d(), t)?)
    }

    /// Marginal on `S_t`.
    pub fn restrict_to_ball(&self, t: usize) -> Result<Self> {
        self.restrict(&BallShape::ball(self.d(), t)?)
    }

    pub fn restrict_to_root(&self) -> Result<Self> {
        self.restrict(&BallShape::root(self.d())?)
    }

    /// Law of the root color as a vector over the alphabet.
    pub fn root_marginal(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.alphabet.len()];
        let stride = self.coder.size() / self.alphabet.len() as u64;
        for (i, p) in self.table.iter() {
            out[(i / stride) as usize] += p;
        }
        out
    }

    /// Orbit average over the shape's symmetry group, normalized.
    pub fn symmetrize(&self) -> Result<Self> {
        if self.table.iter().any(|(_, p)| p < T::zero()) {
            return Err(Error::InvalidLaw("negative entry".into()));
        }
        let total = self.total_mass();
        if total <= T::zero() {
            return Err(Error::ZeroMass);
        }
        let gens = self.shape.symmetry_generators();
        let mut seen: HashSet<u64> = HashSet::new();
        let mut out = Table::zeros(self.coder.size());
        let mut src = vec![0u8; self.shape.len()];
        let mut dst = vec![0u8; self.shape.len()];
        let support: Vec<u64> = self.table.iter().map(|(i, _)| i).collect();
        for start in support {
            if seen.contains(&start) {
                continue;
            }
            let mut orbit = vec![start];
            seen.insert(start);
            let mut queue = VecDeque::from([start]);
            while let Some(x) = queue.pop_front() {
                self.coder.decode_into(x, &mut src);
                for g in &gens {
                    for (v, &c) in src.iter().enumerate() {
                        dst[g[v]] = c;
                    }
                    let y = self.coder.encode(&dst);
                    if seen.insert(y) {
                        orbit.push(y);
                        queue.push_back(y);
                    }
                }
            }
            let mass: T = orbit.iter().map(|&i| self.table.get(i)).sum();
            let each = mass / (total * T::lit(orbit.len() as f64));
            for &i in &orbit {
                out.set(i, each);
            }
        }
        Ok(Self { table: out, ..self.clone() })
    }
}

/// Joint law of two colorings of the same shape, with its two marginals.
#[derive(Debug, Clone)]
pub struct CouplingLaw<T: Real = f64> {
    joint: LocalLaw<T>,
    first: LocalLaw<T>,
    second: LocalLaw<T>,
}

impl<T: Real> CouplingLaw<T> {
    pub fn joint(&self) -> &LocalLaw<T> {
        &self.joint
    }
    pub fn first(&self) -> &LocalLaw<T> {
        &self.first
    }
    pub fn second(&self) -> &LocalLaw<T> {
        &self.second
    }
    pub fn into_joint(self) -> LocalLaw<T> {
        self.joint
    }
}

fn project<T: Real>(joint: &LocalLaw<T>, alphabet: &ColorAlphabet, m2: usize, first: bool) -> Result<LocalLaw<T>> {
    let shape = joint.shape().clone();
    let atoms = joint.atoms().map(|(c, p)| {
        let proj = c
            .iter()
            .map(|&x| if first { x / m2 as u8 } else { x % m2 as u8 })
            .collect::<Vec<u8>>();
        (proj, p)
    });
    LocalLaw::from_atoms(shape, alphabet.clone(), atoms)
}

/// First and second coordinate projections of a law over a product alphabet.
pub fn project_pair<T: Real>(
    joint: &LocalLaw<T>,
    a1: &ColorAlphabet,
    a2: &ColorAlphabet,
) -> Result<(LocalLaw<T>, LocalLaw<T>)> {
    if joint.alphabet().len() != a1.len() * a2.len() {
        return Err(Error::ShapeMismatch("joint alphabet is not the product alphabet".into()));
    }
    Ok((project(joint, a1, a2.len(), true)?, project(joint, a2, a2.len(), false)?))
}

/// Build and check a coupling of `p` and `q`.
pub fn couple<T: Real>(p: &LocalLaw<T>, q: &LocalLaw<T>, joint: LocalLaw<T>) -> Result<CouplingLaw<T>> {
    if p.shape() != q.shape() || joint.shape() != p.shape() {
        return Err(Error::ShapeMismatch("coupled laws must share a shape".into()));
    }
    let (j1, j2) = project_pair(&joint, p.alphabet(), q.alphabet())?;
    let tv = j1.tv(p)?.max(j2.tv(q)?).to_f64_lossy();
    if tv > MARGINAL_TOL {
        return Err(Error::MarginalMismatch { tv, tol: MARGINAL_TOL });
    }
    if let Some(v) = joint.validate().into_iter().find(|v| v.kind != ViolationKind::Mass || v.discrepancy > MARGINAL_TOL) {
        return Err(Error::Invariance(v.message));
    }
    Ok(CouplingLaw { joint, first: p.clone(), second: q.clone() })
}

/// Mass `p(x)` on the pair `(x, x)`.
pub fn diagonal_coupling<T: Real>(p: &LocalLaw<T>) -> Result<CouplingLaw<T>> {
    let alpha = p.alphabet().product(p.alphabet())?;
    let m = p.alphabet().len() as u8;
    let joint = LocalLaw::from_atoms(
        p.shape().clone(),
        alpha,
        p.atoms().map(|(c, w)| (c.iter().map(|&x| x * m + x).collect(), w)),
    )?;
    couple(p, p, joint)
}

/// Product coupling `p (x) q`.
pub fn independent_coupling<T: Real>(p: &LocalLaw<T>, q: &LocalLaw<T>) -> Result<CouplingLaw<T>> {
    let alpha = p.alphabet().product(q.alphabet())?;
    let m2 = q.alphabet().len() as u8;
    let qa: Vec<(Vec<u8>, T)> = q.atoms().collect();
    let mut atoms = Vec::new();
    for (x, px) in p.atoms() {
        for (y, qy) in &qa {
            let c: Vec<u8> = x.iter().zip(y).map(|(&a, &b)| a * m2 + b).collect();
            atoms.push((c, px * *qy));
        }
    }
    let joint = LocalLaw::from_atoms(p.shape().clone(), alpha, atoms)?;
    couple(p, q, joint)
}
