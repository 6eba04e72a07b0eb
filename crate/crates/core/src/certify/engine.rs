//! Bounds for `sup_nu  alpha * Hmax(nu) - beta * H(nu) + <c, nu>` over an affine
//! slice of the simplex, where `Hmax(nu)` is the largest tilted entropy of an
//! inner table whose marginal constraints depend linearly on `nu`.
//!
//! Any dual vector `lambda` gives `Hmax(nu) <= LSE(tilt + A^T lambda) - <lambda, b(nu)>`,
//! which is affine in `nu`. Together with chord bounds on `-x ln x` this yields
//! an affine upper bound on every box of `nu`, refined by branch and bound.

use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

/// Right-hand side of an inner constraint row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Const(f64),
    Nu(usize),
}

/// Inner maximum-entropy problem. Rows come in groups; every atom lies in exactly
/// one row of each group.
#[derive(Debug, Clone)]
pub struct Slice {
    /// `atom_rows[z][g]` is the row of group `g` containing atom `z`.
    pub atom_rows: Vec<Vec<u32>>,
    pub groups: Vec<Vec<usize>>,
    pub targets: Vec<Target>,
    pub tilt: Vec<f64>,
}

impl Slice {
    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn rhs(&self, nu: &[f64]) -> Vec<f64> {
        self.targets
            .iter()
            .map(|t| match *t {
                Target::Const(x) => x,
                Target::Nu(e) => nu[e],
            })
            .collect()
    }

    fn logits(&self, lam: &[f64]) -> Vec<f64> {
        self.atom_rows
            .iter()
            .zip(&self.tilt)
            .map(|(rows, t)| t + rows.iter().map(|&i| lam[i as usize]).sum::<f64>())
            .collect()
    }
}

fn lse(u: &[f64]) -> (f64, Vec<f64>) {
    let m = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = u.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = w.iter().sum();
    (m + s.ln(), w.into_iter().map(|x| x / s).collect())
}

#[derive(Debug, Clone)]
pub struct Dual {
    pub phi: f64,
    pub lambda: Vec<f64>,
    pub converged: bool,
}

fn dual_value(s: &Slice, lam: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    let (l, probs) = lse(&s.logits(lam));
    (l - lam.iter().zip(b).map(|(x, y)| x * y).sum::<f64>(), probs)
}

/// Cholesky solve of `(h + ridge I) x = rhs`; `h` is symmetric positive semidefinite.
fn cholesky_solve(h: &[f64], n: usize, rhs: &[f64]) -> Vec<f64> {
    let scale = (0..n).map(|i| h[i * n + i]).fold(0.0, f64::max).max(1e-300);
    let mut ridge = 1e-12 * scale;
    loop {
        let mut l = vec![0.0; n * n];
        let mut ok = true;
        'outer: for i in 0..n {
            for j in 0..=i {
                let mut s = h[i * n + j] + if i == j { ridge } else { 0.0 };
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 {
                        ok = false;
                        break 'outer;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        if ok {
            let mut y = vec![0.0; n];
            for i in 0..n {
                let mut s = rhs[i];
                for k in 0..i {
                    s -= l[i * n + k] * y[k];
                }
                y[i] = s / l[i * n + i];
            }
            let mut x = vec![0.0; n];
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= l[k * n + i] * x[k];
                }
                x[i] = s / l[i * n + i];
            }
            return x;
        }
        ridge = (ridge * 100.0).max(1e-14);
    }
}

/// Damped Newton on the dual. The returned `phi` is a valid upper bound on the
/// tilted entropy of every feasible inner table, converged or not.
pub fn solve_dual(s: &Slice, b: &[f64], lam0: &[f64], max_iter: usize) -> Dual {
    let n = s.n_rows();
    let mut lam = lam0.to_vec();
    let (mut phi, mut probs) = dual_value(s, &lam, b);
    let mut converged = false;
    for _ in 0..max_iter {
        let mut r = vec![0.0; n];
        for (z, rows) in s.atom_rows.iter().enumerate() {
            for &i in rows {
                r[i as usize] += probs[z];
            }
        }
        let grad: Vec<f64> = r.iter().zip(b).map(|(x, y)| x - y).collect();
        if grad.iter().all(|g| g.abs() < 1e-15) {
            converged = true;
            break;
        }
        let mut h = vec![0.0; n * n];
        for (z, rows) in s.atom_rows.iter().enumerate() {
            let p = probs[z];
            if p == 0.0 {
                continue;
            }
            for &i in rows {
                for &j in rows {
                    h[i as usize * n + j as usize] += p;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                h[i * n + j] -= r[i] * r[j];
            }
        }
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let step = cholesky_solve(&h, n, &neg);
        let slope: f64 = grad.iter().zip(&step).map(|(g, d)| g * d).sum();
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let trial: Vec<f64> = lam.iter().zip(&step).map(|(l, d)| l + t * d).collect();
            let (v, pr) = dual_value(s, &trial, b);
            if v.is_finite() && v <= phi + 1e-4 * t * slope.min(0.0) {
                if v < phi {
                    moved = true;
                }
                lam = trial;
                phi = v;
                probs = pr;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            let gmax = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
            converged = gmax < 1e-11;
            break;
        }
    }
    Dual { phi, lambda: lam, converged }
}

/// Iterative proportional fitting towards the tilted maximum-entropy table.
/// Returns `None` when the constraints look infeasible.
pub fn ipf(s: &Slice, b: &[f64], max_sweeps: usize, tol: f64) -> Option<Vec<f64>> {
    let (_, mut z) = lse(&s.tilt);
    let n = s.n_rows();
    for _ in 0..max_sweeps {
        for (g, rows_in_g) in s.groups.iter().enumerate() {
            let mut r = vec![0.0; n];
            for (k, rows) in s.atom_rows.iter().enumerate() {
                r[rows[g] as usize] += z[k];
            }
            for &i in rows_in_g {
                if r[i] == 0.0 && b[i] > 0.0 {
                    return None;
                }
            }
            for (k, rows) in s.atom_rows.iter().enumerate() {
                let i = rows[g] as usize;
                z[k] = if b[i] <= 0.0 { 0.0 } else { z[k] * b[i] / r[i] };
            }
        }
        let mut r = vec![0.0; n];
        for (k, rows) in s.atom_rows.iter().enumerate() {
            for &i in rows {
                r[i as usize] += z[k];
            }
        }
        let res = r.iter().zip(b).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        if res < tol {
            return Some(z);
        }
    }
    None
}

/// Affine parametrization `nu = nu0 + N theta` of the outer constraints, with
/// `theta` ranging over a box of free entries.
#[derive(Debug, Clone)]
pub struct NuSpace {
    pub n: usize,
    pub nu0: Vec<f64>,
    /// Row-major `n x k`.
    pub basis: Vec<f64>,
    pub k: usize,
    pub free: Vec<usize>,
    pub theta_hi: Vec<f64>,
    /// A strictly positive feasible point.
    pub interior: Vec<f64>,
    /// Marginal groups (entries, target) used for random feasible starts.
    pub groups: Vec<Vec<(Vec<usize>, f64)>>,
    pub sym_pairs: Vec<(usize, usize)>,
}

impl NuSpace {
    /// `eqs` are rows `sum coef * nu_e = rhs`; `entry_hi` bounds each entry.
    pub fn new(
        n: usize,
        eqs: &[(Vec<(usize, f64)>, f64)],
        entry_hi: Vec<f64>,
        interior: Vec<f64>,
        groups: Vec<Vec<(Vec<usize>, f64)>>,
        sym_pairs: Vec<(usize, usize)>,
    ) -> Option<Self> {
        let w = n + 1;
        let mut m: Vec<Vec<f64>> = eqs
            .iter()
            .map(|(row, rhs)| {
                let mut v = vec![0.0; w];
                for &(e, c) in row {
                    v[e] += c;
                }
                v[n] = *rhs;
                v
            })
            .collect();
        let mut pivots = Vec::new();
        let mut r = 0;
        for col in 0..n {
            if r == m.len() {
                break;
            }
            let (best, val) = (r..m.len())
                .map(|i| (i, m[i][col].abs()))
                .fold((r, 0.0), |a, b| if b.1 > a.1 { b } else { a });
            if val < 1e-10 {
                continue;
            }
            m.swap(r, best);
            let p = m[r][col];
            for x in m[r].iter_mut() {
                *x /= p;
            }
            for i in 0..m.len() {
                if i != r && m[i][col] != 0.0 {
                    let f = m[i][col];
                    for j in 0..w {
                        m[i][j] -= f * m[r][j];
                    }
                }
            }
            pivots.push(col);
            r += 1;
        }
        if m[r..].iter().any(|row| row[n].abs() > 1e-9) {
            return None;
        }
        let is_pivot: Vec<bool> = (0..n).map(|c| pivots.contains(&c)).collect();
        let free: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let k = free.len();
        let mut nu0 = vec![0.0; n];
        let mut basis = vec![0.0; n * k];
        for (row, &pc) in pivots.iter().enumerate() {
            nu0[pc] = m[row][n];
            for (j, &fc) in free.iter().enumerate() {
                basis[pc * k + j] = -m[row][fc];
            }
        }
        for (j, &fc) in free.iter().enumerate() {
            basis[fc * k + j] = 1.0;
        }
        let theta_hi = free.iter().map(|&f| entry_hi[f]).collect();
        Some(Self { n, nu0, basis, k, free, theta_hi, interior, groups, sym_pairs })
    }

    pub fn nu(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|e| self.nu0[e] + (0..self.k).map(|j| self.basis[e * self.k + j] * theta[j]).sum::<f64>())
            .collect()
    }

    pub fn theta(&self, nu: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&f| nu[f]).collect()
    }

    /// Sinkhorn scaling of a positive start onto the marginal groups.
    pub fn scale_to_marginals(&self, mut w: Vec<f64>) -> Vec<f64> {
        for &(a, b) in &self.sym_pairs {
            let avg = 0.5 * (w[a] + w[b]);
            w[a] = avg;
            w[b] = avg;
        }
        for _ in 0..2000 {
            let mut worst = 0.0f64;
            for g in &self.groups {
                for (entries, target) in g {
                    let s: f64 = entries.iter().map(|&e| w[e]).sum();
                    worst = worst.max((s - target).abs());
                    if s > 0.0 {
                        for &e in entries {
                            w[e] *= target / s;
                        }
                    }
                }
            }
            if worst < 1e-15 {
                break;
            }
        }
        w
    }
}

/// The outer objective.
#[derive(Debug, Clone)]
pub struct Problem {
    pub slice: Slice,
    pub space: NuSpace,
    pub alpha: f64,
    pub beta: f64,
    pub c: Vec<f64>,
}

fn phi_entry(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.ln()
    }
}

#[derive(Debug, Clone)]
pub struct Eval {
    pub ub: f64,
    /// Slack contribution of each free coordinate (`|slope| * half-width`).
    pub slack: Vec<f64>,
    /// Objective at the center when the dual converged there.
    pub center_value: Option<f64>,
    pub lambda: Vec<f64>,
}

impl Problem {
    pub fn entropy_nu(&self, nu: &[f64]) -> f64 {
        nu.iter().map(|&x| phi_entry(x)).sum()
    }

    /// Objective at `nu` through the dual (slight overestimate when not converged).
    pub fn value_dual(&self, nu: &[f64], lam0: &[f64]) -> (f64, Dual) {
        let b = self.slice.rhs(nu);
        let dual = solve_dual(&self.slice, &b, lam0, 80);
        let lin: f64 = self.c.iter().zip(nu).map(|(a, b)| a * b).sum();
        (self.alpha * dual.phi - self.beta * self.entropy_nu(nu) + lin, dual)
    }

    /// Objective at `nu` through an explicit feasible inner table.
    pub fn value_explicit(&self, nu: &[f64]) -> Option<(f64, Vec<f64>)> {
        let b = self.slice.rhs(nu);
        let z = ipf(&self.slice, &b, 20000, 1e-13)?;
        let hz: f64 = z.iter().map(|&x| phi_entry(x)).sum::<f64>()
            + z.iter().zip(&self.slice.tilt).map(|(a, t)| a * t).sum::<f64>();
        let lin: f64 = self.c.iter().zip(nu).map(|(a, b)| a * b).sum();
        Some((self.alpha * hz - self.beta * self.entropy_nu(nu) + lin, z))
    }

    fn reference(&self, nu_c: &[f64]) -> Vec<f64> {
        let floor = 1e-12;
        if nu_c.iter().all(|&x| x >= floor) {
            return nu_c.to_vec();
        }
        let mut t: f64 = 0.0;
        for (x, y) in nu_c.iter().zip(&self.space.interior) {
            if *x < floor {
                t = t.max((floor - x) / (y - x));
            }
        }
        let t = t.min(1.0);
        nu_c.iter().zip(&self.space.interior).map(|(x, y)| x + t * (y - x)).collect()
    }

    /// Upper bound over the box `center +- half` in theta.
    pub fn bound_box(&self, center: &[f64], half: &[f64], lam0: &[f64]) -> Option<Eval> {
        let sp = &self.space;
        let nu_c = sp.nu(center);
        let mut lo = vec![0.0; sp.n];
        let mut hi = vec![0.0; sp.n];
        for e in 0..sp.n {
            let spread: f64 = (0..sp.k).map(|j| sp.basis[e * sp.k + j].abs() * half[j]).sum();
            lo[e] = (nu_c[e] - spread).max(0.0);
            hi[e] = (nu_c[e] + spread).min(1.0);
            if nu_c[e] + spread < -1e-15 || lo[e] > hi[e] + 1e-15 {
                return None;
            }
            hi[e] = hi[e].max(lo[e]);
        }
        let nu_r = self.reference(&nu_c);
        let b = self.slice.rhs(&nu_r);
        let dual = solve_dual(&self.slice, &b, lam0, 60);
        let lam = &dual.lambda;
        let mut big_lambda = vec![0.0; sp.n];
        let mut a0 = dual.phi;
        for (i, t) in self.slice.targets.iter().enumerate() {
            if let Target::Nu(e) = *t {
                big_lambda[e] += lam[i];
                a0 += lam[i] * nu_r[e];
            }
        }
        // affine bound: const + sum_e w_e nu_e
        let mut konst = self.alpha * a0;
        let mut w = vec![0.0; sp.n];
        for e in 0..sp.n {
            w[e] = -self.alpha * big_lambda[e] + self.c[e];
            let (l, h) = (lo[e], hi[e]);
            if h - l > 1e-18 {
                let slope = (phi_entry(h) - phi_entry(l)) / (h - l);
                konst -= self.beta * (phi_entry(l) - slope * l);
                w[e] -= self.beta * slope;
            } else {
                konst -= self.beta * phi_entry(l).min(phi_entry(h));
            }
        }
        let at_center = konst + w.iter().zip(&nu_c).map(|(a, b)| a * b).sum::<f64>();
        let slack: Vec<f64> = (0..sp.k)
            .map(|j| (0..sp.n).map(|e| w[e] * sp.basis[e * sp.k + j]).sum::<f64>().abs() * half[j])
            .collect();
        let ub = at_center + slack.iter().sum::<f64>();
        let center_value = (dual.converged && nu_r == nu_c).then(|| {
            let lin: f64 = self.c.iter().zip(&nu_c).map(|(a, b)| a * b).sum();
            self.alpha * dual.phi - self.beta * self.entropy_nu(&nu_c) + lin
        });
        Some(Eval { ub, slack, center_value, lambda: dual.lambda })
    }

    /// Projected ascent in theta from a feasible start.
    pub fn ascend(&self, start: &[f64], iters: usize) -> Option<(f64, Vec<f64>)> {
        let sp = &self.space;
        let mut theta = sp.theta(start);
        let mut lam = vec![0.0; self.slice.n_rows()];
        let (mut val, d0) = self.value_dual(&sp.nu(&theta), &lam);
        if !d0.converged {
            return None;
        }
        lam = d0.lambda;
        let mut step = 0.1;
        for _ in 0..iters {
            let nu = sp.nu(&theta);
            let mut big_lambda = vec![0.0; sp.n];
            for (i, t) in self.slice.targets.iter().enumerate() {
                if let Target::Nu(e) = *t {
                    big_lambda[e] += lam[i];
                }
            }
            let gnu: Vec<f64> = (0..sp.n)
                .map(|e| {
                    let dphi = if nu[e] > 0.0 { -nu[e].ln() - 1.0 } else { 50.0 };
                    -self.alpha * big_lambda[e] - self.beta * dphi + self.c[e]
                })
                .collect();
            let g: Vec<f64> =
                (0..sp.k).map(|j| (0..sp.n).map(|e| gnu[e] * sp.basis[e * sp.k + j]).sum()).collect();
            let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if gn < 1e-12 {
                break;
            }
            let mut improved = false;
            while step > 1e-14 {
                let trial: Vec<f64> = theta.iter().zip(&g).map(|(t, d)| t + step * d / gn).collect();
                let nu_t = sp.nu(&trial);
                if nu_t.iter().all(|&x| x >= 0.0) {
                    let (v, dual) = self.value_dual(&nu_t, &lam);
                    if dual.converged && v > val {
                        theta = trial;
                        val = v;
                        lam = dual.lambda;
                        improved = true;
                        step *= 1.5;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        Some((val, sp.nu(&theta)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Goal {
    /// Prove the supremum is at most this value.
    Threshold(f64),
    /// Bracket the supremum to within this absolute tolerance.
    Tolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Threshold proved, or tolerance reached.
    Done,
    /// A feasible point above the threshold was found.
    Violated,
    /// Cell budget exhausted.
    Budget,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    /// Valid upper bound on the supremum (meaningful when `status == Done`).
    pub upper: f64,
    pub best_value: f64,
    pub best_nu: Option<Vec<f64>>,
    pub cells: usize,
    pub resolution: f64,
}

struct Cell {
    ub: f64,
    id: u64,
    center: Vec<f64>,
    half: Vec<f64>,
    split: usize,
    lambda: Arc<Vec<f64>>,
}

impl PartialEq for Cell {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cell {
    fn cmp(&self, o: &Self) -> Ordering {
        self.ub.total_cmp(&o.ub).then(o.id.cmp(&self.id))
    }
}

/// Best-first branch and bound over the theta box.
pub fn branch_and_bound(p: &Problem, goal: Goal, resolution: f64, max_cells: usize) -> Outcome {
    let sp = &p.space;
    let k = sp.k;
    let mut res = resolution;
    let counts = |res: f64| -> Vec<usize> { sp.theta_hi.iter().map(|h| ((h / res).ceil() as usize).max(1)).collect() };
    let mut n = counts(res);
    while n.iter().map(|&x| x as f64).product::<f64>() > (max_cells / 2).max(1) as f64 {
        res *= 2.0;
        n = counts(res);
    }
    let total: usize = n.iter().product();
    let lam0 = Arc::new(vec![0.0; p.slice.n_rows()]);
    let mut seeds = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut center = vec![0.0; k];
        let mut half = vec![0.0; k];
        for j in 0..k {
            let i = rem % n[j];
            rem /= n[j];
            let w = sp.theta_hi[j] / n[j] as f64;
            center[j] = (i as f64 + 0.5) * w;
            half[j] = 0.5 * w;
        }
        seeds.push((center, half, lam0.clone()));
    }
    let mut next_id = 0u64;
    let mut heap: BinaryHeap<Cell> = BinaryHeap::new();
    let mut pruned_max = f64::NEG_INFINITY;
    let mut best_value = f64::NEG_INFINITY;
    let mut best_nu: Option<Vec<f64>> = None;
    let mut cells = 0usize;
    let mut stuck = false;

    let mut pending = seeds;
    loop {
        let evals: Vec<Option<Eval>> =
            pending.par_iter().map(|(c, h, l)| p.bound_box(c, h, l)).collect();
        cells += pending.len();
        for ((center, half, _), ev) in pending.drain(..).zip(evals) {
            let Some(ev) = ev else { continue };
            if let Some(v) = ev.center_value {
                if v > best_value {
                    best_value = v;
                    best_nu = Some(sp.nu(&center));
                }
            }
            let keep = match goal {
                Goal::Threshold(t) => ev.ub > t,
                Goal::Tolerance(tol) => ev.ub > best_value + tol,
            };
            if !keep {
                pruned_max = pruned_max.max(ev.ub);
                continue;
            }
            let split = (0..k).max_by(|&a, &b| ev.slack[a].total_cmp(&ev.slack[b])).unwrap_or(0);
            if k == 0 || half.iter().all(|&h| h < 1e-13) {
                stuck = true;
            }
            heap.push(Cell { ub: ev.ub, id: next_id, center, half, split, lambda: Arc::new(ev.lambda) });
            next_id += 1;
        }
        if let Goal::Threshold(t) = goal {
            if best_value > t + 1e-7 {
                let confirmed = best_nu.as_ref().and_then(|nu| p.value_explicit(nu)).map(|(v, _)| v);
                if confirmed.is_some_and(|v| v > t) {
                    let upper = heap.peek().map_or(pruned_max, |c| c.ub.max(pruned_max));
                    return Outcome {
                        status: Status::Violated,
                        upper,
                        best_value: confirmed.unwrap(),
                        best_nu,
                        cells,
                        resolution: res,
                    };
                }
            }
        }
        if let Goal::Tolerance(tol) = goal {
            while heap.peek().is_some_and(|c| c.ub <= best_value + tol) {
                let c = heap.pop().unwrap();
                pruned_max = pruned_max.max(c.ub);
            }
        }
        if heap.is_empty() {
            return Outcome {
                status: Status::Done,
                upper: pruned_max.max(best_value),
                best_value,
                best_nu,
                cells,
                resolution: res,
            };
        }
        if cells >= max_cells || stuck {
            let upper = heap.peek().map_or(pruned_max, |c| c.ub.max(pruned_max));
            return Outcome { status: Status::Budget, upper, best_value, best_nu, cells, resolution: res };
        }
        for _ in 0..64 {
            let Some(c) = heap.pop() else { break };
            let j = c.split;
            for side in [-1.0, 1.0] {
                let mut center = c.center.clone();
                let mut half = c.half.clone();
                half[j] *= 0.5;
                center[j] += side * half[j];
                pending.push((center, half, c.lambda.clone()));
            }
        }
    }
}
