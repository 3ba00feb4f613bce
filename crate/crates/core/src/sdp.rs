//! Dense block-LMI semidefinite programming.
//!
//! Primal form: minimize `cᵀx` subject to `F_j(x) = F_j0 + Σ x_i F_ji ⪰ 0` for
//! every block `j`. Dual: maximize `−Σ Tr(F_j0 Z_j)` subject to
//! `Σ_j Tr(Z_j F_ji) = c_i`, `Z_j ⪰ 0`.
//!
//! The solver follows the central path of the log-det barrier with damped
//! Newton steps on `x` and reads the dual off the barrier gradient,
//! `Z_j = μ F_j(x)⁻¹`. A bounded phase-1 problem supplies the start point.

use nalgebra::linalg::Cholesky;
use nalgebra::Dyn;
use serde::Serialize;
use std::fmt::Write as _;

use crate::matkit::{
    lambda_min, sym_dim, sym_from_coords, sym_to_coords, symmetrize, Mat, SymMatrix, Vector,
};

/// One block `F0 + Σ x_i F_i`.
#[derive(Clone, Debug)]
pub struct LmiBlock {
    pub f0: SymMatrix,
    /// One coefficient per scalar variable.
    pub fi: Vec<SymMatrix>,
}

impl LmiBlock {
    pub fn new(f0: SymMatrix, fi: Vec<SymMatrix>) -> Self {
        let n = f0.order();
        assert!(fi.iter().all(|f| f.order() == n), "LmiBlock: order mismatch");
        Self { f0, fi }
    }

    pub fn order(&self) -> usize {
        self.f0.order()
    }

    pub fn num_vars(&self) -> usize {
        self.fi.len()
    }

    /// `F(x)`.
    pub fn eval(&self, x: &[f64]) -> Mat {
        let mut f = self.f0.as_mat().clone();
        for (xi, fi) in x.iter().zip(&self.fi) {
            if *xi != 0.0 {
                f += fi.as_mat() * *xi;
            }
        }
        f
    }

    /// Same block with `extra` trailing variables whose coefficients are zero.
    fn padded(&self, extra: usize) -> Self {
        let n = self.order();
        let mut fi = self.fi.clone();
        fi.extend((0..extra).map(|_| SymMatrix::zeros(n)));
        Self { f0: self.f0.clone(), fi }
    }
}

#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub num_vars: usize,
    /// Minimized.
    pub c: Vec<f64>,
    pub blocks: Vec<LmiBlock>,
}

impl SdpProblem {
    pub fn new(c: Vec<f64>, blocks: Vec<LmiBlock>) -> Self {
        let num_vars = c.len();
        assert!(
            blocks.iter().all(|b| b.num_vars() == num_vars),
            "SdpProblem: every block needs one coefficient per variable"
        );
        Self { num_vars, c, blocks }
    }

    pub fn total_order(&self) -> usize {
        self.blocks.iter().map(|b| b.order()).sum()
    }

    /// Sparse text listing: a header with the objective, then one
    /// `block i j var value` line per nonzero upper-triangle entry; `var` 0
    /// is `F0` and `var` k is the coefficient of `x_k` (1-based).
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# vars {} blocks {}", self.num_vars, self.blocks.len());
        let c: Vec<String> = self.c.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "c {}", c.join(" "));
        for (b, blk) in self.blocks.iter().enumerate() {
            let mats = std::iter::once(&blk.f0).chain(blk.fi.iter());
            for (k, m) in mats.enumerate() {
                for i in 0..m.nrows() {
                    for j in i..m.ncols() {
                        let v = m[(i, j)];
                        if v != 0.0 {
                            let _ = writeln!(s, "{b} {i} {j} {k} {v:e}");
                        }
                    }
                }
            }
        }
        s
    }
}

/// Shape of a matrix-valued decision variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarShape {
    /// Symmetric `n×n`, coordinates in the √2-scaled upper-triangle basis.
    Sym(usize),
    /// General `r×c`, one coordinate per entry (row-major).
    Full(usize, usize),
}

impl VarShape {
    pub fn len(&self) -> usize {
        match *self {
            VarShape::Sym(n) => sym_dim(n),
            VarShape::Full(r, c) => r * c,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn zero(&self) -> Mat {
        match *self {
            VarShape::Sym(n) => Mat::zeros(n, n),
            VarShape::Full(r, c) => Mat::zeros(r, c),
        }
    }

    fn from_coords(&self, x: &[f64]) -> Mat {
        match *self {
            VarShape::Sym(n) => sym_from_coords(x, n),
            VarShape::Full(r, c) => Mat::from_row_slice(r, c, x),
        }
    }
}

/// Packs several matrix variables into one scalar vector and assembles LMI
/// blocks from linear maps of those matrices.
#[derive(Clone, Debug)]
pub struct MatrixVars {
    shapes: Vec<VarShape>,
    offsets: Vec<usize>,
    total: usize,
}

impl MatrixVars {
    pub fn new(shapes: &[VarShape]) -> Self {
        let mut offsets = Vec::with_capacity(shapes.len());
        let mut total = 0;
        for s in shapes {
            offsets.push(total);
            total += s.len();
        }
        Self { shapes: shapes.to_vec(), offsets, total }
    }

    pub fn num_scalars(&self) -> usize {
        self.total
    }

    /// Matrices encoded by `x`.
    pub fn unpack(&self, x: &[f64]) -> Vec<Mat> {
        self.shapes
            .iter()
            .zip(&self.offsets)
            .map(|(s, &o)| s.from_coords(&x[o..o + s.len()]))
            .collect()
    }

    /// Scalar coordinates of the given matrices.
    pub fn pack(&self, mats: &[Mat]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.total);
        for (s, m) in self.shapes.iter().zip(mats) {
            match *s {
                VarShape::Sym(_) => x.extend(sym_to_coords(m)),
                VarShape::Full(r, c) => {
                    for i in 0..r {
                        for j in 0..c {
                            x.push(m[(i, j)]);
                        }
                    }
                }
            }
        }
        x
    }

    /// Block `f0 + L(X_1, …, X_k)` for a linear map `L`.
    pub fn block(&self, f0: &Mat, linear: impl Fn(&[Mat]) -> Mat) -> LmiBlock {
        let zeros: Vec<Mat> = self.shapes.iter().map(|s| s.zero()).collect();
        let mut fi = Vec::with_capacity(self.total);
        let mut e = vec![0.0; self.total];
        for k in 0..self.total {
            e[k] = 1.0;
            let mut mats = zeros.clone();
            let v = (0..self.shapes.len())
                .find(|&v| k >= self.offsets[v] && k < self.offsets[v] + self.shapes[v].len())
                .expect("offset");
            let (s, o) = (self.shapes[v], self.offsets[v]);
            mats[v] = s.from_coords(&e[o..o + s.len()]);
            fi.push(SymMatrix::new(&linear(&mats)));
            e[k] = 0.0;
        }
        LmiBlock::new(SymMatrix::new(f0), fi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
    WeaklyFeasible,
}

#[derive(Clone, Debug)]
pub struct SdpOptions {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_newton: usize,
    pub max_outer: usize,
    /// Box `|x_i| ≤ bound` used only inside phase 1 so that the
    /// margin problem has a bounded feasible set.
    pub phase1_bound: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            gap_tol: 1e-7,
            max_newton: 50,
            max_outer: 60,
            phase1_bound: 1e4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub dual_z: Vec<SymMatrix>,
    /// `cᵀx + Σ Tr(F_j0 Z_j)`.
    pub duality_gap: f64,
    /// `min_j λmin(F_j(x))`.
    pub min_eig_slack: f64,
    /// `max_i |Σ_j Tr(Z_j F_ji) − c_i|`.
    pub dual_infeasibility: f64,
    pub newton_steps: usize,
    /// Duality gap recorded at every accepted centre.
    pub gap_history: Vec<f64>,
    /// Phase-1 margin that seeded the solve.
    pub phase1_margin: f64,
}

#[derive(Clone, Debug)]
pub struct Feasibility {
    pub feasible: bool,
    pub margin: f64,
    pub x: Vec<f64>,
    pub status: SdpStatus,
}

/// Objective at which the problem is declared unbounded below.
const UNBOUNDED_LEVEL: f64 = -1e12;

struct Cache {
    chol: Vec<Cholesky<f64, Dyn>>,
    logdet: f64,
}

fn factor(blocks: &[LmiBlock], x: &[f64]) -> Option<Cache> {
    let mut chol = Vec::with_capacity(blocks.len());
    let mut logdet = 0.0;
    for b in blocks {
        let f = symmetrize(&b.eval(x));
        if f.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let c = f.cholesky()?;
        let l = c.l_dirty();
        for k in 0..l.nrows() {
            let d = l[(k, k)];
            if d <= 0.0 || !d.is_finite() {
                return None;
            }
            logdet += 2.0 * d.ln();
        }
        chol.push(c);
    }
    Some(Cache { chol, logdet })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Which coefficients of each block are nonzero.
fn activity(blocks: &[LmiBlock]) -> Vec<Vec<bool>> {
    blocks
        .iter()
        .map(|b| b.fi.iter().map(|f| f.iter().any(|v| *v != 0.0)).collect())
        .collect()
}

struct Barrier<'a> {
    blocks: &'a [LmiBlock],
    c: &'a [f64],
    active: Vec<Vec<bool>>,
}

impl<'a> Barrier<'a> {
    fn value(&self, x: &[f64], mu: f64) -> Option<(f64, Cache)> {
        let cache = factor(self.blocks, x)?;
        Some((dot(self.c, x) - mu * cache.logdet, cache))
    }

    /// Gradient and Hessian of `cᵀx − μ Σ log det F_j(x)`.
    fn derivatives(&self, cache: &Cache, mu: f64) -> (Vector, Mat) {
        let nv = self.c.len();
        let mut g = Vector::from_column_slice(self.c);
        let mut h = Mat::zeros(nv, nv);
        for (j, b) in self.blocks.iter().enumerate() {
            let chol = &cache.chol[j];
            let idx: Vec<usize> = (0..nv).filter(|&i| self.active[j][i]).collect();
            let mut gs: Vec<Mat> = Vec::with_capacity(idx.len());
            for &i in &idx {
                // L⁻¹ F_i L⁻ᵀ
                let l = chol.l_dirty();
                let mut y = b.fi[i].as_mat().clone();
                l.solve_lower_triangular_mut(&mut y);
                let mut yt = y.transpose();
                l.solve_lower_triangular_mut(&mut yt);
                let gi = symmetrize(&yt);
                g[i] -= mu * gi.trace();
                gs.push(gi);
            }
            for (a, &i) in idx.iter().enumerate() {
                for (bb, &k) in idx.iter().enumerate().skip(a) {
                    let v = mu * gs[a].dot(&gs[bb]);
                    h[(i, k)] += v;
                    if i != k {
                        h[(k, i)] += v;
                    }
                }
            }
        }
        (g, h)
    }

    fn dual(&self, cache: &Cache, mu: f64) -> Vec<SymMatrix> {
        cache
            .chol
            .iter()
            .map(|c| SymMatrix::new(&(c.inverse() * mu)))
            .collect()
    }

    /// `Z_j = μ(F⁻¹ − F⁻¹ΔF_j F⁻¹)` with `ΔF_j = Σ dx_i F_ji` for the Newton
    /// step `dx`. It satisfies the dual equality constraints exactly even when
    /// `x` is only approximately centred; rounding is removed by refining with
    /// the same Hessian. `None` if some block is not PSD.
    fn dual_corrected(&self, cache: &Cache, mu: f64) -> Option<Vec<SymMatrix>> {
        let (g, h) = self.derivatives(cache, mu);
        let dx = newton_direction(&g, &h)?;
        let finv: Vec<Mat> = cache.chol.iter().map(|c| c.inverse()).collect();
        let sandwich = |d: &[f64]| -> Vec<Mat> {
            self.blocks
                .iter()
                .zip(&finv)
                .map(|(b, fi)| {
                    let mut df = Mat::zeros(b.order(), b.order());
                    for (k, &v) in d.iter().enumerate() {
                        if v != 0.0 {
                            df += b.fi[k].as_mat() * v;
                        }
                    }
                    fi * df * fi * mu
                })
                .collect()
        };
        let mut z: Vec<Mat> = finv.iter().map(|fi| fi * mu).collect();
        for (zj, s) in z.iter_mut().zip(sandwich(dx.as_slice())) {
            *zj -= s;
        }
        for _ in 0..2 {
            // r = c − 𝒜*(Z); adding μF⁻¹(Σ dy_i F_i)F⁻¹ changes 𝒜*(Z) by H·dy
            let r: Vec<f64> = (0..self.c.len())
                .map(|i| {
                    self.c[i]
                        - self.blocks.iter().zip(&z).map(|(b, zj)| b.fi[i].as_mat().dot(zj)).sum::<f64>()
                })
                .collect();
            let dy = newton_direction(&-Vector::from_vec(r), &h)?;
            for (zj, s) in z.iter_mut().zip(sandwich(dy.as_slice())) {
                *zj += s;
            }
        }
        let mut out = Vec::with_capacity(z.len());
        for zj in z {
            let zs = SymMatrix::new(&zj);
            if lambda_min(zs.as_mat()) < -1e-12 * (1.0 + zs.as_mat().amax()) {
                return None;
            }
            out.push(zs);
        }
        Some(out)
    }
}

fn newton_direction(g: &Vector, h: &Mat) -> Option<Vector> {
    let n = g.len();
    if n == 0 {
        return Some(Vector::zeros(0));
    }
    if let Some(c) = h.clone().cholesky() {
        return Some(-c.solve(g));
    }
    let shift = 1e-14 * (h.trace().abs() / n as f64).max(f64::MIN_POSITIVE);
    let mut hs = h.clone();
    for k in 0..n {
        hs[(k, k)] += shift;
    }
    if let Some(c) = hs.clone().cholesky() {
        return Some(-c.solve(g));
    }
    hs.lu().solve(&-g)
}

enum CenterOutcome {
    Centered,
    Stalled,
    Unbounded,
}

/// Damped Newton minimisation of the barrier at fixed `mu`.
fn center(
    bar: &Barrier,
    x: &mut Vec<f64>,
    mu: f64,
    max_steps: usize,
    tight: bool,
    steps: &mut usize,
) -> CenterOutcome {
    let (mut phi, mut cache) = match bar.value(x, mu) {
        Some(v) => v,
        None => return CenterOutcome::Stalled,
    };
    let stop = if tight { 1e-14 } else { 1e-10 };
    for _ in 0..max_steps {
        let (g, h) = bar.derivatives(&cache, mu);
        let dx = match newton_direction(&g, &h) {
            Some(d) => d,
            None => return CenterOutcome::Stalled,
        };
        let slope = g.dot(&dx);
        let dec2 = -slope;
        if !(dec2 / mu > stop) {
            return CenterOutcome::Centered;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + alpha * d).collect();
            if let Some((phi_t, cache_t)) = bar.value(&trial, mu) {
                if phi_t <= phi + 0.25 * alpha * slope {
                    accepted = Some((trial, phi_t, cache_t));
                    break;
                }
            }
            alpha *= 0.5;
        }
        *steps += 1;
        match accepted {
            Some((t, p, c)) => {
                *x = t;
                phi = p;
                cache = c;
            }
            None => return if dec2 / mu < 1e-8 { CenterOutcome::Centered } else { CenterOutcome::Stalled },
        }
        if dot(bar.c, x) < UNBOUNDED_LEVEL {
            return CenterOutcome::Unbounded;
        }
    }
    CenterOutcome::Centered
}

struct PathResult {
    x: Vec<f64>,
    z: Vec<SymMatrix>,
    status: SdpStatus,
    steps: usize,
    gap_history: Vec<f64>,
}

fn gap_of(blocks: &[LmiBlock], c: &[f64], x: &[f64], z: &[SymMatrix]) -> f64 {
    dot(c, x)
        + blocks
            .iter()
            .zip(z)
            .map(|(b, zj)| b.f0.as_mat().dot(zj.as_mat()))
            .sum::<f64>()
}

fn dual_infeasibility(blocks: &[LmiBlock], c: &[f64], z: &[SymMatrix]) -> f64 {
    (0..c.len())
        .map(|i| {
            let s: f64 = blocks
                .iter()
                .zip(z)
                .map(|(b, zj)| b.fi[i].as_mat().dot(zj.as_mat()))
                .sum();
            (s - c[i]).abs()
        })
        .fold(0.0, f64::max)
}

/// Follow the central path from a strictly feasible `x0`.
fn follow_path(blocks: &[LmiBlock], c: &[f64], x0: Vec<f64>, opts: &SdpOptions) -> PathResult {
    let bar = Barrier { blocks, c, active: activity(blocks) };
    let order: usize = blocks.iter().map(|b| b.order()).sum::<usize>().max(1);
    let mut x = x0;
    let mut mu = 1.0 + dot(c, &x).abs();
    // Half of gap_tol/order leaves room for centring error in the gap.
    let mu_stop = 0.5 * opts.gap_tol / order as f64;
    let mut steps = 0;
    let mut gap_history = Vec::new();
    let mut last_z = Vec::new();
    // last iterate with a PSD, exactly dual-feasible Z and a nonincreasing gap
    let mut best: Option<(Vec<f64>, Vec<SymMatrix>, f64)> = None;
    let finish = |best: Option<(Vec<f64>, Vec<SymMatrix>, f64)>, x: Vec<f64>, z: Vec<SymMatrix>, steps, hist| match best {
        Some((bx, bz, bg)) => PathResult {
            x: bx,
            z: bz,
            status: if bg <= opts.gap_tol { SdpStatus::Optimal } else { SdpStatus::MaxIter },
            steps,
            gap_history: hist,
        },
        None => PathResult { x, z, status: SdpStatus::MaxIter, steps, gap_history: hist },
    };
    for _ in 0..opts.max_outer {
        let last = mu <= mu_stop;
        let outcome = center(&bar, &mut x, mu, opts.max_newton, last, &mut steps);
        if let CenterOutcome::Unbounded = outcome {
            return PathResult { x, z: last_z, status: SdpStatus::Unbounded, steps, gap_history };
        }
        let mut valid = false;
        let mut gap = f64::INFINITY;
        if let Some(cache) = factor(blocks, &x) {
            let corrected = bar.dual_corrected(&cache, mu);
            valid = corrected.is_some();
            last_z = corrected.unwrap_or_else(|| bar.dual(&cache, mu));
            gap = gap_of(blocks, c, &x, &last_z);
            gap_history.push(gap);
        }
        let prev = best.as_ref().map_or(f64::INFINITY, |b| b.2);
        valid &= gap >= -opts.gap_tol && gap <= prev && dual_infeasibility(blocks, c, &last_z) <= opts.feas_tol;
        if valid {
            best = Some((x.clone(), last_z.clone(), gap));
            if last && gap <= opts.gap_tol {
                return finish(best, x, last_z, steps, gap_history);
            }
        } else if best.is_some() && mu < 1e-3 {
            // centring has lost accuracy; fall back to the last certified point
            return finish(best, x, last_z, steps, gap_history);
        }
        mu = if last { mu / 10.0 } else { (mu / 10.0).max(mu_stop) };
    }
    finish(best, x, last_z, steps, gap_history)
}

/// Phase 1: maximise `t` subject to `F(x) − tI ⪰ 0`, `t ≤ 1`, `|x_i| ≤ bound`.
pub fn check_strict_feasibility(blocks: &[LmiBlock], opts: &SdpOptions) -> Feasibility {
    let nv = blocks.first().map_or(0, |b| b.num_vars());
    if blocks.is_empty() {
        return Feasibility { feasible: true, margin: 1.0, x: vec![0.0; nv], status: SdpStatus::Optimal };
    }
    let zero = vec![0.0; nv];
    let lmin0 = blocks
        .iter()
        .map(|b| lambda_min(&b.eval(&zero)))
        .fold(f64::INFINITY, f64::min);
    let t0 = (lmin0 - 1.0).min(0.0);

    let mut ext: Vec<LmiBlock> = Vec::with_capacity(blocks.len() + 2);
    for b in blocks {
        let mut e = b.padded(1);
        e.fi[nv] = SymMatrix::new(&(-Mat::identity(b.order(), b.order())));
        ext.push(e);
    }
    // t ≤ 1
    let mut cap_fi: Vec<SymMatrix> = (0..=nv).map(|_| SymMatrix::zeros(1)).collect();
    cap_fi[nv] = SymMatrix::from_diagonal(&[-1.0]);
    ext.push(LmiBlock::new(SymMatrix::from_diagonal(&[1.0]), cap_fi));
    // |x_i| ≤ bound
    if nv > 0 {
        let k = 2 * nv;
        let f0 = SymMatrix::new(&(Mat::identity(k, k) * opts.phase1_bound));
        let mut fi = Vec::with_capacity(nv + 1);
        for i in 0..nv {
            let mut d = vec![0.0; k];
            d[2 * i] = -1.0;
            d[2 * i + 1] = 1.0;
            fi.push(SymMatrix::from_diagonal(&d));
        }
        fi.push(SymMatrix::zeros(k));
        ext.push(LmiBlock::new(f0, fi));
    }
    let mut c = vec![0.0; nv + 1];
    c[nv] = -1.0;
    let mut x0 = vec![0.0; nv + 1];
    x0[nv] = t0;

    let res = follow_path(&ext, &c, x0, opts);
    let t = res.x[nv];
    let x: Vec<f64> = res.x[..nv].to_vec();
    let slack = blocks
        .iter()
        .map(|b| lambda_min(&b.eval(&x)))
        .fold(f64::INFINITY, f64::min);
    let margin = t.max(slack.min(1.0));
    Feasibility {
        feasible: margin > opts.feas_tol,
        margin,
        x,
        status: if res.status == SdpStatus::Unbounded { SdpStatus::MaxIter } else { res.status },
    }
}

fn min_slack(blocks: &[LmiBlock], x: &[f64]) -> f64 {
    blocks
        .iter()
        .map(|b| lambda_min(&b.eval(x)))
        .fold(f64::INFINITY, f64::min)
}

/// Solve `min cᵀx s.t. F(x) ⪰ 0`.
pub fn solve(p: &SdpProblem, opts: &SdpOptions) -> SdpSolution {
    let nv = p.num_vars;
    let ph1 = check_strict_feasibility(&p.blocks, opts);
    let empty_z = || p.blocks.iter().map(|b| SymMatrix::zeros(b.order())).collect::<Vec<_>>();
    let base = |status, x: Vec<f64>, z: Vec<SymMatrix>, steps, hist: Vec<f64>| {
        let objective = dot(&p.c, &x);
        let duality_gap = gap_of(&p.blocks, &p.c, &x, &z);
        let dual_inf = dual_infeasibility(&p.blocks, &p.c, &z);
        SdpSolution {
            status,
            min_eig_slack: min_slack(&p.blocks, &x),
            objective,
            duality_gap,
            dual_infeasibility: dual_inf,
            x,
            dual_z: z,
            newton_steps: steps,
            gap_history: hist,
            phase1_margin: ph1.margin,
        }
    };
    if !ph1.feasible {
        let status = if ph1.margin < -opts.feas_tol {
            SdpStatus::Infeasible
        } else if ph1.status == SdpStatus::MaxIter {
            SdpStatus::MaxIter
        } else {
            SdpStatus::WeaklyFeasible
        };
        return base(status, ph1.x.clone(), empty_z(), 0, Vec::new());
    }
    if p.c.iter().all(|v| *v == 0.0) {
        // Pure feasibility: Z = 0 certifies optimality of any feasible point.
        return base(SdpStatus::Optimal, ph1.x.clone(), empty_z(), 0, vec![0.0]);
    }
    let res = follow_path(&p.blocks, &p.c, ph1.x.clone(), opts);
    let mut sol = base(res.status, res.x, res.z, res.steps, res.gap_history);
    debug_assert_eq!(sol.x.len(), nv);
    if sol.status == SdpStatus::Optimal {
        let ok = sol.min_eig_slack >= -opts.feas_tol
            && sol.duality_gap <= opts.gap_tol
            && sol.dual_infeasibility <= opts.feas_tol;
        if !ok {
            sol.status = SdpStatus::MaxIter;
        }
    }
    if sol.objective < UNBOUNDED_LEVEL {
        sol.status = SdpStatus::Unbounded;
    }
    sol
}
