//! Dense kernels for small symmetric problems: Jacobi eigensolver, PSD tests,
//! Schur complements, pseudoinverse and Kronecker Lyapunov solves.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::ops::Deref;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Symmetric matrix; mirrored bitwise on construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct SymMatrix(Mat);

impl SymMatrix {
    /// Replace `m` by `(m + mᵀ)/2`, then copy the upper triangle down.
    pub fn new(m: &Mat) -> Self {
        assert!(m.is_square(), "SymMatrix requires a square matrix");
        Self(symmetrize(m))
    }

    pub fn zeros(n: usize) -> Self {
        Self(Mat::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(Mat::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self(Mat::from_diagonal(&Vector::from_column_slice(d)))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }
}

impl Deref for SymMatrix {
    type Target = Mat;
    fn deref(&self) -> &Mat {
        &self.0
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(s: SymMatrix) -> Self {
        to_rows(&s.0)
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = from_rows(&rows)?;
        if !m.is_square() {
            return Err(Error::Dimension("symmetric matrix must be square".into()));
        }
        Ok(Self::new(&m))
    }
}

/// `serialize_with` helpers writing matrices as row-major nested arrays.
pub mod serde_mat {
    use super::{to_rows, Mat, Vector};
    use serde::Serializer;

    pub fn mat<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(to_rows(m))
    }

    pub fn opt_mat<S: Serializer>(m: &Option<Mat>, s: S) -> Result<S::Ok, S::Error> {
        match m {
            Some(m) => s.collect_seq(to_rows(m)),
            None => s.serialize_none(),
        }
    }

    pub fn mats<S: Serializer>(m: &[Mat], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter().map(to_rows))
    }

    pub fn vector<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }
}

/// Row-major nested vectors.
pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

/// `(m + mᵀ)/2` with the lower triangle copied from the upper one.
pub fn symmetrize(m: &Mat) -> Mat {
    let n = m.nrows();
    let mut s = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEigen {
    /// Ascending.
    pub values: Vector,
    /// Columns are orthonormal eigenvectors, in the order of `values`.
    pub vectors: Mat,
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver.
pub fn eig_sym(m: &SymMatrix) -> Result<SymEigen> {
    let n = m.order();
    let mut a = m.as_mat().clone();
    let mut v = Mat::identity(n, n);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let mut converged = n < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() > 1e-12 * scale {
            return Err(Error::EigenConvergence(JACOBI_MAX_SWEEPS));
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = Vector::from_iterator(n, idx.iter().map(|&i| a[(i, i)]));
    let vectors = Mat::from_fn(n, n, |r, c| v[(r, idx[c])]);
    Ok(SymEigen { values, vectors })
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn lambda_min(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    eig_sym(&SymMatrix::new(m))
        .map(|e| e.values[0])
        .unwrap_or(f64::NAN)
}

/// Largest eigenvalue of the symmetric part of `m`.
pub fn lambda_max(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    eig_sym(&SymMatrix::new(m))
        .map(|e| e.values[e.values.len() - 1])
        .unwrap_or(f64::NAN)
}

#[derive(Clone, Debug, Serialize)]
pub struct PsdVerdict {
    pub is_psd: bool,
    pub is_pd: bool,
    pub lambda_min: f64,
    /// Unit eigenvector for `lambda_min`.
    #[serde(serialize_with = "serde_mat::vector")]
    pub witness: Vector,
}

/// PSD test at tolerance: `λmin ≥ −tol` for PSD, `λmin ≥ tol` for PD.
pub fn psd_verdict(m: &SymMatrix, tol: f64) -> Result<PsdVerdict> {
    let e = eig_sym(m)?;
    let lmin = e.values[0];
    Ok(PsdVerdict {
        is_psd: lmin >= -tol,
        is_pd: lmin >= tol,
        lambda_min: lmin,
        witness: e.vectors.column(0).into_owned(),
    })
}

pub fn is_psd(m: &Mat, tol: f64) -> bool {
    lambda_min(m) >= -tol
}

pub fn is_pd(m: &Mat, tol: f64) -> bool {
    lambda_min(m) >= tol
}

/// Default tolerance of [`schur_psd`].
pub const SCHUR_TOL: f64 = 1e-9;

/// Decide PSD-ness of `[[M, N],[Nᵀ, R]]` through its Schur complement.
///
/// For singular `R` the extended test applies: `R ⪰ 0`, `N(I − RR⁺) = 0` and
/// `M − NR⁺Nᵀ ⪰ 0`. The reported `lambda_min` and witness come from the
/// assembled block.
pub fn schur_psd(m: &SymMatrix, n: &Mat, r: &SymMatrix) -> Result<PsdVerdict> {
    schur_psd_tol(m, n, r, SCHUR_TOL)
}

pub fn schur_psd_tol(m: &SymMatrix, n: &Mat, r: &SymMatrix, tol: f64) -> Result<PsdVerdict> {
    let (p, q) = (m.order(), r.order());
    if n.nrows() != p || n.ncols() != q {
        return Err(Error::Dimension(format!(
            "schur_psd: N is {}x{}, expected {}x{}",
            n.nrows(),
            n.ncols(),
            p,
            q
        )));
    }
    let block = block2(m, n, &n.transpose(), r);
    let full = psd_verdict(&SymMatrix::new(&block), tol)?;

    let r_eig = eig_sym(r)?;
    let r_min = if q == 0 { f64::INFINITY } else { r_eig.values[0] };
    let pr = pinv(r);
    let (is_psd, is_pd) = if pr.rank == q {
        let comp = m.as_mat() - n * &pr.pinv * n.transpose();
        let cmin = lambda_min(&comp);
        (r_min >= -tol && cmin >= -tol, r_min >= tol && cmin >= tol)
    } else {
        let proj = Mat::identity(q, q) - r.as_mat() * &pr.pinv;
        let leak = (n * proj).norm();
        let comp = m.as_mat() - n * &pr.pinv * n.transpose();
        let cmin = lambda_min(&comp);
        let scale = 1.0 + n.norm();
        (r_min >= -tol && cmin >= -tol && leak <= tol * scale, false)
    };
    Ok(PsdVerdict {
        is_psd,
        is_pd,
        lambda_min: full.lambda_min,
        witness: full.witness,
    })
}

/// `[[a, b],[c, d]]`.
pub fn block2(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
    let (r1, c1) = (a.nrows(), a.ncols());
    let (r2, c2) = (d.nrows(), d.ncols());
    let mut out = Mat::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(a);
    out.view_mut((0, c1), (r1, c2)).copy_from(b);
    out.view_mut((r1, 0), (r2, c1)).copy_from(c);
    out.view_mut((r1, c1), (r2, c2)).copy_from(d);
    out
}

/// Block-diagonal assembly.
pub fn block_diag(blocks: &[&Mat]) -> Mat {
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(r, c);
    let (mut i, mut j) = (0, 0);
    for b in blocks {
        out.view_mut((i, j), (b.nrows(), b.ncols())).copy_from(b);
        i += b.nrows();
        j += b.ncols();
    }
    out
}

#[derive(Clone, Debug)]
pub struct PinvResult {
    pub pinv: Mat,
    pub rank: usize,
}

/// Moore-Penrose inverse. Singular values below `σmax·max(r,c)·1e-12` count as zero.
pub fn pinv(m: &Mat) -> PinvResult {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return PinvResult { pinv: Mat::zeros(c, r), rank: 0 };
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = smax * (r.max(c) as f64) * 1e-12;
    let u = svd.u.as_ref().expect("svd u");
    let vt = svd.v_t.as_ref().expect("svd v_t");
    let mut out = Mat::zeros(c, r);
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank += 1;
            out += vt.row(k).transpose() * u.column(k).transpose() / s;
        }
    }
    if r == c && (m - m.transpose()).norm() == 0.0 {
        out = symmetrize(&out);
    }
    PinvResult { pinv: out, rank }
}

/// Largest real part among the eigenvalues of a general square matrix.
pub fn spectral_abscissa(a: &Mat) -> f64 {
    if a.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz(a: &Mat) -> bool {
    spectral_abscissa(a) < 0.0
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Column-major vec.
pub fn vec_of(m: &Mat) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Mat {
    Mat::from_column_slice(rows, cols, v.as_slice())
}

/// Matrix of `P ↦ PA + AᵀP + CᵀPC` acting on column-major `vec(P)`.
pub fn lyapunov_operator(a: &Mat, c: &Mat) -> Mat {
    let n = a.nrows();
    let i = Mat::identity(n, n);
    kron(&a.transpose(), &i) + kron(&i, &a.transpose()) + kron(&c.transpose(), &c.transpose())
}

/// Solve `PA + AᵀP + CᵀPC + Q = 0`.
pub fn solve_lyapunov_linear(a: &Mat, c: &Mat, q: &Mat) -> Result<SymMatrix> {
    let n = a.nrows();
    if !a.is_square() || c.shape() != (n, n) || q.shape() != (n, n) {
        return Err(Error::Dimension("lyapunov: A, C, Q must be n x n".into()));
    }
    let op = lyapunov_operator(a, c);
    let lu = op.clone().lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..n * n).map(|k| u[(k, k)].abs()).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if dmax == 0.0 || dmin <= dmax * 1e-13 {
        return Err(Error::SingularOperator(format!(
            "P -> PA + A'P + C'PC is singular (pivot ratio {:e})",
            if dmax == 0.0 { 0.0 } else { dmin / dmax }
        )));
    }
    let rhs = -vec_of(q);
    let mut x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::SingularOperator("LU solve failed".into()))?;
    // one step of iterative refinement
    let r = &rhs - &op * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    Ok(SymMatrix::new(&unvec(&x, n, n)))
}

/// `PA + AᵀP + CᵀPC + Q`.
pub fn lyapunov_residual(a: &Mat, c: &Mat, q: &Mat, p: &Mat) -> Mat {
    p * a + a.transpose() * p + c.transpose() * p * c + q
}

/// Coordinates of symmetric matrices in the orthonormal basis
/// `E_ii = e_i e_iᵀ`, `E_ij = (e_i e_jᵀ + e_j e_iᵀ)/√2` (i < j), ordered by
/// the upper triangle row by row.
pub fn sym_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

pub fn sym_basis(n: usize) -> Vec<Mat> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(sym_dim(n));
    for i in 0..n {
        for j in i..n {
            let mut e = Mat::zeros(n, n);
            if i == j {
                e[(i, i)] = 1.0;
            } else {
                e[(i, j)] = s;
                e[(j, i)] = s;
            }
            out.push(e);
        }
    }
    out
}

pub fn sym_to_coords(m: &Mat) -> Vec<f64> {
    let n = m.nrows();
    let r2 = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(sym_dim(n));
    for i in 0..n {
        for j in i..n {
            if i == j {
                out.push(m[(i, i)]);
            } else {
                out.push(0.5 * (m[(i, j)] + m[(j, i)]) * r2);
            }
        }
    }
    out
}

pub fn sym_from_coords(x: &[f64], n: usize) -> Mat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = Mat::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            if i == j {
                m[(i, i)] = x[k];
            } else {
                m[(i, j)] = x[k] * s;
                m[(j, i)] = x[k] * s;
            }
            k += 1;
        }
    }
    m
}

/// Inverse of a symmetric positive definite matrix, or `None`.
pub fn spd_inverse(m: &Mat) -> Option<Mat> {
    m.clone().cholesky().map(|c| symmetrize(&c.inverse()))
}
