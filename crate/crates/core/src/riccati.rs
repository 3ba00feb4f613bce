//! Coupled algebraic Riccati equations
//!
//! `𝓡(P)   = PA + AᵀP + CᵀPC + Q − (PB + CᵀPD)(R + DᵀPD)⁻¹(BᵀP + DᵀPC) = 0`
//! `𝓡̄(P,Π) = ΠÂ + ÂᵀΠ + ĈᵀPĈ + Q̂ − (ΠB̂ + ĈᵀPD̂)(R̂ + D̂ᵀPD̂)⁻¹(B̂ᵀΠ + D̂ᵀPĈ) = 0`
//!
//! with `Â = A+Ā`, `B̂ = B+B̄`, `Ĉ = C+C̄`, `D̂ = D+D̄`, `Q̂ = Q+Q̄`, `R̂ = R+R̄`,
//! solved two ways: a max-trace SDP over the Schur-complement LMIs, and
//! time-marching of the Riccati differential equations from zero.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matkit::{
    block2, lambda_min, serde_mat, spd_inverse, sym_dim, sym_from_coords, sym_to_coords, symmetrize, Mat, SymMatrix,
};
use crate::model::{CostWeights, SystemMatrices};
use crate::sdp::{self, LmiBlock, MatrixVars, SdpOptions, SdpProblem, SdpStatus, VarShape};

#[derive(Clone, Debug, Serialize)]
pub struct AreResiduals {
    pub r_norm: f64,
    pub rbar_norm: f64,
    pub r_inner_min_eig: f64,
    pub rbar_inner_min_eig: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AreMethod {
    Sdp,
    Ode,
}

/// Solver bookkeeping attached to a solution.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SolverStats {
    pub sdp_status: Option<SdpStatus>,
    pub newton_steps: usize,
    pub duality_gap: Option<f64>,
    pub gap_tol_used: Option<f64>,
    pub resolved_tighter: bool,
    pub polish_steps: usize,
    /// Flipped time at which the ODE march stopped.
    pub ode_time: Option<f64>,
}

/// Dual certificate of the SDP solve, kept for [`dual_residuals`].
#[derive(Clone, Debug)]
pub struct SdpCertificate {
    /// `(P, Π)` at the interior-point optimum, before polishing.
    pub p: Mat,
    pub pi: Mat,
    pub z: Vec<SymMatrix>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AreSolution {
    #[serde(rename = "P")]
    pub p: SymMatrix,
    #[serde(rename = "Pi")]
    pub pi: SymMatrix,
    #[serde(rename = "Gamma", serialize_with = "serde_mat::mat")]
    pub gamma: Mat,
    #[serde(rename = "Gamma_bar", serialize_with = "serde_mat::mat")]
    pub gamma_bar: Mat,
    pub residuals: AreResiduals,
    pub method: AreMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<(SymMatrix, SymMatrix)>,
    pub stats: SolverStats,
    #[serde(skip)]
    pub certificate: Option<SdpCertificate>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RiccatiOdeTrace {
    pub times: Vec<f64>,
    #[serde(serialize_with = "serde_mat::mats")]
    pub p_path: Vec<Mat>,
    #[serde(serialize_with = "serde_mat::mats")]
    pub pi_path: Vec<Mat>,
    pub converged_at: Option<f64>,
}

impl RiccatiOdeTrace {
    /// `min λmin(P(tₖ₊₁) − P(tₖ))` and the same for `Π` over the snapshots.
    pub fn min_increment_eig(&self) -> (f64, f64) {
        let f = |path: &[Mat]| {
            path.windows(2)
                .map(|w| lambda_min(&symmetrize(&(&w[1] - &w[0]))))
                .fold(f64::INFINITY, f64::min)
        };
        (f(&self.p_path), f(&self.pi_path))
    }
}

/// Inner matrices at or below this smallest eigenvalue are treated as singular.
pub const INNER_TOL: f64 = 1e-7;

/// Largest tolerated asymmetry of a computed residual before symmetrizing.
const ASYM_TOL: f64 = 1e-10;

fn inner_inverse(inner: &Mat, what: &str) -> Result<Mat> {
    let lmin = lambda_min(inner);
    if !(lmin > INNER_TOL) {
        return Err(Error::SingularInner(format!("{what}: smallest eigenvalue {lmin:e}")));
    }
    spd_inverse(inner).ok_or_else(|| Error::SingularInner(format!("{what}: Cholesky failed")))
}

fn checked_sym(m: Mat, what: &str) -> Result<Mat> {
    let asym = (&m - m.transpose()).amax();
    if asym > ASYM_TOL * (1.0 + m.amax()) {
        return Err(Error::Value(format!("internal: {what} asymmetric by {asym:e}")));
    }
    Ok(symmetrize(&m))
}

/// `(𝓡(P), R + DᵀPD)`.
pub fn ric_p(sys: &SystemMatrices, cost: &CostWeights, p: &Mat) -> Result<(Mat, Mat)> {
    let (a, b, c, d) = (&sys.a, &sys.b, &sys.c, &sys.d);
    let inner = symmetrize(&(cost.r.as_mat() + d.transpose() * p * d));
    let inv = inner_inverse(&inner, "R + DᵀPD")?;
    let s = p * b + c.transpose() * p * d;
    let res = p * a + a.transpose() * p + c.transpose() * p * c + cost.q.as_mat() - &s * inv * s.transpose();
    Ok((checked_sym(res, "𝓡(P)")?, inner))
}

/// `(𝓡̄(P,Π), R̂ + D̂ᵀPD̂)`.
pub fn ric_pi(sys: &SystemMatrices, cost: &CostWeights, p: &Mat, pi: &Mat) -> Result<(Mat, Mat)> {
    let (ah, bh, ch, dh) = (sys.a_hat(), sys.b_hat(), sys.c_hat(), sys.d_hat());
    let inner = symmetrize(&(cost.r_hat() + dh.transpose() * p * &dh));
    let inv = inner_inverse(&inner, "R + R̄ + D̂ᵀPD̂")?;
    let s = pi * &bh + ch.transpose() * p * &dh;
    let res = pi * &ah + ah.transpose() * pi + ch.transpose() * p * &ch + cost.q_hat() - &s * inv * s.transpose();
    Ok((checked_sym(res, "𝓡̄(P,Π)")?, inner))
}

pub fn are_residuals(sys: &SystemMatrices, cost: &CostWeights, p: &SymMatrix, pi: &SymMatrix) -> Result<AreResiduals> {
    let (r, ri) = ric_p(sys, cost, p.as_mat())?;
    let (rb, rbi) = ric_pi(sys, cost, p.as_mat(), pi.as_mat())?;
    Ok(AreResiduals {
        r_norm: r.norm(),
        rbar_norm: rb.norm(),
        r_inner_min_eig: lambda_min(&ri),
        rbar_inner_min_eig: lambda_min(&rbi),
    })
}

/// `Γ = −(R+DᵀPD)⁻¹(BᵀP+DᵀPC)`, `Γ̄ = −(R̂+D̂ᵀPD̂)⁻¹(B̂ᵀΠ+D̂ᵀPĈ)`.
pub fn gains(sys: &SystemMatrices, cost: &CostWeights, p: &SymMatrix, pi: &SymMatrix) -> Result<(Mat, Mat)> {
    let (p, pi) = (p.as_mat(), pi.as_mat());
    let (b, c, d) = (&sys.b, &sys.c, &sys.d);
    let inner = symmetrize(&(cost.r.as_mat() + d.transpose() * p * d));
    let g = -inner_inverse(&inner, "R + DᵀPD")? * (b.transpose() * p + d.transpose() * p * c);
    let (bh, ch, dh) = (sys.b_hat(), sys.c_hat(), sys.d_hat());
    let inner_b = symmetrize(&(cost.r_hat() + dh.transpose() * p * &dh));
    let gb = -inner_inverse(&inner_b, "R + R̄ + D̂ᵀPD̂")? * (bh.transpose() * pi + dh.transpose() * p * &ch);
    Ok((g, gb))
}

/// Whether the residuals meet `1e-6·(1+‖Q‖)` and `1e-6·(1+‖Q+Q̄‖)`.
pub fn residuals_ok(cost: &CostWeights, r: &AreResiduals) -> bool {
    r.r_norm <= RESIDUAL_TOL * (1.0 + cost.q.as_mat().norm())
        && r.rbar_norm <= RESIDUAL_TOL * (1.0 + cost.q_hat().norm())
}

pub const RESIDUAL_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct SdpAreOptions {
    pub sdp: SdpOptions,
    /// Newton polishing steps per equation.
    pub polish_steps: usize,
    /// Central finite-difference step for the polishing Jacobian.
    pub fd_step: f64,
}

impl Default for SdpAreOptions {
    fn default() -> Self {
        Self { sdp: SdpOptions::default(), polish_steps: 5, fd_step: 1e-6 }
    }
}

/// Whether `(0, 0)` is admissible: `Q, Q+Q̄ ⪰ 0`, `R, R+R̄ ≻ 0`.
pub fn zero_is_feasible(cost: &CostWeights, tol: f64) -> Vec<String> {
    let mut failed = Vec::new();
    if lambda_min(cost.q.as_mat()) < -tol {
        failed.push("Q not PSD".to_string());
    }
    if lambda_min(&cost.q_hat()) < -tol {
        failed.push("Q+Q̄ not PSD".to_string());
    }
    if lambda_min(cost.r.as_mat()) <= tol {
        failed.push("R not PD".to_string());
    }
    if lambda_min(&cost.r_hat()) <= tol {
        failed.push("R+R̄ not PD".to_string());
    }
    failed
}

fn lmi_blocks(sys: &SystemMatrices, cost: &CostWeights, anchor: Option<&(SymMatrix, SymMatrix)>) -> (MatrixVars, Vec<LmiBlock>) {
    let n = sys.n;
    let vars = MatrixVars::new(&[VarShape::Sym(n), VarShape::Sym(n)]);
    let (a, b, c, d) = (sys.a.clone(), sys.b.clone(), sys.c.clone(), sys.d.clone());
    let (ah, bh, ch, dh) = (sys.a_hat(), sys.b_hat(), sys.c_hat(), sys.d_hat());
    let m = sys.m;
    let zn = Mat::zeros(n, m);
    let f1 = block2(cost.q.as_mat(), &zn, &zn.transpose(), cost.r.as_mat());
    let l1 = vars.block(&f1, |v| {
        let p = &v[0];
        let s = p * &b + c.transpose() * p * &d;
        block2(
            &(p * &a + a.transpose() * p + c.transpose() * p * &c),
            &s,
            &s.transpose(),
            &(d.transpose() * p * &d),
        )
    });
    let f2 = block2(&cost.q_hat(), &zn, &zn.transpose(), &cost.r_hat());
    let l2 = vars.block(&f2, |v| {
        let (p, pi) = (&v[0], &v[1]);
        let s = pi * &bh + ch.transpose() * p * &dh;
        block2(
            &(pi * &ah + ah.transpose() * pi + ch.transpose() * p * &ch),
            &s,
            &s.transpose(),
            &(dh.transpose() * p * &dh),
        )
    });
    let mut blocks = vec![l1, l2];
    if let Some((p0, pi0)) = anchor {
        blocks.push(vars.block(&-p0.as_mat(), |v| v[0].clone()));
        blocks.push(vars.block(&-pi0.as_mat(), |v| v[1].clone()));
    }
    (vars, blocks)
}

/// The max-trace problem over `(P, Π)` in the scaled symmetric basis.
pub fn are_sdp_problem(
    sys: &SystemMatrices,
    cost: &CostWeights,
    anchor: Option<&(SymMatrix, SymMatrix)>,
) -> (MatrixVars, SdpProblem) {
    let n = sys.n;
    let (vars, blocks) = lmi_blocks(sys, cost, anchor);
    let mut c = vec![0.0; vars.num_scalars()];
    let tr = sym_to_coords(&Mat::identity(n, n));
    let dn = sym_dim(n);
    for k in 0..dn {
        c[k] = -tr[k];
        c[dn + k] = -tr[k];
    }
    (vars, SdpProblem::new(c, blocks))
}

/// Newton's method on `F(x) = 0` with a central-difference Jacobian and
/// backtracking on `‖F‖`. Returns the improved point and the steps taken.
fn newton_polish(x0: Vec<f64>, f: impl Fn(&[f64]) -> Option<Vec<f64>>, steps: usize, h: f64) -> (Vec<f64>, usize) {
    let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
    let mut x = x0;
    let Some(mut fx) = f(&x) else { return (x, 0) };
    let d = x.len();
    let mut taken = 0;
    for _ in 0..steps {
        let r0 = norm(&fx);
        if r0 == 0.0 {
            break;
        }
        let mut jac = Mat::zeros(fx.len(), d);
        for k in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let (Some(fp), Some(fm)) = (f(&xp), f(&xm)) else { return (x, taken) };
            for i in 0..fx.len() {
                jac[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let rhs = -nalgebra::DVector::from_vec(fx.clone());
        let Some(dx) = jac.lu().solve(&rhs) else { break };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let xn: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, b)| a + t * b).collect();
            if let Some(fn_) = f(&xn) {
                if norm(&fn_) < r0 {
                    x = xn;
                    fx = fn_;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        taken += 1;
    }
    (x, taken)
}

/// Polish `P` on `𝓡(P) = 0`, then `Π` on `𝓡̄(P,Π) = 0` with `P` fixed.
fn polish(sys: &SystemMatrices, cost: &CostWeights, p: &Mat, pi: &Mat, steps: usize, h: f64) -> (Mat, Mat, usize) {
    let n = sys.n;
    let fp = |x: &[f64]| ric_p(sys, cost, &sym_from_coords(x, n)).ok().map(|(r, _)| sym_to_coords(&r));
    let (xp, s1) = newton_polish(sym_to_coords(p), fp, steps, h);
    let p_new = sym_from_coords(&xp, n);
    let fpi = |x: &[f64]| ric_pi(sys, cost, &p_new, &sym_from_coords(x, n)).ok().map(|(r, _)| sym_to_coords(&r));
    let (xpi, s2) = newton_polish(sym_to_coords(pi), fpi, steps, h);
    (p_new.clone(), sym_from_coords(&xpi, n), s1 + s2)
}

fn assemble(
    sys: &SystemMatrices,
    cost: &CostWeights,
    p: Mat,
    pi: Mat,
    method: AreMethod,
    anchor: Option<(SymMatrix, SymMatrix)>,
    stats: SolverStats,
    certificate: Option<SdpCertificate>,
) -> Result<AreSolution> {
    let p = SymMatrix::new(&p);
    let pi = SymMatrix::new(&pi);
    let residuals = are_residuals(sys, cost, &p, &pi)?;
    let (gamma, gamma_bar) = gains(sys, cost, &p, &pi)?;
    Ok(AreSolution { p, pi, gamma, gamma_bar, residuals, method, anchor, stats, certificate })
}

/// Maximal solution by `max Tr(P) + Tr(Π)` subject to the two Riccati LMIs
/// (and `P ⪰ P₀`, `Π ⪰ Π₀` when anchored).
pub fn solve_are_sdp(
    sys: &SystemMatrices,
    cost: &CostWeights,
    anchor: Option<(SymMatrix, SymMatrix)>,
    opts: &SdpAreOptions,
) -> Result<AreSolution> {
    let n = sys.n;
    match &anchor {
        None => {
            let failed = zero_is_feasible(cost, 0.0);
            if !failed.is_empty() {
                return Err(Error::AssumptionGate(failed));
            }
        }
        Some((p0, pi0)) => {
            if p0.order() != n || pi0.order() != n {
                return Err(Error::Dimension(format!("anchor must be {n}x{n}")));
            }
            let (_, blocks) = lmi_blocks(sys, cost, None);
            let x = [sym_to_coords(p0.as_mat()), sym_to_coords(pi0.as_mat())].concat();
            let mut failed = Vec::new();
            for (k, b) in blocks.iter().enumerate() {
                let lmin = lambda_min(&b.eval(&x));
                if lmin < -opts.sdp.feas_tol {
                    failed.push(format!("anchor violates Riccati LMI {} (λmin {lmin:e})", k + 1));
                }
            }
            if !failed.is_empty() {
                return Err(Error::AssumptionGate(failed));
            }
        }
    }
    let (vars, problem) = are_sdp_problem(sys, cost, anchor.as_ref());
    let mut sopts = opts.sdp.clone();
    let mut stats = SolverStats::default();
    let run = |sopts: &SdpOptions, stats: &mut SolverStats| -> Result<(Mat, Mat, SdpCertificate, AreResiduals)> {
        let sol = sdp::solve(&problem, sopts);
        stats.sdp_status = Some(sol.status);
        stats.newton_steps += sol.newton_steps;
        stats.duality_gap = Some(sol.duality_gap);
        stats.gap_tol_used = Some(sopts.gap_tol);
        if sol.status != SdpStatus::Optimal {
            return Err(Error::Sdp(sol.status));
        }
        let mats = vars.unpack(&sol.x);
        let cert = SdpCertificate { p: mats[0].clone(), pi: mats[1].clone(), z: sol.dual_z.clone() };
        let res = are_residuals(sys, cost, &SymMatrix::new(&mats[0]), &SymMatrix::new(&mats[1]))?;
        Ok((mats[0].clone(), mats[1].clone(), cert, res))
    };
    let (mut p, mut pi, mut cert, res) = run(&sopts, &mut stats)?;
    if !residuals_ok(cost, &res) {
        sopts.gap_tol /= 100.0;
        stats.resolved_tighter = true;
        // a tighter solve that stalls keeps the first optimum
        if let Ok((p2, pi2, c2, _)) = run(&sopts, &mut stats) {
            (p, pi, cert) = (p2, pi2, c2);
        } else {
            stats.sdp_status = Some(SdpStatus::Optimal);
        }
        let (pp, ppi, steps) = polish(sys, cost, &p, &pi, opts.polish_steps, opts.fd_step);
        stats.polish_steps = steps;
        (p, pi) = (pp, ppi);
    }
    let sol = assemble(sys, cost, p, pi, AreMethod::Sdp, anchor, stats, Some(cert))?;
    if !residuals_ok(cost, &sol.residuals) {
        return Err(Error::ResidualCheck(format!(
            "SDP optimum has residuals {:e}, {:e}",
            sol.residuals.r_norm, sol.residuals.rbar_norm
        )));
    }
    Ok(sol)
}

#[derive(Clone, Debug)]
pub struct OdeOptions {
    pub dt: f64,
    pub t_max: f64,
    pub conv_tol: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { dt: 1e-3, t_max: 200.0, conv_tol: 1e-9 }
    }
}

/// Norm at which the Riccati march is declared to blow up.
pub const ODE_BLOWUP: f64 = 1e12;

/// March `P̄' = 𝓡(P̄)`, `Π̄' = 𝓡̄(P̄, Π̄)` from zero with RK4; `(J)` required.
pub fn solve_are_ode(sys: &SystemMatrices, cost: &CostWeights, opts: &OdeOptions) -> Result<(AreSolution, RiccatiOdeTrace)> {
    let failed = zero_is_feasible(cost, 0.0);
    if !failed.is_empty() {
        return Err(Error::AssumptionGate(failed));
    }
    if !(opts.dt > 0.0 && opts.t_max > 0.0 && opts.conv_tol > 0.0) {
        return Err(Error::Value("ODE options must be positive".into()));
    }
    let n = sys.n;
    let rhs = |p: &Mat, pi: &Mat| -> Result<(Mat, Mat)> {
        Ok((ric_p(sys, cost, p)?.0, ric_pi(sys, cost, p, pi)?.0))
    };
    let steps_per_unit = (1.0 / opts.dt).round().max(1.0) as usize;
    let h = 1.0 / steps_per_unit as f64;
    let mut p = Mat::zeros(n, n);
    let mut pi = Mat::zeros(n, n);
    let mut trace = RiccatiOdeTrace { times: vec![0.0], p_path: vec![p.clone()], pi_path: vec![pi.clone()], converged_at: None };
    let units = opts.t_max.ceil() as usize;
    for unit in 1..=units {
        for _ in 0..steps_per_unit {
            let (k1p, k1q) = rhs(&p, &pi)?;
            let (k2p, k2q) = rhs(&(&p + &k1p * (0.5 * h)), &(&pi + &k1q * (0.5 * h)))?;
            let (k3p, k3q) = rhs(&(&p + &k2p * (0.5 * h)), &(&pi + &k2q * (0.5 * h)))?;
            let (k4p, k4q) = rhs(&(&p + &k3p * h), &(&pi + &k3q * h))?;
            p += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0);
            pi += (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (h / 6.0);
            let size = p.norm() + pi.norm();
            if !(size <= ODE_BLOWUP) {
                return Err(Error::NoConvergence(format!("Riccati march blew up near s = {unit}")));
            }
        }
        p = symmetrize(&p);
        pi = symmetrize(&pi);
        let change = (&p - trace.p_path.last().unwrap()).norm() + (&pi - trace.pi_path.last().unwrap()).norm();
        trace.times.push(unit as f64);
        trace.p_path.push(p.clone());
        trace.pi_path.push(pi.clone());
        if change <= opts.conv_tol {
            trace.converged_at = Some(unit as f64);
            let stats = SolverStats { ode_time: Some(unit as f64), ..Default::default() };
            let sol = assemble(sys, cost, p, pi, AreMethod::Ode, None, stats, None)?;
            return Ok((sol, trace));
        }
    }
    Err(Error::NoConvergence(format!("no convergence by s = {}", opts.t_max)))
}

/// Largest violation of the dual equality constraints and of complementary
/// slackness, from the SDP dual blocks `Z₁ = [[S, Uᵀ],[U, V]]`,
/// `Z₂ = [[S̄, Ūᵀ],[Ū, V̄]]` (and `W`, `W̄` for anchored solves):
///
/// `AS + SAᵀ + BU + UᵀBᵀ + CSCᵀ + DUCᵀ + CUᵀDᵀ + DVDᵀ
///   + ĈS̄Ĉᵀ + D̂ŪĈᵀ + ĈŪᵀD̂ᵀ + D̂V̄D̂ᵀ + W + I = 0`,
/// `ÂS̄ + S̄Âᵀ + B̂Ū + ŪᵀB̂ᵀ + W̄ + I = 0`,
/// `L(P)Z₁ = 0`, `L̄(P,Π)Z₂ = 0`.
pub fn dual_residuals(sys: &SystemMatrices, cost: &CostWeights, sol: &AreSolution) -> Result<f64> {
    let cert = sol
        .certificate
        .as_ref()
        .ok_or_else(|| Error::Value("solution carries no SDP dual certificate".into()))?;
    let (n, m) = (sys.n, sys.m);
    if cert.z.len() < 2 {
        return Err(Error::Value("dual certificate has fewer than two blocks".into()));
    }
    let split = |z: &Mat| {
        (
            z.view((0, 0), (n, n)).into_owned(),
            z.view((n, 0), (m, n)).into_owned(),
            z.view((n, n), (m, m)).into_owned(),
        )
    };
    let (s, u, v) = split(cert.z[0].as_mat());
    let (sb, ub, vb) = split(cert.z[1].as_mat());
    let w = cert.z.get(2).map_or_else(|| Mat::zeros(n, n), |z| z.as_mat().clone());
    let wb = cert.z.get(3).map_or_else(|| Mat::zeros(n, n), |z| z.as_mat().clone());
    let (a, b, c, d) = (&sys.a, &sys.b, &sys.c, &sys.d);
    let (ah, bh, ch, dh) = (sys.a_hat(), sys.b_hat(), sys.c_hat(), sys.d_hat());
    let i = Mat::identity(n, n);
    let e1 = a * &s + &s * a.transpose() + b * &u + u.transpose() * b.transpose()
        + c * &s * c.transpose()
        + d * &u * c.transpose()
        + c * u.transpose() * d.transpose()
        + d * &v * d.transpose()
        + &ch * &sb * ch.transpose()
        + &dh * &ub * ch.transpose()
        + &ch * ub.transpose() * dh.transpose()
        + &dh * &vb * dh.transpose()
        + w
        + &i;
    let e2 = &ah * &sb + &sb * ah.transpose() + &bh * &ub + ub.transpose() * bh.transpose() + wb + &i;
    let (_, blocks) = lmi_blocks(sys, cost, None);
    let x = [sym_to_coords(&cert.p), sym_to_coords(&cert.pi)].concat();
    let cs1 = blocks[0].eval(&x) * cert.z[0].as_mat();
    let cs2 = blocks[1].eval(&x) * cert.z[1].as_mat();
    Ok([e1.amax(), e2.amax(), cs1.amax(), cs2.amax()].into_iter().fold(0.0, f64::max))
}

/// Maximal solution with `Q`, `Q̄` shifted by `εI`, for `ε` and its tenth and hundredth, then `0`.
#[derive(Clone, Debug, Serialize)]
pub struct EpsilonPoint {
    pub epsilon: f64,
    pub trace_p: f64,
    pub trace_pi: f64,
    #[serde(rename = "P")]
    pub p: Option<SymMatrix>,
    #[serde(rename = "Pi")]
    pub pi: Option<SymMatrix>,
    pub error: Option<String>,
}

pub fn epsilon_trend(sys: &SystemMatrices, cost: &CostWeights, epsilon: f64, opts: &SdpAreOptions) -> Vec<EpsilonPoint> {
    let n = sys.n;
    [epsilon, epsilon / 10.0, epsilon / 100.0, 0.0]
        .into_iter()
        .map(|eps| {
            let mut c = cost.clone();
            let shift = Mat::identity(n, n) * eps;
            c.q = SymMatrix::new(&(c.q.as_mat() + &shift));
            c.q_bar = SymMatrix::new(&(c.q_bar.as_mat() + &shift));
            match solve_are_sdp(sys, &c, None, opts) {
                Ok(s) => EpsilonPoint {
                    epsilon: eps,
                    trace_p: s.p.as_mat().trace(),
                    trace_pi: s.pi.as_mat().trace(),
                    p: Some(s.p),
                    pi: Some(s.pi),
                    error: None,
                },
                Err(e) => EpsilonPoint {
                    epsilon: eps,
                    trace_p: f64::NAN,
                    trace_pi: f64::NAN,
                    p: None,
                    pi: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar() -> (SystemMatrices, CostWeights) {
        (SystemMatrices::scalar(1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0), CostWeights {
            q: SymMatrix::from_diagonal(&[1.0]),
            q_bar: SymMatrix::zeros(1),
            r: SymMatrix::from_diagonal(&[1.0]),
            r_bar: SymMatrix::zeros(1),
        })
    }

    #[test]
    fn scalar_residuals_at_root() {
        let (s, c) = scalar();
        let p = SymMatrix::from_diagonal(&[1.0 + 2f64.sqrt()]);
        let r = are_residuals(&s, &c, &p, &p).unwrap();
        assert!(r.r_norm <= 1e-12 && r.rbar_norm <= 1e-12, "{r:?}");
    }

    #[test]
    fn scalar_sdp_and_ode() {
        let (s, c) = scalar();
        let root = 1.0 + 2f64.sqrt();
        let sol = solve_are_sdp(&s, &c, None, &SdpAreOptions::default()).unwrap();
        assert!((sol.p[(0, 0)] - root).abs() < 1e-6);
        assert!((sol.pi[(0, 0)] - root).abs() < 1e-6);
        assert!((sol.gamma[(0, 0)] + root).abs() < 1e-6);
        assert!(dual_residuals(&s, &c, &sol).unwrap() <= 1e-5);
        let (ode, tr) = solve_are_ode(&s, &c, &OdeOptions::default()).unwrap();
        assert!((ode.p[(0, 0)] - root).abs() < 1e-6);
        assert!(tr.min_increment_eig().0 >= -1e-8);
    }
}
