//! Stability and integrability of the uncontrolled mean-field system
//! `dX = (AX + ĀE[X])dt + (CX + C̄E[X])dW`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matkit::{
    eig_sym, lambda_min, lyapunov_residual, serde_mat, solve_lyapunov_linear, spectral_abscissa, Mat, SymMatrix,
};
use crate::model::{CostWeights, SystemMatrices};
use crate::simulate::{SimConfig, OVERFLOW_NORM};
use crate::Verdict;

/// Scalar uncontrolled system `dX = (aX + āE[X])dt + (cX + c̄E[X])dW`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalarSystem {
    pub a: f64,
    pub a_bar: f64,
    pub c: f64,
    pub c_bar: f64,
}

impl ScalarSystem {
    pub fn new(a: f64, a_bar: f64, c: f64, c_bar: f64) -> Result<Self> {
        if ![a, a_bar, c, c_bar].iter().all(|v| v.is_finite()) {
            return Err(Error::Value("scalar system entries must be finite".into()));
        }
        Ok(Self { a, a_bar, c, c_bar })
    }

    /// Embed as a one-dimensional system with `b = b̄ = d = d̄ = 0`.
    pub fn to_system(&self) -> SystemMatrices {
        SystemMatrices::scalar(self.a, self.a_bar, 0.0, 0.0, self.c, self.c_bar, 0.0, 0.0)
    }
}

/// `a+ā < 0` and (`2a+c² < 0` or `c+c̄ = 0`), compared exactly.
pub fn scalar_criterion(s: &ScalarSystem) -> bool {
    s.a + s.a_bar < 0.0 && (2.0 * s.a + s.c * s.c < 0.0 || s.c + s.c_bar == 0.0)
}

/// As [`scalar_criterion`] but accepts `|c+c̄| ≤ eps` as zero.
pub fn scalar_criterion_tol(s: &ScalarSystem, eps: f64) -> bool {
    s.a + s.a_bar < 0.0 && (2.0 * s.a + s.c * s.c < 0.0 || (s.c + s.c_bar).abs() <= eps)
}

/// Closed-form `E|X(t)|²` from `X(0) = x0`:
/// `x0²e^{βt} + (c+c̄)²x0²∫₀ᵗ e^{α(t−s)}e^{βs}ds`, `α = 2a+c²`, `β = 2(a+ā)`.
pub fn scalar_second_moment(s: &ScalarSystem, x0: f64, t: f64) -> f64 {
    let alpha = 2.0 * s.a + s.c * s.c;
    let beta = 2.0 * (s.a + s.a_bar);
    let g = s.c + s.c_bar;
    let x2 = x0 * x0;
    let delta = beta - alpha;
    // ∫₀ᵗ e^{α(t−s)+βs}ds = e^{αt}·(e^{δt}−1)/δ, which tends to t·e^{αt} as δ → 0
    let z = delta * t;
    let ratio = if z == 0.0 { 1.0 } else { z.exp_m1() / z };
    let integral = t * (alpha * t).exp() * ratio;
    x2 * (beta * t).exp() + g * g * x2 * integral
}

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovSolution {
    #[serde(rename = "P")]
    pub p: SymMatrix,
    pub residual_norm: f64,
    pub psd: bool,
    /// Smallest eigenvalue of `P`.
    pub lambda_min: f64,
}

/// Tolerance used for the PSD/PD flags on Lyapunov solutions.
pub const LYAP_EIG_TOL: f64 = 1e-9;

/// Solve `PA + AᵀP + CᵀPC + Q = 0`. A singular operator is reported as
/// [`Error::SingularOperator`], which the classifier maps to "unknown".
pub fn solve_lyapunov(a: &Mat, c: &Mat, q: &SymMatrix) -> Result<LyapunovSolution> {
    let p = solve_lyapunov_linear(a, c, q.as_mat())?;
    let residual_norm = lyapunov_residual(a, c, q.as_mat(), p.as_mat()).norm();
    let lmin = lambda_min(p.as_mat());
    let scale = 1.0 + p.as_mat().norm();
    if residual_norm > 1e-8 * (1.0 + q.as_mat().norm()) {
        return Err(Error::SingularOperator(format!(
            "Lyapunov solve inaccurate: residual {residual_norm:e}"
        )));
    }
    Ok(LyapunovSolution { p, residual_norm, psd: lmin >= -LYAP_EIG_TOL * scale, lambda_min: lmin })
}

/// Monte-Carlo estimate of `E∫₀ᵀ FᵀQF dt` for the fundamental solution
/// `dF = AF dt + CF dW`, `F(0) = I`.
#[derive(Clone, Debug, Serialize)]
pub struct LyapunovOracle {
    #[serde(rename = "P")]
    pub p: SymMatrix,
    #[serde(serialize_with = "serde_mat::mat")]
    pub std_error: Mat,
    pub divergent: bool,
}

pub fn lyapunov_mc_oracle(a: &Mat, c: &Mat, q: &SymMatrix, cfg: &SimConfig) -> Result<LyapunovOracle> {
    cfg.validate()?;
    let n = a.nrows();
    if a.shape() != (n, n) || c.shape() != (n, n) || q.order() != n {
        return Err(Error::Dimension("oracle: A, C, Q must be n x n".into()));
    }
    let steps = cfg.steps();
    let dt = cfg.horizon / steps as f64;
    let sqdt = dt.sqrt();
    let flat = |m: &Mat| -> Vec<f64> { (0..n * n).map(|k| m[(k / n, k % n)]).collect() };
    let (af, cf, qf) = (flat(a), flat(c), flat(q.as_mat()));
    // row-major n×n product `out = x·y`
    let mul = |x: &[f64], y: &[f64], out: &mut [f64]| {
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (0..n).map(|k| x[i * n + k] * y[k * n + j]).sum();
            }
        }
    };
    let one_path = |path: usize| -> Option<Mat> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(path as u64);
        let mut f = flat(&Mat::identity(n, n));
        let mut acc = vec![0.0; n * n];
        let (mut qf_f, mut af_f, mut cf_f) = (vec![0.0; n * n], vec![0.0; n * n], vec![0.0; n * n]);
        for k in 0..=steps {
            let wt = if k == 0 || k == steps { 0.5 * dt } else { dt };
            // acc += FᵀQF
            mul(&qf, &f, &mut qf_f);
            for i in 0..n {
                for j in 0..n {
                    acc[i * n + j] += wt * (0..n).map(|l| f[l * n + i] * qf_f[l * n + j]).sum::<f64>();
                }
            }
            if k == steps {
                break;
            }
            let z: f64 = StandardNormal.sample(&mut rng);
            let dw = z * sqdt;
            mul(&af, &f, &mut af_f);
            mul(&cf, &f, &mut cf_f);
            let mut norm2 = 0.0;
            for i in 0..n * n {
                f[i] += af_f[i] * dt + cf_f[i] * dw;
                norm2 += f[i] * f[i];
            }
            if !(norm2 <= OVERFLOW_NORM * OVERFLOW_NORM) {
                return None;
            }
        }
        Some(Mat::from_row_slice(n, n, &acc))
    };
    let chunks: Vec<(usize, usize)> =
        (0..cfg.paths).step_by(64).map(|s| (s, (s + 64).min(cfg.paths))).collect();
    let parts: Vec<Option<(Mat, Mat)>> = chunks
        .par_iter()
        .map(|&(s, e)| {
            let mut sum = Mat::zeros(n, n);
            let mut sum2 = Mat::zeros(n, n);
            for path in s..e {
                let v = one_path(path)?;
                sum2 += v.component_mul(&v);
                sum += v;
            }
            Some((sum, sum2))
        })
        .collect();
    let mut sum = Mat::zeros(n, n);
    let mut sum2 = Mat::zeros(n, n);
    for part in parts {
        match part {
            Some((s, s2)) => {
                sum += s;
                sum2 += s2;
            }
            None => {
                return Ok(LyapunovOracle {
                    p: SymMatrix::new(&Mat::from_element(n, n, f64::INFINITY)),
                    std_error: Mat::from_element(n, n, f64::INFINITY),
                    divergent: true,
                })
            }
        }
    }
    let np = cfg.paths as f64;
    let mean = &sum / np;
    let var = (&sum2 / np - mean.component_mul(&mean)).map(|v| v.max(0.0));
    Ok(LyapunovOracle { p: SymMatrix::new(&mean), std_error: var.map(|v| (v / np).sqrt()), divergent: false })
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct StabilityEvidence {
    /// Largest real part of the eigenvalues of `A+Ā`.
    pub mean_spectral_abscissa: f64,
    /// Solution of the Lyapunov equation with weight `I`, when nonsingular.
    pub lyapunov_identity: Option<LyapunovSolution>,
    /// Solution of the Lyapunov equation with weight `Q`, when nonsingular.
    pub lyapunov_q: Option<LyapunovSolution>,
    /// Whether `(Q+Q̄)^{1/2}e^{(A+Ā)t}` is square integrable.
    pub mean_weight_integrable: Option<bool>,
    pub fired: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityVerdict {
    pub exp_stable: Verdict,
    pub globally_integrable: Verdict,
    pub asymptotically_stable: Verdict,
    pub qq_integrable: Verdict,
    pub evidence: StabilityEvidence,
}

impl StabilityVerdict {
    /// Rejects combinations that break `exp ⇒ globally integrable ⇒ asymptotic`.
    pub fn new(
        exp_stable: Verdict,
        globally_integrable: Verdict,
        asymptotically_stable: Verdict,
        qq_integrable: Verdict,
        evidence: StabilityEvidence,
    ) -> Result<Self> {
        let implies = |a: Verdict, b: Verdict| !(a == Verdict::True && b != Verdict::True);
        let denies = |b: Verdict, a: Verdict| !(b == Verdict::False && a != Verdict::False);
        if !implies(exp_stable, globally_integrable)
            || !implies(globally_integrable, asymptotically_stable)
            || !denies(asymptotically_stable, globally_integrable)
            || !denies(globally_integrable, exp_stable)
        {
            return Err(Error::Value("stability verdict violates the implication chain".into()));
        }
        Ok(Self { exp_stable, globally_integrable, asymptotically_stable, qq_integrable, evidence })
    }

    pub fn chain_consistent(&self) -> bool {
        Self::new(
            self.exp_stable,
            self.globally_integrable,
            self.asymptotically_stable,
            self.qq_integrable,
            StabilityEvidence::default(),
        )
        .is_ok()
    }
}

const RANK_TOL: f64 = 1e-9;

/// PSD square root with negative eigenvalues clipped to zero.
fn psd_sqrt(m: &Mat) -> Result<Mat> {
    let e = eig_sym(&SymMatrix::new(m))?;
    let d = Mat::from_diagonal(&e.values.map(|v| v.max(0.0).sqrt()));
    Ok(&e.vectors * d * e.vectors.transpose())
}

/// Orthonormal basis (columns) of the row space of `m`, at relative tolerance.
fn row_space(m: &Mat) -> Mat {
    let n = m.ncols();
    if m.nrows() == 0 {
        return Mat::zeros(n, 0);
    }
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("svd v_t");
    let smax = svd.singular_values.max();
    let cols: Vec<_> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| smax > 0.0 && s > RANK_TOL * smax)
        .map(|(k, _)| vt.row(k).transpose())
        .collect();
    if cols.is_empty() {
        Mat::zeros(n, 0)
    } else {
        Mat::from_columns(&cols)
    }
}

/// Square integrability of `H e^{Ât}` on `[0, ∞)`: the unobservable subspace
/// of `(Â, H)` is invariant, so the observable part lives on its orthogonal
/// complement `W` and evolves by `WᵀÂW`, which must be Hurwitz.
pub fn observable_part_hurwitz(a_hat: &Mat, h: &Mat) -> bool {
    let n = a_hat.nrows();
    let mut rows = Vec::with_capacity(n);
    let mut cur = h.clone();
    for _ in 0..n {
        rows.push(cur.clone());
        cur = &cur * a_hat;
    }
    let total: usize = rows.iter().map(|r| r.nrows()).sum();
    let mut obs = Mat::zeros(total, n);
    let mut at = 0;
    for r in &rows {
        obs.rows_mut(at, r.nrows()).copy_from(r);
        at += r.nrows();
    }
    let w = row_space(&obs);
    if w.ncols() == 0 {
        return true;
    }
    spectral_abscissa(&(w.transpose() * a_hat * &w)) < 0.0
}

/// Whether `𝒩(G) ⊆ 𝒩(C)` for symmetric `G`.
fn kernel_contained(g: &Mat, c: &Mat) -> Result<bool> {
    let e = eig_sym(&SymMatrix::new(g))?;
    let scale = e.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    let cscale = 1.0 + c.norm();
    for (k, &v) in e.values.iter().enumerate() {
        if v.abs() <= RANK_TOL * scale && (c * e.vectors.column(k)).norm() > RANK_TOL * cscale {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Classify the uncontrolled system `(A, Ā, C, C̄)`; `B`, `D` are ignored.
pub fn classify(sys: &SystemMatrices, cost: &CostWeights) -> StabilityVerdict {
    classify_inner(sys, cost).unwrap_or_else(|e| {
        let ev = StabilityEvidence { fired: vec![format!("numerical failure: {e}")], ..Default::default() };
        StabilityVerdict::new(Verdict::Unknown, Verdict::Unknown, Verdict::Unknown, Verdict::Unknown, ev)
            .expect("all-unknown verdict is consistent")
    })
}

fn classify_inner(sys: &SystemMatrices, cost: &CostWeights) -> Result<StabilityVerdict> {
    use Verdict::*;
    let n = sys.n;
    let a_hat = sys.a_hat();
    let c_hat = sys.c_hat();
    let q_hat = cost.q_hat();
    let mut ev = StabilityEvidence { mean_spectral_abscissa: spectral_abscissa(&a_hat), ..Default::default() };
    let c_cancels = c_hat.iter().all(|&v| v == 0.0);
    let weights_psd = lambda_min(cost.q.as_mat()) >= -LYAP_EIG_TOL && lambda_min(&q_hat) >= -LYAP_EIG_TOL;

    ev.mean_weight_integrable = Some(observable_part_hurwitz(&a_hat, &psd_sqrt(&q_hat)?));
    ev.lyapunov_identity = solve_lyapunov(&sys.a, &sys.c, &SymMatrix::identity(n)).ok();
    ev.lyapunov_q = solve_lyapunov(&sys.a, &sys.c, &cost.q).ok();

    // stability notions
    let (exp, glob, asym);
    if ev.mean_spectral_abscissa >= 0.0 {
        ev.fired.push("A+Ā not Hurwitz: every stability notion fails".into());
        (exp, glob, asym) = (False, False, False);
    } else if n == 1 {
        let s = ScalarSystem::new(sys.a[(0, 0)], sys.a_bar[(0, 0)], sys.c[(0, 0)], sys.c_bar[(0, 0)])?;
        let ok = scalar_criterion(&s);
        ev.fired.push(format!("scalar criterion: {ok}"));
        let v = Verdict::from_bool(ok);
        (exp, glob, asym) = (v, v, v);
    } else {
        let lyap_pd = ev
            .lyapunov_identity
            .as_ref()
            .is_some_and(|l| l.lambda_min > LYAP_EIG_TOL * (1.0 + l.p.as_mat().norm()));
        if lyap_pd || c_cancels {
            ev.fired.push(if lyap_pd {
                "[A,C] globally integrable (Lyapunov with I has a PD solution) and A+Ā Hurwitz".into()
            } else {
                "C+C̄ = 0 and A+Ā Hurwitz".into()
            });
            (exp, glob, asym) = (True, True, True);
        } else {
            ev.fired.push("no sufficient criterion applies".into());
            (exp, glob, asym) = (Unknown, Unknown, Unknown);
        }
    }

    // integrability with the cost weights
    let qq = if exp == True {
        ev.fired.push("exponential stability makes every quadratic cost finite".into());
        True
    } else if !weights_psd {
        ev.fired.push("Q or Q+Q̄ indefinite: cost integrability not decided".into());
        Unknown
    } else if ev.mean_weight_integrable == Some(false) {
        ev.fired.push("(Q+Q̄)^{1/2}e^{(A+Ā)t} not square integrable".into());
        False
    } else if c_cancels {
        ev.fired.push("mean weight integrable and C+C̄ = 0".into());
        True
    } else {
        let lyap_q_psd = ev.lyapunov_q.as_ref().is_some_and(|l| l.psd);
        if lyap_q_psd && kernel_contained(&q_hat, &c_hat)? {
            ev.fired.push("mean weight integrable, [A,C] L²_Q-integrable and N(Q+Q̄) ⊆ N(C+C̄)".into());
            True
        } else {
            Unknown
        }
    };
    StabilityVerdict::new(exp, glob, asym, qq, ev)
}
