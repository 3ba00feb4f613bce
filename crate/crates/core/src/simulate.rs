//! Monte-Carlo simulation of the closed loop under linear mean-field feedback.
//!
//! With `u = K(X − E[X]) + K̄E[X]` the mean `m = E[X]` solves the linear ODE
//! `ṁ = (A+Ā+(B+B̄)K̄)m` and is integrated by RK4 once. Each path evolves the
//! centred state `Y = X − m` by Euler–Maruyama,
//! `dY = (A+BK)Y dt + [(C+DK)Y + (C+C̄+(D+D̄)K̄)m] dW`,
//! which is the state equation with `E[X]`, `E[u]` read from the mean path.
//! Paths are independent; each draws its Gaussian increments from a ChaCha
//! stream selected by `(seed, path)` and consumed one draw per step, so results
//! do not depend on the number of worker threads. Aggregation runs over fixed
//! chunks of paths in ascending order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matkit::{serde_mat, Mat, Vector};
use crate::model::MfLqProblem;

/// `u = K(X − E[X]) + K̄E[X]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeedbackPolicy {
    #[serde(rename = "K", serialize_with = "serde_mat::mat")]
    pub k: Mat,
    #[serde(rename = "K_bar", serialize_with = "serde_mat::mat")]
    pub k_bar: Mat,
}

impl FeedbackPolicy {
    pub fn new(k: Mat, k_bar: Mat) -> Self {
        Self { k, k_bar }
    }

    pub fn zero(n: usize, m: usize) -> Self {
        Self { k: Mat::zeros(m, n), k_bar: Mat::zeros(m, n) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    Truncate,
    GeometricExtrapolate,
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
    pub tail_mode: TailMode,
    /// Number of leading paths whose states are stored in a [`Trajectory`].
    pub record_paths: usize,
    /// Store every `record_stride`-th grid point.
    pub record_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 20.0,
            paths: 10_000,
            seed: 0,
            tail_mode: TailMode::Truncate,
            record_paths: 16,
            record_stride: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Value("dt must be positive".into()));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(Error::Value("horizon must be at least dt".into()));
        }
        if self.paths == 0 {
            return Err(Error::Value("paths must be at least 1".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::Value("record_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round().max(1.0) as usize
    }
}

/// State norm beyond which a run is declared unstable.
pub const OVERFLOW_NORM: f64 = 1e12;

/// Paths per aggregation chunk. Fixed, so reductions do not depend on threads.
const CHUNK: usize = 64;

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    /// Recorded grid points.
    pub times: Vec<f64>,
    pub mean_path: Vec<Vec<f64>>,
    /// `E[u] = K̄E[X]` on the recorded grid.
    pub mean_control: Vec<Vec<f64>>,
    /// `[path][time][component]` for the first `record_paths` paths.
    pub sample_states: Vec<Vec<Vec<f64>>>,
    pub sample_controls: Vec<Vec<Vec<f64>>>,
    /// `[path][step]` increments `ΔW` of the recorded paths (every step).
    pub brownian_increments: Vec<Vec<f64>>,
    /// Path average of `X` over all paths.
    pub empirical_mean: Vec<Vec<f64>>,
    /// Componentwise sample standard deviation of `X` over all paths.
    pub empirical_std: Vec<Vec<f64>>,
    /// Componentwise path variance of `X`.
    pub empirical_var: Vec<Vec<f64>>,
    /// Path average of `|X|²` and its standard error.
    pub second_moment: Vec<f64>,
    pub second_moment_se: Vec<f64>,
    pub paths: usize,
}

impl Trajectory {
    /// CSV with columns `time, path_id, x1..xn, u1..um`; the mean path has `path_id = -1`.
    pub fn to_csv(&self) -> String {
        let n = self.mean_path.first().map_or(0, |v| v.len());
        let m = self.mean_control.first().map_or(0, |v| v.len());
        let mut s = String::from("time,path_id");
        for i in 1..=n {
            let _ = write!(s, ",x{i}");
        }
        for i in 1..=m {
            let _ = write!(s, ",u{i}");
        }
        s.push('\n');
        let row = |s: &mut String, t: f64, id: i64, x: &[f64], u: &[f64]| {
            let _ = write!(s, "{t},{id}");
            for v in x.iter().chain(u) {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        };
        for (k, &t) in self.times.iter().enumerate() {
            row(&mut s, t, -1, &self.mean_path[k], &self.mean_control[k]);
        }
        for (p, states) in self.sample_states.iter().enumerate() {
            for (k, &t) in self.times.iter().enumerate() {
                row(&mut s, t, p as i64, &states[k], &self.sample_controls[p][k]);
            }
        }
        s
    }
}

/// Row-major copy of a small dense matrix.
fn flat(m: &Mat) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

#[inline]
fn matvec(a: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &a[i * n..(i + 1) * n];
        let mut s = 0.0;
        for j in 0..n {
            s += row[j] * x[j];
        }
        *o = s;
    }
}

#[inline]
fn quad(a: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n {
        let row = &a[i * n..(i + 1) * n];
        let mut r = 0.0;
        for j in 0..n {
            r += row[j] * x[j];
        }
        s += x[i] * r;
    }
    s
}

/// Precomputed closed loop on a fixed grid.
pub(crate) struct Engine {
    pub n: usize,
    pub m: usize,
    pub steps: usize,
    pub dt: f64,
    sqrt_dt: f64,
    seed: u64,
    acl: Vec<f64>,
    ccl: Vec<f64>,
    k: Vec<f64>,
    /// `m_k`, `(steps+1)·n`.
    pub mean: Vec<f64>,
    /// `E[u]_k = K̄m_k`, `(steps+1)·m`.
    pub mean_u: Vec<f64>,
    /// `(C+C̄+(D+D̄)K̄)m_k`.
    gm: Vec<f64>,
}

impl Engine {
    pub fn new(p: &MfLqProblem, policy: &FeedbackPolicy, cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let s = &p.system;
        let (n, m) = (s.n, s.m);
        if policy.k.shape() != (m, n) || policy.k_bar.shape() != (m, n) {
            return Err(Error::Dimension(format!("policy gains must be {m}x{n}")));
        }
        let steps = cfg.steps();
        let dt = cfg.horizon / steps as f64;
        let mean_mat = s.a_hat() + s.b_hat() * &policy.k_bar;
        let g = s.c_hat() + s.d_hat() * &policy.k_bar;
        let mut mean = Vec::with_capacity((steps + 1) * n);
        let mut cur = p.x0.clone();
        mean.extend(cur.iter());
        for k in 0..steps {
            let k1 = &mean_mat * &cur;
            let k2 = &mean_mat * (&cur + &k1 * (0.5 * dt));
            let k3 = &mean_mat * (&cur + &k2 * (0.5 * dt));
            let k4 = &mean_mat * (&cur + &k3 * dt);
            cur += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            let norm = cur.norm();
            if !(norm <= OVERFLOW_NORM) {
                return Err(Error::Overflow { time: (k + 1) as f64 * dt, norm });
            }
            mean.extend(cur.iter());
        }
        let mut mean_u = Vec::with_capacity((steps + 1) * m);
        let mut gm = Vec::with_capacity((steps + 1) * n);
        for k in 0..=steps {
            let mk = Vector::from_column_slice(&mean[k * n..(k + 1) * n]);
            mean_u.extend((&policy.k_bar * &mk).iter());
            gm.extend((&g * &mk).iter());
        }
        Ok(Self {
            n,
            m,
            steps,
            dt,
            sqrt_dt: dt.sqrt(),
            seed: cfg.seed,
            acl: flat(&(&s.a + &s.b * &policy.k)),
            ccl: flat(&(&s.c + &s.d * &policy.k)),
            k: flat(&policy.k),
            mean,
            mean_u,
            gm,
        })
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn mean_at(&self, k: usize) -> &[f64] {
        &self.mean[k * self.n..(k + 1) * self.n]
    }

    pub fn mean_u_at(&self, k: usize) -> &[f64] {
        &self.mean_u[k * self.m..(k + 1) * self.m]
    }

    /// `v = K·y` (centred control).
    #[inline]
    pub fn centred_control(&self, y: &[f64], v: &mut [f64]) {
        let n = self.n;
        for (i, o) in v.iter_mut().enumerate() {
            let row = &self.k[i * n..(i + 1) * n];
            *o = row.iter().zip(y).map(|(a, b)| a * b).sum();
        }
    }

    /// Run one path for steps `0..=last`; `f(k, y_k, dW_k)` sees the centred
    /// state before the increment `dW_k` is applied (`dW_last` is reported as 0).
    pub fn run_path<F: FnMut(usize, &[f64], f64)>(&self, path: usize, last: usize, mut f: F) -> Result<()> {
        let n = self.n;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path as u64);
        let mut y = vec![0.0; n];
        let mut drift = vec![0.0; n];
        let mut diff = vec![0.0; n];
        for k in 0..=last.min(self.steps) {
            if k == last.min(self.steps) {
                f(k, &y, 0.0);
                break;
            }
            let z: f64 = StandardNormal.sample(&mut rng);
            let dw = z * self.sqrt_dt;
            f(k, &y, dw);
            matvec(&self.acl, &y, &mut drift);
            matvec(&self.ccl, &y, &mut diff);
            let gm = &self.gm[k * n..(k + 1) * n];
            let mut norm2 = 0.0;
            for i in 0..n {
                y[i] += drift[i] * self.dt + (diff[i] + gm[i]) * dw;
                norm2 += y[i] * y[i];
            }
            if !(norm2 <= OVERFLOW_NORM * OVERFLOW_NORM) {
                return Err(Error::Overflow { time: self.time(k + 1), norm: norm2.sqrt() });
            }
        }
        Ok(())
    }

    /// Map every path to a value, fold each fixed-size chunk in path order,
    /// then merge chunk results in chunk order.
    pub fn map_reduce<T, I, P, M>(&self, paths: usize, init: I, per_path: P, merge: M) -> Result<T>
    where
        T: Send,
        I: Fn() -> T + Sync,
        P: Fn(usize, &mut T) -> Result<()> + Sync,
        M: Fn(&mut T, T),
    {
        let chunks: Vec<(usize, usize)> = (0..paths)
            .step_by(CHUNK)
            .map(|s| (s, (s + CHUNK).min(paths)))
            .collect();
        let parts: Vec<Result<T>> = chunks
            .par_iter()
            .map(|&(s, e)| {
                let mut acc = init();
                for path in s..e {
                    per_path(path, &mut acc)?;
                }
                Ok(acc)
            })
            .collect();
        let mut out = init();
        for part in parts {
            merge(&mut out, part?);
        }
        Ok(out)
    }
}

#[derive(Clone)]
struct MomentAcc {
    sum: Vec<f64>,
    sum2: Vec<f64>,
    norm2: Vec<f64>,
    norm4: Vec<f64>,
}

/// Simulate the closed loop and collect path statistics.
pub fn simulate(p: &MfLqProblem, policy: &FeedbackPolicy, cfg: &SimConfig) -> Result<Trajectory> {
    let eng = Engine::new(p, policy, cfg)?;
    let (n, m, steps) = (eng.n, eng.m, eng.steps);
    let stride = cfg.record_stride;
    let rec: Vec<usize> = (0..=steps).step_by(stride).collect();
    let nt = rec.len();
    let slot = |k: usize| (k % stride == 0).then_some(k / stride);

    let moments = eng.map_reduce(
        cfg.paths,
        || MomentAcc {
            sum: vec![0.0; nt * n],
            sum2: vec![0.0; nt * n],
            norm2: vec![0.0; nt],
            norm4: vec![0.0; nt],
        },
        |path, acc| {
            eng.run_path(path, steps, |k, y, _| {
                if let Some(r) = slot(k) {
                    let mk = eng.mean_at(k);
                    let mut s2 = 0.0;
                    for i in 0..n {
                        let x = mk[i] + y[i];
                        // deviations from the exact mean keep the variance sum exact when Y ≡ 0
                        acc.sum[r * n + i] += y[i];
                        acc.sum2[r * n + i] += y[i] * y[i];
                        s2 += x * x;
                    }
                    acc.norm2[r] += s2;
                    acc.norm4[r] += s2 * s2;
                }
            })
        },
        |a, b| {
            for (x, y) in a.sum.iter_mut().zip(&b.sum) {
                *x += y;
            }
            for (x, y) in a.sum2.iter_mut().zip(&b.sum2) {
                *x += y;
            }
            for (x, y) in a.norm2.iter_mut().zip(&b.norm2) {
                *x += y;
            }
            for (x, y) in a.norm4.iter_mut().zip(&b.norm4) {
                *x += y;
            }
        },
    )?;

    let np = cfg.paths as f64;
    let mut traj = Trajectory {
        times: rec.iter().map(|&k| eng.time(k)).collect(),
        mean_path: rec.iter().map(|&k| eng.mean_at(k).to_vec()).collect(),
        mean_control: rec.iter().map(|&k| eng.mean_u_at(k).to_vec()).collect(),
        sample_states: Vec::new(),
        sample_controls: Vec::new(),
        brownian_increments: Vec::new(),
        empirical_mean: Vec::with_capacity(nt),
        empirical_std: Vec::with_capacity(nt),
        empirical_var: Vec::with_capacity(nt),
        second_moment: Vec::with_capacity(nt),
        second_moment_se: Vec::with_capacity(nt),
        paths: cfg.paths,
    };
    for (r, &k) in rec.iter().enumerate() {
        let mk = eng.mean_at(k);
        let mut mean = Vec::with_capacity(n);
        let mut var = Vec::with_capacity(n);
        for i in 0..n {
            let dy = moments.sum[r * n + i] / np;
            let v = (moments.sum2[r * n + i] / np - dy * dy).max(0.0);
            mean.push(mk[i] + dy);
            var.push(v);
        }
        traj.empirical_std.push(var.iter().map(|v| v.sqrt()).collect());
        traj.empirical_mean.push(mean);
        traj.empirical_var.push(var);
        let m2 = moments.norm2[r] / np;
        let v2 = (moments.norm4[r] / np - m2 * m2).max(0.0);
        traj.second_moment.push(m2);
        traj.second_moment_se.push((v2 / np).sqrt());
    }

    for path in 0..cfg.record_paths.min(cfg.paths) {
        let mut states = Vec::with_capacity(nt);
        let mut controls = Vec::with_capacity(nt);
        let mut incs = Vec::with_capacity(steps);
        let mut v = vec![0.0; m];
        eng.run_path(path, steps, |k, y, dw| {
            if k < steps {
                incs.push(dw);
            }
            if slot(k).is_some() {
                let mk = eng.mean_at(k);
                states.push((0..n).map(|i| mk[i] + y[i]).collect::<Vec<_>>());
                eng.centred_control(y, &mut v);
                let eu = eng.mean_u_at(k);
                controls.push((0..m).map(|i| v[i] + eu[i]).collect::<Vec<_>>());
            }
        })?;
        traj.sample_states.push(states);
        traj.sample_controls.push(controls);
        traj.brownian_increments.push(incs);
    }
    Ok(traj)
}

#[derive(Clone, Debug, Serialize)]
pub struct CostEstimate {
    pub value: f64,
    pub std_error: f64,
    pub horizon_used: f64,
    /// Geometric tail estimate beyond the horizon, when a decay fit exists.
    pub tail_bound: Option<f64>,
    /// Fitted exponential rate of the mean running cost over the last 20%.
    pub decay_rate: Option<f64>,
    pub divergent: bool,
}

impl CostEstimate {
    fn divergent(horizon: f64) -> Self {
        Self {
            value: f64::INFINITY,
            std_error: f64::INFINITY,
            horizon_used: horizon,
            tail_bound: None,
            decay_rate: None,
            divergent: true,
        }
    }
}

/// Least-squares slope of `ln r` against `t` over the last 20% of the grid.
fn tail_fit(times: &[f64], running: &[f64]) -> Option<f64> {
    let len = running.len();
    let start = len - (len / 5).max(2).min(len);
    let pts: Vec<(f64, f64)> = (start..len)
        .filter(|&k| running[k] > 0.0 && running[k].is_finite())
        .map(|k| (times[k], running[k].ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let np = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / np;
    let lm = pts.iter().map(|p| p.1).sum::<f64>() / np;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - lm)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Per-path integrals gathered in one pass.
#[derive(Clone)]
struct CostAcc {
    total: f64,
    total2: f64,
    pen: f64,
    pen2: f64,
    diff2: f64,
    running: Vec<f64>,
}

/// Monte-Carlo cost with an optional quadratic penalty `∫ YᵀW_cY + mᵀW_m m`
/// evaluated on the same paths.
pub(crate) struct CostRun {
    pub cost: CostEstimate,
    /// Path mean of the penalty.
    pub penalty: f64,
    pub penalty_se: f64,
    /// Standard error of the per-path difference `cost − penalty`.
    pub diff_se: f64,
}

pub(crate) fn cost_run(p: &MfLqProblem, policy: &FeedbackPolicy, cfg: &SimConfig, w: Option<(&Mat, &Mat)>) -> Result<CostRun> {
    let eng = match Engine::new(p, policy, cfg) {
        Ok(e) => e,
        Err(Error::Overflow { .. }) => return Ok(diverged(cfg)),
        Err(e) => return Err(e),
    };
    let (n, m, steps, dt) = (eng.n, eng.m, eng.steps, eng.dt);
    let q = flat(p.cost.q.as_mat());
    let r = flat(p.cost.r.as_mat());
    let wm = w.map(|(_, wm)| flat(wm));
    let w = w.map(|(wc, _)| flat(wc));
    // terms depending only on the mean: ⟨Q̄m,m⟩ + ⟨R̄Eu,Eu⟩
    let qb = flat(p.cost.q_bar.as_mat());
    let rb = flat(p.cost.r_bar.as_mat());
    let det: Vec<f64> = (0..=steps)
        .map(|k| quad(&qb, eng.mean_at(k)) + quad(&rb, eng.mean_u_at(k)))
        .collect();
    let mean_pen: f64 = wm.as_ref().map_or(0.0, |wm| {
        (0..=steps)
            .map(|k| if k == 0 || k == steps { 0.5 * dt } else { dt } * quad(wm, eng.mean_at(k)))
            .sum()
    });
    let res = eng.map_reduce(
        cfg.paths,
        || CostAcc { total: 0.0, total2: 0.0, pen: 0.0, pen2: 0.0, diff2: 0.0, running: vec![0.0; steps + 1] },
        |path, acc| {
            let mut x = vec![0.0; n];
            let mut u = vec![0.0; m];
            let (mut tot, mut pen) = (0.0, mean_pen);
            eng.run_path(path, steps, |k, y, _| {
                let mk = eng.mean_at(k);
                let eu = eng.mean_u_at(k);
                for i in 0..n {
                    x[i] = mk[i] + y[i];
                }
                eng.centred_control(y, &mut u);
                for i in 0..m {
                    u[i] += eu[i];
                }
                let rc = quad(&q, &x) + quad(&r, &u) + det[k];
                let wt = if k == 0 || k == steps { 0.5 * dt } else { dt };
                tot += wt * rc;
                acc.running[k] += rc;
                if let Some(w) = &w {
                    pen += wt * quad(w, y);
                }
            })?;
            acc.total += tot;
            acc.total2 += tot * tot;
            acc.pen += pen;
            acc.pen2 += pen * pen;
            acc.diff2 += (tot - pen) * (tot - pen);
            Ok(())
        },
        |a, b| {
            a.total += b.total;
            a.total2 += b.total2;
            a.pen += b.pen;
            a.pen2 += b.pen2;
            a.diff2 += b.diff2;
            for (x, y) in a.running.iter_mut().zip(&b.running) {
                *x += y;
            }
        },
    );
    let res = match res {
        Ok(r) => r,
        Err(Error::Overflow { .. }) => return Ok(diverged(cfg)),
        Err(e) => return Err(e),
    };
    let np = cfg.paths as f64;
    let se = |s: f64, s2: f64| ((s2 / np - (s / np).powi(2)).max(0.0) / np).sqrt();
    let mean_running: Vec<f64> = res.running.iter().map(|v| v / np).collect();
    let times: Vec<f64> = (0..=steps).map(|k| eng.time(k)).collect();
    let rate = tail_fit(&times, &mean_running);
    let last = mean_running[steps];
    let divergent = rate.is_some_and(|b| b >= 0.0) || !res.total.is_finite();
    let tail = match rate {
        Some(b) if b < 0.0 => Some(last / -b),
        None if last == 0.0 => Some(0.0),
        _ => None,
    };
    let mut value = res.total / np;
    if cfg.tail_mode == TailMode::GeometricExtrapolate {
        if let Some(t) = tail {
            value += t;
        }
    }
    let pen = res.pen / np;
    let diff_mean = (res.total - res.pen) / np;
    Ok(CostRun {
        cost: CostEstimate {
            value: if divergent { f64::INFINITY } else { value },
            std_error: se(res.total, res.total2),
            horizon_used: eng.time(steps),
            tail_bound: tail,
            decay_rate: rate,
            divergent,
        },
        penalty: pen,
        penalty_se: se(res.pen, res.pen2),
        diff_se: ((res.diff2 / np - diff_mean * diff_mean).max(0.0) / np).sqrt(),
    })
}

fn diverged(cfg: &SimConfig) -> CostRun {
    CostRun {
        cost: CostEstimate::divergent(cfg.horizon),
        penalty: f64::INFINITY,
        penalty_se: f64::INFINITY,
        diff_se: f64::INFINITY,
    }
}

/// Monte-Carlo estimate of the cost over `[0, T]` (plus a geometric tail
/// in `GeometricExtrapolate` mode). Overflow and non-decaying running cost
/// are reported through `divergent`.
pub fn estimate_cost(p: &MfLqProblem, policy: &FeedbackPolicy, cfg: &SimConfig) -> Result<CostEstimate> {
    Ok(cost_run(p, policy, cfg, None)?.cost)
}

#[derive(Clone, Debug, Serialize)]
pub struct ItoCheck {
    /// `|LHS − RHS| / (1 + |RHS|)`.
    pub residual: f64,
    /// Standard error of the normalised per-path difference.
    pub std_error: f64,
    pub lhs: f64,
    pub rhs: f64,
}

/// Monte-Carlo check of the Itô identity for constant symmetric `M`, `N`:
///
/// `E∫₀ᵗ [ YᵀΦY + 2vᵀΨY + vᵀDᵀMDv + σᵀMσ + mᵀ(ÂᵀN + NÂ)m + 2E[u]ᵀB̂ᵀNm ] ds
///   = E[Y(t)ᵀMY(t)] + m(t)ᵀNm(t) − xᵀNx`
///
/// with `Y = X − m`, `v = u − E[u]`, `Φ = AᵀM + MA + CᵀMC`,
/// `Ψ = BᵀM + DᵀMC`, `σ = Ĉm + D̂E[u]` and hats denoting `A+Ā` etc.
pub fn ito_identity_check(
    p: &MfLqProblem,
    mm: &Mat,
    nn: &Mat,
    policy: &FeedbackPolicy,
    cfg: &SimConfig,
    t: f64,
) -> Result<ItoCheck> {
    if !(t > 0.0 && t <= cfg.horizon + 1e-12) {
        return Err(Error::Value("t must lie in (0, horizon]".into()));
    }
    let s = &p.system;
    let short = SimConfig { horizon: t.max(cfg.dt), ..cfg.clone() };
    let eng = Engine::new(p, policy, &short)?;
    let (n, m, steps, dt) = (eng.n, eng.m, eng.steps, eng.dt);
    let phi = flat(&(s.a.transpose() * mm + mm * &s.a + s.c.transpose() * mm * &s.c));
    let psi = flat(&(s.b.transpose() * mm + s.d.transpose() * mm * &s.c));
    let dmd = flat(&(s.d.transpose() * mm * &s.d));
    let mflat = flat(mm);
    let (ah, bh, ch, dh) = (s.a_hat(), s.b_hat(), s.c_hat(), s.d_hat());
    let det: Vec<f64> = (0..=steps)
        .map(|k| {
            let mk = Vector::from_column_slice(eng.mean_at(k));
            let eu = Vector::from_column_slice(eng.mean_u_at(k));
            let sig = &ch * &mk + &dh * &eu;
            let a = (sig.transpose() * mm * &sig)[(0, 0)];
            let b = (mk.transpose() * (ah.transpose() * nn + nn * &ah) * &mk)[(0, 0)];
            let c = 2.0 * (eu.transpose() * bh.transpose() * nn * &mk)[(0, 0)];
            a + b + c
        })
        .collect();
    let det_int: f64 = (0..=steps)
        .map(|k| if k == 0 || k == steps { 0.5 * dt * det[k] } else { dt * det[k] })
        .sum();
    let mt = Vector::from_column_slice(eng.mean_at(steps));
    let rhs_det = (mt.transpose() * nn * &mt)[(0, 0)] - (p.x0.transpose() * nn * &p.x0)[(0, 0)];

    #[derive(Clone)]
    struct Acc {
        d: f64,
        d2: f64,
        rhs: f64,
    }
    let acc = eng.map_reduce(
        short.paths,
        || Acc { d: 0.0, d2: 0.0, rhs: 0.0 },
        |path, acc| {
            let mut v = vec![0.0; m];
            let mut py = vec![0.0; m];
            let mut lhs = 0.0;
            let mut end = 0.0;
            eng.run_path(path, steps, |k, y, _| {
                eng.centred_control(y, &mut v);
                // Ψy
                for i in 0..m {
                    py[i] = (0..n).map(|j| psi[i * n + j] * y[j]).sum();
                }
                let f = quad(&phi, y)
                    + 2.0 * v.iter().zip(&py).map(|(a, b)| a * b).sum::<f64>()
                    + quad(&dmd, &v);
                let wt = if k == 0 || k == steps { 0.5 * dt } else { dt };
                lhs += wt * f;
                if k == steps {
                    end = quad(&mflat, y);
                }
            })?;
            let d = lhs - end;
            acc.d += d;
            acc.d2 += d * d;
            acc.rhs += end;
            Ok(())
        },
        |a, b| {
            a.d += b.d;
            a.d2 += b.d2;
            a.rhs += b.rhs;
        },
    )?;
    let np = short.paths as f64;
    let dm = acc.d / np;
    let rhs = acc.rhs / np + rhs_det;
    let lhs = rhs + dm + det_int - rhs_det;
    let scale = 1.0 + rhs.abs();
    let var = (acc.d2 / np - dm * dm).max(0.0);
    Ok(ItoCheck {
        residual: (lhs - rhs).abs() / scale,
        std_error: (var / np).sqrt() / scale,
        lhs,
        rhs,
    })
}

/// See [`ito_identity_check`].
pub fn ito_identity_residual(
    p: &MfLqProblem,
    mm: &Mat,
    nn: &Mat,
    policy: &FeedbackPolicy,
    cfg: &SimConfig,
    t: f64,
) -> Result<f64> {
    ito_identity_check(p, mm, nn, policy, cfg, t).map(|c| c.residual)
}

/// The two algebraically equivalent forms of the running cost at one time,
/// evaluated on sampled states and controls with their sample means:
/// `avg⟨QX,X⟩ + ⟨Q̄X̂,X̂⟩ + avg⟨Ru,u⟩ + ⟨R̄û,û⟩` and
/// `avg⟨Q(X−X̂),X−X̂⟩ + ⟨(Q+Q̄)X̂,X̂⟩ + avg⟨R(u−û),u−û⟩ + ⟨(R+R̄)û,û⟩`.
pub fn running_cost_forms(p: &MfLqProblem, states: &[Vec<f64>], controls: &[Vec<f64>]) -> (f64, f64) {
    let np = states.len() as f64;
    let avg = |v: &[Vec<f64>]| {
        let d = v.first().map_or(0, |x| x.len());
        let mut s = Vector::zeros(d);
        for x in v {
            s += Vector::from_column_slice(x);
        }
        s / np
    };
    let xh = avg(states);
    let uh = avg(controls);
    let c = &p.cost;
    let qf = |w: &Mat, x: &Vector| (x.transpose() * w * x)[(0, 0)];
    let mut raw = qf(c.q_bar.as_mat(), &xh) + qf(c.r_bar.as_mat(), &uh);
    let mut centred = qf(&c.q_hat(), &xh) + qf(&c.r_hat(), &uh);
    for (x, u) in states.iter().zip(controls) {
        let x = Vector::from_column_slice(x);
        let u = Vector::from_column_slice(u);
        raw += (qf(c.q.as_mat(), &x) + qf(c.r.as_mat(), &u)) / np;
        centred += (qf(c.q.as_mat(), &(&x - &xh)) + qf(c.r.as_mat(), &(&u - &uh))) / np;
    }
    (raw, centred)
}
