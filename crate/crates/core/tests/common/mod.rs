#![allow(dead_code)]

use mflq::matkit::{Mat, SymMatrix, Vector};
use mflq::model::{CostWeights, MfLqProblem, SystemMatrices};
use mflq::simulate::FeedbackPolicy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_path(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn data(name: &str) -> MfLqProblem {
    let s = std::fs::read_to_string(data_path(name)).expect("data file");
    MfLqProblem::from_json_str(&s).expect("valid problem")
}

pub fn rows(r: usize, c: usize, v: &[f64]) -> Mat {
    Mat::from_row_slice(r, c, v)
}

/// §7.2 printed `P`.
pub fn printed_p() -> Mat {
    rows(5, 5, &[
        0.4151, 0.3890, 0.2068, 0.0162, -0.4059,
        0.3890, 2.7208, 1.9097, -2.6074, -0.7756,
        0.2068, 1.9097, 1.8535, -1.8330, -0.8979,
        0.0162, -2.6074, -1.8330, 4.2403, -0.2665,
        -0.4059, -0.7756, -0.8979, -0.2665, 2.1537,
    ])
}

/// §7.2 printed `Π`.
pub fn printed_pi() -> Mat {
    rows(5, 5, &[
        0.6147, 0.5721, 0.2644, -0.1455, -0.6138,
        0.5721, 4.2579, 2.8706, -4.4158, -0.6536,
        0.2644, 2.8706, 2.6758, -2.6653, -1.0890,
        -0.1455, -4.4158, -2.6653, 6.8158, -1.0674,
        -0.6138, -0.6536, -1.0890, -1.0674, 3.1641,
    ])
}

/// §7.1 printed `K̄ = ȲX̄⁻¹`.
pub fn printed_k_bar() -> Mat {
    rows(2, 5, &[
        4.0644, 1.2449, -3.7655, 1.9996, -1.3936,
        4.2782, 0.3405, 0.6593, 0.7858, 0.2849,
    ])
}

/// §7.1 printed `𝕏`.
pub fn printed_x() -> Mat {
    rows(5, 5, &[
        26.1032, 0.6379, -7.9410, 1.4143, -7.4032,
        0.6379, 17.0911, -0.4114, 8.2578, 1.3415,
        -7.9410, -0.4114, 19.4946, 1.1492, 14.0620,
        1.4143, 8.2578, 1.1492, 21.8509, 7.8151,
        -7.4032, 1.3415, 14.0620, 7.8151, 40.5193,
    ])
}

/// §7.1 printed `𝕏̄`.
pub fn printed_x_bar() -> Mat {
    rows(5, 5, &[
        0.0471, -0.0617, 0.0114, -0.2361, -0.0333,
        -0.0617, -0.1398, -0.1104, 0.2431, 0.3623,
        0.0114, -0.1104, 0.0283, 0.1159, 0.0443,
        -0.2361, 0.2431, 0.1159, 0.4583, 0.0880,
        -0.0333, 0.3623, 0.0443, 0.0880, 0.0952,
    ])
}

pub fn printed_y() -> Mat {
    rows(2, 5, &[
        -12.1167, -1.8513, 7.0876, -11.3987, -1.6418,
        0.9756, 2.1581, 5.2614, -16.0940, -12.8827,
    ])
}

pub fn printed_y_bar() -> Mat {
    rows(2, 5, &[
        -0.3539, -0.0281, -0.0278, -0.2997, 0.1924,
        -0.0070, -0.0900, 0.1334, -0.4658, 0.1065,
    ])
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.gen_range(-scale..scale))
}

/// `GGᵀ` with `G` of the given rank.
pub fn rand_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> Mat {
    let g = rand_mat(rng, n, rank, 1.0);
    &g * g.transpose()
}

pub fn rand_pd(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    rand_psd(rng, n, n) + Mat::identity(n, n) * 0.5
}

pub fn sym(m: &Mat) -> SymMatrix {
    SymMatrix::new(m)
}

pub fn problem(system: SystemMatrices, cost: CostWeights, x0: &[f64]) -> MfLqProblem {
    MfLqProblem::new(system, cost, Vector::from_column_slice(x0)).expect("valid problem")
}

pub fn scalar_cost(q: f64, q_bar: f64, r: f64, r_bar: f64) -> CostWeights {
    CostWeights {
        q: SymMatrix::from_diagonal(&[q]),
        q_bar: SymMatrix::from_diagonal(&[q_bar]),
        r: SymMatrix::from_diagonal(&[r]),
        r_bar: SymMatrix::from_diagonal(&[r_bar]),
    }
}

/// Closed-loop mean `m` and centred covariance `Σ` of the controlled state.
///
/// `m' = (Â+B̂K̄)m`, `Σ' = A_KΣ + ΣA_Kᵀ + C_KΣC_Kᵀ + ggᵀ` with `g = (Ĉ+D̂K̄)m`.
pub struct MomentOde<'a> {
    p: &'a MfLqProblem,
    acl: Mat,
    ccl: Mat,
    mean: Mat,
    g: Mat,
    pub m: Mat,
    pub sigma: Mat,
}

impl<'a> MomentOde<'a> {
    pub fn new(p: &'a MfLqProblem, policy: &FeedbackPolicy) -> Self {
        let s = &p.system;
        Self {
            p,
            acl: &s.a + &s.b * &policy.k,
            ccl: &s.c + &s.d * &policy.k,
            mean: s.a_hat() + s.b_hat() * &policy.k_bar,
            g: s.c_hat() + s.d_hat() * &policy.k_bar,
            m: Mat::from_column_slice(s.n, 1, p.x0.as_slice()),
            sigma: Mat::zeros(s.n, s.n),
        }
    }

    fn rhs(&self, m: &Mat, sg: &Mat) -> (Mat, Mat) {
        let gm = &self.g * m;
        (&self.mean * m, &self.acl * sg + sg * self.acl.transpose() + &self.ccl * sg * self.ccl.transpose() + &gm * gm.transpose())
    }

    pub fn step(&mut self, dt: f64) {
        let (m, s) = (&self.m, &self.sigma);
        let (k1m, k1s) = self.rhs(m, s);
        let (k2m, k2s) = self.rhs(&(m + &k1m * (dt / 2.0)), &(s + &k1s * (dt / 2.0)));
        let (k3m, k3s) = self.rhs(&(m + &k2m * (dt / 2.0)), &(s + &k2s * (dt / 2.0)));
        let (k4m, k4s) = self.rhs(&(m + &k3m * dt), &(s + &k3s * dt));
        self.m += (k1m + k2m * 2.0 + k3m * 2.0 + k4m) * (dt / 6.0);
        self.sigma += (k1s + k2s * 2.0 + k3s * 2.0 + k4s) * (dt / 6.0);
    }

    /// `E|X|² = tr Σ + |m|²`.
    pub fn second_moment(&self) -> f64 {
        self.sigma.trace() + self.m.norm_squared()
    }

    fn running_cost(&self, policy: &FeedbackPolicy) -> f64 {
        let c = &self.p.cost;
        let w = c.q.as_mat() + policy.k.transpose() * c.r.as_mat() * &policy.k;
        let wm = c.q_hat() + policy.k_bar.transpose() * c.r_hat() * &policy.k_bar;
        (w * &self.sigma).trace() + (self.m.transpose() * wm * &self.m)[(0, 0)]
    }
}

/// Exact cost of a linear feedback over `[0, horizon]` from the moment ODE
/// (RK4 at step `dt`, trapezoid quadrature).
pub fn exact_cost(p: &MfLqProblem, policy: &FeedbackPolicy, horizon: f64, dt: f64) -> f64 {
    let mut ode = MomentOde::new(p, policy);
    let steps = (horizon / dt).round() as usize;
    let mut j = 0.0;
    let mut prev = ode.running_cost(policy);
    for _ in 0..steps {
        ode.step(dt);
        let cur = ode.running_cost(policy);
        j += 0.5 * dt * (prev + cur);
        prev = cur;
    }
    j
}

/// `E|X(t)|²` from the moment ODE.
pub fn exact_second_moment(p: &MfLqProblem, policy: &FeedbackPolicy, t: f64, dt: f64) -> f64 {
    let mut ode = MomentOde::new(p, policy);
    for _ in 0..(t / dt).round() as usize {
        ode.step(dt);
    }
    ode.second_moment()
}
