//! One PASS/FAIL line per acceptance criterion, written straight to stdout so
//! the lines show without `--nocapture`.

mod common;

use std::io::Write;
use std::time::Instant;

use common::*;
use mflq::control::{solve_mflq, verify_value, SolveOptions};
use mflq::matkit::{lambda_min, spectral_abscissa, Mat};
use mflq::model::{CostWeights, MfLqProblem, SystemMatrices};
use mflq::riccati::{are_sdp_problem, dual_residuals, solve_are_ode, solve_are_sdp, OdeOptions, SdpAreOptions};
use mflq::sdp::{self, SdpOptions, SdpProblem, SdpStatus};
use mflq::simulate::{ito_identity_check, simulate, FeedbackPolicy, SimConfig};
use mflq::stability::{scalar_criterion, scalar_second_moment, ScalarSystem};
use mflq::stabilize::{check_mf_stabilizable, verify_stabilizer};
use mflq::{Error, Verdict};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn report(n: usize, title: &str, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let o = f();
    let line = format!(
        "{} criterion {n}: {title} ({}; {:.1} s)\n",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        t.elapsed().as_secs_f64()
    );
    std::io::stdout().write_all(line.as_bytes()).unwrap();
    o.pass
}

fn sdp_opts() -> SdpAreOptions {
    SdpAreOptions::default()
}

fn c1() -> Outcome {
    let p = data("sec7.json");
    let sol = match solve_are_sdp(&p.system, &p.cost, None, &sdp_opts()) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("solver error: {e}")),
    };
    let dp = (sol.p.as_mat() - printed_p()).amax();
    let dpi = (sol.pi.as_mat() - printed_pi()).amax();
    let r = &sol.residuals;
    let pass = r.r_norm <= 1e-6 && r.rbar_norm <= 1e-6 && dp <= 5e-3 && dpi <= 5e-3;
    outcome(
        pass,
        format!(
            "|R| {:.1e}, |Rbar| {:.1e}, max|P-printed| {dp:.1e}, max|Pi-printed| {dpi:.1e}, Pi11 {:.4}, P11 {:.4}",
            r.r_norm,
            r.rbar_norm,
            sol.pi.as_mat()[(0, 0)],
            sol.p.as_mat()[(0, 0)]
        ),
    )
}

fn c2() -> Outcome {
    let p = data("sec7.json");
    let rep = check_mf_stabilizable(&p.system);
    let stabilizable = rep.mf_l2_stabilizable == Verdict::True;
    let verified = rep.gains.as_ref().is_some_and(|g| verify_stabilizer(&p.system, &p.cost, g));
    let printed = spectral_abscissa(&(p.system.a_hat() + p.system.b_hat() * printed_k_bar()));
    outcome(
        stabilizable && verified && printed < 0.0,
        format!(
            "MF-L2-stabilizable {stabilizable}, own gains verified {verified}, printed K_bar gives Re lambda_max {printed:.3} (must be < 0)"
        ),
    )
}

fn c3() -> Outcome {
    let p = data("sec7.json");
    let opts = SolveOptions { skip_verify: true, ..SolveOptions::default() };
    let sol = match solve_mflq(&p, &opts) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("solve error: {e}")),
    };
    let cfg = SimConfig { paths: 10_000, dt: 1e-3, horizon: 20.0, seed: 0, record_paths: 0, ..SimConfig::default() };
    match verify_value(&p, &sol, &cfg) {
        Ok(v) => {
            let budget = 3.0 * v.mc_cost.std_error + 0.01 * sol.predicted_value.abs();
            outcome(
                v.value_gap <= budget,
                format!(
                    "MC {:.4} +- {:.4} vs x0'Pi x0 {:.4}; gap {:.4} <= budget {:.4}",
                    v.mc_cost.value, v.mc_cost.std_error, sol.predicted_value, v.value_gap, budget
                ),
            )
        }
        Err(e) => outcome(false, format!("verification error: {e}")),
    }
}

fn c4() -> Outcome {
    let p = data("scalar_are.json");
    let root = 1.0 + 2f64.sqrt();
    let s = solve_are_sdp(&p.system, &p.cost, None, &sdp_opts());
    let o = solve_are_ode(&p.system, &p.cost, &OdeOptions::default());
    let (Ok(s), Ok((o, _))) = (s, o) else {
        return outcome(false, "a solver failed".into());
    };
    let err = |v: f64| (v - root).abs();
    let worst = [s.p.as_mat()[(0, 0)], s.pi.as_mat()[(0, 0)], o.p.as_mat()[(0, 0)], o.pi.as_mat()[(0, 0)]]
        .into_iter()
        .map(err)
        .fold(0.0, f64::max);
    let gap = (s.p.as_mat() - o.p.as_mat()).amax().max((s.pi.as_mat() - o.pi.as_mat()).amax());
    outcome(worst <= 1e-6 && gap <= 1e-6, format!("max error vs 1+sqrt2 {worst:.1e}, SDP-ODE gap {gap:.1e}"))
}

/// `E|X(t)|²` from the exact 2×2 moment system.
fn moment_oracle(s: &ScalarSystem, t: f64) -> f64 {
    let beta = 2.0 * (s.a + s.a_bar);
    let alpha = 2.0 * s.a + s.c * s.c;
    let g2 = (s.c + s.c_bar).powi(2);
    let e = (Mat::from_row_slice(2, 2, &[beta, 0.0, g2, alpha]) * t).exp();
    e[(0, 0)] + e[(1, 0)]
}

fn c5() -> Outcome {
    let mut g = rng(3_8);
    let mut agree = 0;
    for _ in 0..500 {
        // integer decay rates make the t = 40 oracle decisive
        let a = g.gen_range(-6..=6) as f64 * 0.5;
        let a_bar = g.gen_range(-6..=6) as f64 * 0.5;
        let c = g.gen_range(-3..=3) as f64;
        let c_bar = if g.gen_bool(0.3) { -c } else { g.gen_range(-3..=3) as f64 };
        let s = ScalarSystem::new(a, a_bar, c, c_bar).unwrap();
        if scalar_criterion(&s) == (moment_oracle(&s, 40.0) < 1e-6) {
            agree += 1;
        }
    }
    let mut mc_ok = 0;
    let mut checked = 0;
    while checked < 50 {
        let s = ScalarSystem::new(g.gen_range(-2.0..0.5), g.gen_range(-1.5..1.0), g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0)).unwrap();
        checked += 1;
        let p = problem(s.to_system(), scalar_cost(1.0, 0.0, 1.0, 0.0), &[1.0]);
        let cfg = SimConfig { horizon: 2.0, paths: 2000, seed: checked, record_paths: 0, ..SimConfig::default() };
        let Ok(tr) = simulate(&p, &FeedbackPolicy::zero(1, 1), &cfg) else { continue };
        let t = 2.0;
        let k = tr.second_moment.len() - 1;
        let exact = scalar_second_moment(&s, 1.0, t);
        // Euler–Maruyama bias is O(dt) relative, growing with the rates
        let rates = (2.0 * s.a + s.c * s.c).abs() + 2.0 * (s.a + s.a_bar).abs() + (s.c + s.c_bar).powi(2);
        let allowance = 5.0 * cfg.dt * t * rates * (1.0 + exact);
        if (tr.second_moment[k] - exact).abs() <= 5.0 * tr.second_moment_se[k] + allowance {
            mc_ok += 1;
        }
    }
    outcome(agree == 500 && mc_ok == 50, format!("criterion vs oracle {agree}/500, Monte-Carlo spot checks {mc_ok}/50"))
}

fn c6() -> Outcome {
    let mut worst: f64 = f64::INFINITY;
    let mut solved = 0;
    for seed in 0..20u64 {
        let mut g = rng(600 + seed);
        let (n, m) = (2 + (seed % 2) as usize, 1 + (seed % 3 == 0) as usize);
        let mut s = SystemMatrices::zeros(n, m);
        s.a = rand_mat(&mut g, n, n, 0.6) - Mat::identity(n, n);
        s.a_bar = rand_mat(&mut g, n, n, 0.4);
        s.b = rand_mat(&mut g, n, m, 1.0);
        s.b_bar = rand_mat(&mut g, n, m, 0.5);
        s.c = rand_mat(&mut g, n, n, 0.3);
        s.c_bar = rand_mat(&mut g, n, n, 0.3);
        s.d = rand_mat(&mut g, n, m, 0.3);
        s.d_bar = rand_mat(&mut g, n, m, 0.3);
        let w1 = CostWeights {
            q: sym(&rand_psd(&mut g, n, n)),
            q_bar: sym(&rand_psd(&mut g, n, 1)),
            r: sym(&rand_pd(&mut g, m)),
            r_bar: sym(&rand_psd(&mut g, m, 1)),
        };
        let w2 = CostWeights {
            q: sym(&(w1.q.as_mat() + rand_psd(&mut g, n, 1))),
            q_bar: sym(&(w1.q_bar.as_mat() + rand_psd(&mut g, n, 1))),
            r: sym(&(w1.r.as_mat() + rand_psd(&mut g, m, 1))),
            r_bar: sym(&(w1.r_bar.as_mat() + rand_psd(&mut g, m, 1))),
        };
        if let (Ok(a), Ok(b)) = (solve_are_sdp(&s, &w1, None, &sdp_opts()), solve_are_sdp(&s, &w2, None, &sdp_opts())) {
            solved += 1;
            worst = worst
                .min(lambda_min(&(b.p.as_mat() - a.p.as_mat())))
                .min(lambda_min(&(b.pi.as_mat() - a.pi.as_mat())));
        }
    }
    outcome(solved == 20 && worst >= -1e-6, format!("{solved}/20 pairs solved, min eigenvalue of differences {worst:.2e}"))
}

fn single_gain_on_grid(p: &MfLqProblem) -> Option<f64> {
    let s = &p.system;
    let v = |m: &Mat| m[(0, 0)];
    (0..=200_000).map(|i| -10.0 + i as f64 * 1e-4).find(|&k| {
        let cl = ScalarSystem {
            a: v(&s.a) + v(&s.b) * k,
            a_bar: v(&s.a_bar) + v(&s.b_bar) * k,
            c: v(&s.c) + v(&s.d) * k,
            c_bar: v(&s.c_bar) + v(&s.d_bar) * k,
        };
        scalar_criterion(&cl)
    })
}

fn c7() -> Outcome {
    let e31 = data("example31.json");
    let gate = matches!(
        solve_mflq(&e31, &SolveOptions { skip_verify: true, ..SolveOptions::default() }),
        Err(Error::AssumptionGate(ref f)) if f.iter().any(|s| s.contains("ODE pair"))
    );
    let rejected = gate && check_mf_stabilizable(&e31.system).mf_l2_stabilizable == Verdict::False;
    let e42 = data("example42.json");
    let rep = check_mf_stabilizable(&e42.system);
    let grid = single_gain_on_grid(&e42);
    let literal = rep.mf_l2_stabilizable == Verdict::True && rep.l2_stabilizable == Verdict::False && grid.is_none();
    let fixed = data("example42_corrected.json");
    let rep2 = check_mf_stabilizable(&fixed.system);
    let corrected = rep2.mf_l2_stabilizable == Verdict::True
        && rep2.l2_stabilizable == Verdict::False
        && single_gain_on_grid(&fixed).is_none();
    outcome(
        rejected && literal,
        format!(
            "Example 3.1 rejected {rejected}; Example 4.2 instance: MF-L2 {:?}, L2 {:?}, grid single gain {}; a_bar=2 variant MF-L2 true / L2 false / no grid gain: {corrected}",
            rep.mf_l2_stabilizable,
            rep.l2_stabilizable,
            grid.map_or("none".to_string(), |k| format!("k={k:.4}")),
        ),
    )
}

/// Slackness and weak duality of a reported optimum.
fn certificate_ok(p: &SdpProblem, o: &SdpOptions) -> bool {
    let sol = sdp::solve(p, o);
    if sol.status != SdpStatus::Optimal {
        return false;
    }
    let mut dual_obj = 0.0;
    for (b, z) in p.blocks.iter().zip(&sol.dual_z) {
        let zm = z.as_mat();
        if lambda_min(zm) < -1e-9 * (1.0 + zm.norm()) {
            return false;
        }
        let f = b.eval(&sol.x);
        if (&f * zm).norm() > 10.0 * o.gap_tol * (1.0 + f.norm() * zm.norm()) {
            return false;
        }
        dual_obj -= (b.f0.as_mat() * zm).trace();
    }
    sol.objective - dual_obj >= -o.gap_tol && sol.min_eig_slack >= -o.feas_tol
}

/// Relative quadrature tolerance, as for the noise-free Itô example.
const ITO_QUADRATURE_FLOOR: f64 = 1e-6;

fn c8() -> Outcome {
    let mut g = rng(88);
    let mut ito_ok = 0;
    let mut strict = 0;
    for i in 0..20u64 {
        let n = 1 + (i % 3) as usize;
        let m = 1 + (i % 2) as usize;
        let mut s = SystemMatrices::zeros(n, m);
        s.a = rand_mat(&mut g, n, n, 1.0) - Mat::identity(n, n);
        s.a_bar = rand_mat(&mut g, n, n, 0.5);
        s.b = rand_mat(&mut g, n, m, 1.0);
        s.b_bar = rand_mat(&mut g, n, m, 0.5);
        s.c = rand_mat(&mut g, n, n, 0.5);
        s.c_bar = rand_mat(&mut g, n, n, 0.5);
        s.d = rand_mat(&mut g, n, m, 0.5);
        s.d_bar = rand_mat(&mut g, n, m, 0.5);
        let x0: Vec<f64> = rand_mat(&mut g, n, 1, 1.0).iter().copied().collect();
        let p = problem(s, CostWeights::identity(n, m), &x0);
        let pol = FeedbackPolicy::new(rand_mat(&mut g, m, n, 0.5), rand_mat(&mut g, m, n, 0.5));
        let (mm, nn) = (rand_psd(&mut g, n, n), rand_psd(&mut g, n, n));
        let cfg = SimConfig { horizon: 1.0, paths: 2000, seed: i, record_paths: 0, ..SimConfig::default() };
        if let Ok(c) = ito_identity_check(&p, &mm, &nn, &pol, &cfg, 1.0) {
            // quadrature floor for paths whose difference is nearly deterministic
            if c.residual <= 5.0 * c.std_error + ITO_QUADRATURE_FLOOR {
                ito_ok += 1;
            }
            strict += (c.residual <= 5.0 * c.std_error) as usize;
        }
    }
    let o = SdpOptions::default();
    let s7 = data("sec7.json");
    let sa = data("scalar_are.json");
    let mut sdps = vec![are_sdp_problem(&s7.system, &s7.cost, None).1, are_sdp_problem(&sa.system, &sa.cost, None).1];
    for k in 0..8u64 {
        let mut h = rng(800 + k);
        let n = 2 + (k % 2) as usize;
        let mut s = SystemMatrices::zeros(n, 1);
        s.a = rand_mat(&mut h, n, n, 0.6) - Mat::identity(n, n);
        s.b = rand_mat(&mut h, n, 1, 1.0);
        s.c = rand_mat(&mut h, n, n, 0.3);
        s.d = rand_mat(&mut h, n, 1, 0.3);
        s.a_bar = rand_mat(&mut h, n, n, 0.3);
        let w = CostWeights { q: sym(&rand_pd(&mut h, n)), ..CostWeights::identity(n, 1) };
        sdps.push(are_sdp_problem(&s, &w, None).1);
    }
    let cert = sdps.iter().filter(|p| certificate_ok(p, &o)).count();
    let dual = solve_are_sdp(&s7.system, &s7.cost, None, &sdp_opts()).and_then(|sol| dual_residuals(&s7.system, &s7.cost, &sol));
    let dual_ok = dual.as_ref().is_ok_and(|d| *d <= 1e-4);
    outcome(
        ito_ok == 20 && cert == sdps.len() && dual_ok,
        format!(
            "Ito identity {ito_ok}/20 within 5 se + {ITO_QUADRATURE_FLOOR:e} ({strict}/20 within 5 se alone); SDP certificates {cert}/{}; section 7 dual residual {}",
            sdps.len(),
            dual.map_or_else(|e| e.to_string(), |d| format!("{d:.1e}"))
        ),
    )
}

#[test]
fn acceptance() {
    let results = [
        report(1, "section 7 AREs reproduce the printed P, Pi", c1),
        report(2, "section 7 stabilizability and printed K_bar Hurwitz", c2),
        report(3, "Monte-Carlo value matches x0'Pi x0 on section 7", c3),
        report(4, "scalar analytic ARE by SDP and ODE", c4),
        report(5, "scalar stability criterion equivalence suite", c5),
        report(6, "monotonicity of maximal solutions", c6),
        report(7, "negative controls (Example 3.1, Example 4.2 instance)", c7),
        report(8, "Ito identity and SDP duality suites", c8),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
