mod common;

use common::*;
use mflq::matkit::{lambda_min, Mat, SymMatrix};
use mflq::sdp::*;
use proptest::prelude::*;

fn s(rows: usize, v: &[f64]) -> SymMatrix {
    SymMatrix::new(&Mat::from_row_slice(rows, rows, v))
}

fn interval() -> SdpProblem {
    // minimize −x s.t. diag(1−x, x+1) ⪰ 0
    let b = LmiBlock::new(s(2, &[1.0, 0.0, 0.0, 1.0]), vec![s(2, &[-1.0, 0.0, 0.0, 1.0])]);
    SdpProblem::new(vec![-1.0], vec![b])
}

fn quadratic_root() -> SdpProblem {
    // minimize −p s.t. [[2p+1, p],[p, 1]] ⪰ 0
    let b = LmiBlock::new(s(2, &[1.0, 0.0, 0.0, 1.0]), vec![s(2, &[2.0, 1.0, 1.0, 0.0])]);
    SdpProblem::new(vec![-1.0], vec![b])
}

fn check_certificate(p: &SdpProblem, sol: &SdpSolution, opts: &SdpOptions) {
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!(sol.min_eig_slack >= -opts.feas_tol);
    assert!(sol.duality_gap <= opts.gap_tol && sol.duality_gap >= -opts.gap_tol);
    assert!(sol.dual_infeasibility <= opts.feas_tol);
    let mut dual_obj = 0.0;
    for (b, z) in p.blocks.iter().zip(&sol.dual_z) {
        assert!(lambda_min(z.as_mat()) >= -1e-9 * (1.0 + z.as_mat().norm()));
        let f = b.eval(&sol.x);
        let fz = &f * z.as_mat();
        assert!(fz.norm() <= 10.0 * opts.gap_tol * (1.0 + f.norm() * z.as_mat().norm()), "slackness {}", fz.norm());
        dual_obj -= (b.f0.as_mat() * z.as_mat()).trace();
    }
    // weak duality at the reported point
    assert!(sol.objective - dual_obj >= -opts.gap_tol);
    for g in &sol.gap_history {
        assert!(*g >= -opts.gap_tol);
    }
}

#[test]
fn interval_constraint() {
    let p = interval();
    let o = SdpOptions::default();
    let sol = solve(&p, &o);
    check_certificate(&p, &sol, &o);
    assert!((sol.x[0] - 1.0).abs() < 1e-6);
    assert!((sol.objective + 1.0).abs() < 1e-6);
}

#[test]
fn schur_scalar_feasibility() {
    // minimize 0 s.t. [[x,1],[1,x]] ⪰ 0
    let b = LmiBlock::new(s(2, &[0.0, 1.0, 1.0, 0.0]), vec![s(2, &[1.0, 0.0, 0.0, 1.0])]);
    let p = SdpProblem::new(vec![0.0], vec![b]);
    let o = SdpOptions::default();
    let sol = solve(&p, &o);
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!(sol.x[0] >= 1.0 - o.feas_tol);
}

#[test]
fn quadratic_root_oracle() {
    let p = quadratic_root();
    let o = SdpOptions::default();
    let sol = solve(&p, &o);
    check_certificate(&p, &sol, &o);
    // 2p + 1 − p² = 0
    let root = 1.0 + 2f64.sqrt();
    assert!((sol.x[0] - root).abs() < 1e-6, "{}", sol.x[0]);
}

#[test]
fn strict_feasibility_examples() {
    let o = SdpOptions::default();
    let f = check_strict_feasibility(&[LmiBlock::new(s(1, &[0.0]), vec![s(1, &[1.0])])], &o);
    assert!(f.feasible);
    assert!((f.margin - 1.0).abs() < 1e-6);
    let f = check_strict_feasibility(&[LmiBlock::new(s(1, &[-1.0]), vec![s(1, &[0.0])])], &o);
    assert!(!f.feasible);
    assert!((f.margin + 1.0).abs() < 1e-6);
}

#[test]
fn infeasible_and_unbounded() {
    let o = SdpOptions::default();
    // x ≥ 1 and x ≤ −1
    let b1 = LmiBlock::new(s(1, &[-1.0]), vec![s(1, &[1.0])]);
    let b2 = LmiBlock::new(s(1, &[-1.0]), vec![s(1, &[-1.0])]);
    let sol = solve(&SdpProblem::new(vec![1.0], vec![b1, b2]), &o);
    assert_eq!(sol.status, SdpStatus::Infeasible);
    // minimize −x s.t. x ≥ 0
    let b = LmiBlock::new(s(1, &[0.0]), vec![s(1, &[1.0])]);
    let sol = solve(&SdpProblem::new(vec![-1.0], vec![b]), &o);
    assert_eq!(sol.status, SdpStatus::Unbounded);
}

#[test]
fn deterministic_iterates() {
    let p = quadratic_root();
    let o = SdpOptions::default();
    let a = solve(&p, &o);
    let b = solve(&p, &o);
    assert_eq!(a.x, b.x);
    assert_eq!(a.gap_history, b.gap_history);
    assert_eq!(a.newton_steps, b.newton_steps);
}

#[test]
fn dump_lists_every_nonzero() {
    let d = quadratic_root().dump();
    assert!(d.lines().count() >= 4);
}

fn random_bounded_sdp(seed: u64, k: usize, nv: usize) -> SdpProblem {
    let mut g = rng(seed);
    // F0 ≻ 0 makes x = 0 strictly feasible; the extra block |x_i| ≤ 1 bounds the set
    let mut blocks = vec![LmiBlock::new(
        SymMatrix::new(&rand_pd(&mut g, k)),
        (0..nv).map(|_| SymMatrix::new(&rand_mat(&mut g, k, k, 1.0))).collect(),
    )];
    for i in 0..nv {
        let fi = (0..nv)
            .map(|j| {
                let v = if i == j { 1.0 } else { 0.0 };
                s(2, &[v, 0.0, 0.0, -v])
            })
            .collect();
        blocks.push(LmiBlock::new(s(2, &[1.0, 0.0, 0.0, 1.0]), fi));
    }
    let c = rand_mat(&mut g, nv, 1, 1.0).iter().copied().collect();
    SdpProblem::new(c, blocks)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn random_problems_certify(seed in any::<u64>(), k in 1usize..4, nv in 1usize..4) {
        let p = random_bounded_sdp(seed, k, nv);
        let o = SdpOptions::default();
        let sol = solve(&p, &o);
        check_certificate(&p, &sol, &o);
    }

    #[test]
    fn scale_invariance(seed in any::<u64>(), k in 1usize..4, nv in 1usize..3, scale in 0.01f64..100.0) {
        let p = random_bounded_sdp(seed, k, nv);
        let scaled = SdpProblem::new(
            p.c.iter().map(|v| v * scale).collect(),
            p.blocks
                .iter()
                .map(|b| LmiBlock::new(
                    SymMatrix::new(&(b.f0.as_mat() * scale)),
                    b.fi.iter().map(|f| SymMatrix::new(&(f.as_mat() * scale))).collect(),
                ))
                .collect(),
        );
        let o = SdpOptions::default();
        let a = solve(&p, &o);
        let b = solve(&scaled, &o);
        prop_assert_eq!(a.status, b.status);
        prop_assert!((b.objective - scale * a.objective).abs() <= 1e-5 * (1.0 + (scale * a.objective).abs()));
    }
}
