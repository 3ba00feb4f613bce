//! Assumption checks and stability classification of the open-loop system.
//!
//! `cargo run --example analyze -- [problem.json]` (defaults to the 5-state example).

use mflq::model::{check_assumptions, load_problem, DEFAULT_ASSUMPTION_TOL};
use mflq::stability::{classify, scalar_criterion, scalar_second_moment, ScalarSystem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/sec7.json").into());
    let p = load_problem(std::fs::File::open(&path)?)?;

    let a = check_assumptions(&p, DEFAULT_ASSUMPTION_TOL);
    println!("(J) {}  (J)' {}  (S) {}", a.holds_j, a.holds_j_prime, a.holds_s);
    println!("  lambda_min Q = {:.4}, Q+Q_bar = {:.4}", a.lambda_min_q, a.lambda_min_q_hat);

    let v = classify(&p.system, &p.cost);
    println!("exp stable {:?}, globally integrable {:?}, asymptotic {:?}, (Q,Q_bar)-integrable {:?}",
        v.exp_stable, v.globally_integrable, v.asymptotically_stable, v.qq_integrable);
    println!("  spectral abscissa of A+A_bar: {:.4}", v.evidence.mean_spectral_abscissa);
    for f in &v.evidence.fired {
        println!("  - {f}");
    }

    // scalar systems have a closed-form test and second moment
    let s = ScalarSystem::new(-1.0, 0.5, 1.0, -0.5)?;
    println!("\nscalar a=-1, a_bar=0.5, c=1, c_bar=-0.5: stable {}", scalar_criterion(&s));
    for t in [0.0, 1.0, 5.0, 10.0] {
        println!("  E|X({t})|^2 = {:.6}", scalar_second_moment(&s, 1.0, t));
    }
    Ok(())
}
