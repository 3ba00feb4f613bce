//! End-to-end synthesis and verification: optimal policy, Monte-Carlo value
//! against x0ᵀΠx0, and the completion-of-squares penalty of a perturbed policy.
//!
//! `cargo run --release --example verify`

use mflq::control::{completion_of_squares_residual, solve_mflq, SolveOptions};
use mflq::model::load_problem;
use mflq::simulate::SimConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = load_problem(std::fs::File::open(concat!(env!("CARGO_MANIFEST_DIR"), "/data/sec7.json"))?)?;
    let sim = SimConfig { paths: 4000, record_paths: 0, ..SimConfig::default() };
    let sol = solve_mflq(&p, &SolveOptions { sim: sim.clone(), ..SolveOptions::default() })?;
    let v = sol.verification.as_ref().expect("verification ran");
    println!("predicted x0'Pi x0 = {:.5}", sol.predicted_value);
    println!("Monte-Carlo cost   = {:.5} +- {:.5}  (within budget: {})", v.mc_cost.value, v.mc_cost.std_error, v.within_budget);
    println!("stabilizer check   = {}", v.stabilizer_ok);
    if let Some(cc) = &sol.cross_check {
        println!("SDP vs ODE: max diff P {:.1e}, Pi {:.1e}", cc.max_abs_diff_p, cc.max_abs_diff_pi);
    }

    let mut cand = sol.policy.clone();
    cand.k_bar[(0, 0)] += 0.1;
    let cs = completion_of_squares_residual(&p, &sol, &cand, &sim)?;
    println!("perturbed K_bar: cost {:.5}, penalty {:.5} +- {:.5}, identity gap {:.5} +- {:.5}",
        cs.cost.value, cs.residual, cs.std_error, cs.identity_gap, cs.identity_std_error);
    Ok(())
}
