//! Closed-loop Monte-Carlo simulation: trajectory statistics, a CSV dump of a
//! few sample paths, and a cost estimate.
//!
//! `cargo run --release --example simulate -- [out.csv]`

use mflq::control::{solve_mflq, SolveOptions};
use mflq::model::load_problem;
use mflq::simulate::{estimate_cost, simulate, SimConfig, TailMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = load_problem(std::fs::File::open(concat!(env!("CARGO_MANIFEST_DIR"), "/data/sec7.json"))?)?;
    let sol = solve_mflq(&p, &SolveOptions { skip_verify: true, ..SolveOptions::default() })?;

    let cfg = SimConfig { horizon: 5.0, paths: 2000, seed: 1, record_paths: 4, record_stride: 100, ..SimConfig::default() };
    let tr = simulate(&p, &sol.policy, &cfg)?;
    for (k, t) in tr.times.iter().enumerate().step_by(10) {
        println!("t = {t:.1}  E|X|^2 = {:.5} +- {:.5}  mean x1 = {:+.5}", tr.second_moment[k], tr.second_moment_se[k], tr.mean_path[k][0]);
    }
    if let Some(out) = std::env::args().nth(1) {
        std::fs::write(&out, tr.to_csv())?;
        println!("wrote {out}");
    }

    let cfg = SimConfig { horizon: 10.0, paths: 2000, tail_mode: TailMode::GeometricExtrapolate, record_paths: 0, ..cfg };
    let c = estimate_cost(&p, &sol.policy, &cfg)?;
    println!("cost {:.4} +- {:.4} (tail {:?}, rate {:?}); predicted {:.4}",
        c.value, c.std_error, c.tail_bound, c.decay_rate, sol.predicted_value);
    Ok(())
}
