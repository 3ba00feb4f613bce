//! Coupled Riccati equations solved by the max-trace SDP and by marching the
//! differential equations, with residuals, dual residuals and an ε trend.

use mflq::model::load_problem;
use mflq::riccati::{dual_residuals, epsilon_trend, solve_are_ode, solve_are_sdp, OdeOptions, SdpAreOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/sec7.json").into());
    let p = load_problem(std::fs::File::open(&path)?)?;
    let (sys, cost) = (&p.system, &p.cost);

    let sdp = solve_are_sdp(sys, cost, None, &SdpAreOptions::default())?;
    println!("SDP:  P ={:.4}  Pi ={:.4}", sdp.p.as_mat(), sdp.pi.as_mat());
    println!("residuals {:.1e}, {:.1e}; dual residual {:.1e}",
        sdp.residuals.r_norm, sdp.residuals.rbar_norm, dual_residuals(sys, cost, &sdp)?);
    println!("Gamma ={:.4}  Gamma_bar ={:.4}", sdp.gamma, sdp.gamma_bar);

    let (ode, trace) = solve_are_ode(sys, cost, &OdeOptions::default())?;
    let (dp, dpi) = trace.min_increment_eig();
    println!("ODE converged at s = {:?}; monotone increments (min eig) {dp:.1e}, {dpi:.1e}", trace.converged_at);
    println!("max |P_sdp - P_ode| = {:.1e}, max |Pi_sdp - Pi_ode| = {:.1e}",
        (sdp.p.as_mat() - ode.p.as_mat()).amax(), (sdp.pi.as_mat() - ode.pi.as_mat()).amax());

    for pt in epsilon_trend(sys, cost, 0.1, &SdpAreOptions::default()) {
        println!("eps {:<6} tr P {:.6} tr Pi {:.6}", pt.epsilon, pt.trace_p, pt.trace_pi);
    }
    Ok(())
}
