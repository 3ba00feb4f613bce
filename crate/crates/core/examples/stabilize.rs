//! Mean-field stabilizability by the two-stage LMI scheme, closed-loop
//! verification, and the pseudoinverse construction.

use mflq::matkit::spectral_abscissa;
use mflq::model::{load_problem, SystemMatrices};
use mflq::stabilize::{check_mf_stabilizable, pseudoinverse_stabilizer, verify_stabilizer_detail};

fn report(name: &str, sys: &SystemMatrices) {
    let r = check_mf_stabilizable(sys);
    println!("{name}: MF-L2 {:?}, L2 {:?}", r.mf_l2_stabilizable, r.l2_stabilizable);
    for c in &r.criteria_fired {
        println!("  - {c}");
    }
    if let Some(g) = &r.gains {
        let check = verify_stabilizer_detail(sys, g);
        println!("  K ={:.4}  K_bar ={:.4}", g.k, g.k_bar);
        println!("  mean abscissa {:.4}, lambda_min X {:?}, lambda_min X_bar {:?}",
            check.mean_abscissa, check.x_min_eig, check.x_bar_min_eig);
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    for name in ["sec7.json", "example31.json", "example42_corrected.json"] {
        let p = load_problem(std::fs::File::open(format!("{data}/{name}"))?)?;
        report(name, &p.system);
    }

    // C+C̄ in the range of D+D̄: K̄ cancels the mean diffusion
    let sys = SystemMatrices::scalar(-1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0);
    match pseudoinverse_stabilizer(&sys) {
        Ok(g) => println!("pseudoinverse gains: k = {:.4}, k_bar = {:.4}, mean abscissa {:.4}",
            g.k[(0, 0)], g.k_bar[(0, 0)], spectral_abscissa(&(sys.a_hat() + sys.b_hat() * &g.k_bar))),
        Err(e) => println!("pseudoinverse construction failed: {e}"),
    }
    Ok(())
}
