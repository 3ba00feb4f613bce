//! Monte-Carlo check of the Itô identity for quadratic functionals
//! E[YᵀMY] + mᵀNm along a closed loop.

use mflq::matkit::Mat;
use mflq::model::load_problem;
use mflq::simulate::{ito_identity_check, FeedbackPolicy, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = load_problem(std::fs::File::open(concat!(env!("CARGO_MANIFEST_DIR"), "/data/sec7.json"))?)?;
    let pol = FeedbackPolicy::new(Mat::from_element(2, 5, 0.1), Mat::from_element(2, 5, -0.1));
    let m = Mat::identity(5, 5);
    let n = Mat::from_diagonal_element(5, 5, 2.0);
    for paths in [500, 2000, 8000] {
        let cfg = SimConfig { horizon: 1.0, paths, record_paths: 0, ..SimConfig::default() };
        let c = ito_identity_check(&p, &m, &n, &pol, &cfg, 1.0)?;
        println!("paths {paths:>5}: lhs {:.6} rhs {:.6} residual {:.2e} (std error {:.2e})", c.lhs, c.rhs, c.residual, c.std_error);
    }
    Ok(())
}
