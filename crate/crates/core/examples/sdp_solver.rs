//! The dense primal-dual SDP solver on a small problem with a known optimum:
//! maximize p subject to [[2p+1, p], [p, 1]] ⪰ 0, whose answer is 1 + √2.

use mflq::matkit::{Mat, SymMatrix};
use mflq::sdp::{check_strict_feasibility, solve, LmiBlock, SdpOptions, SdpProblem};

fn sym(v: &[f64]) -> SymMatrix {
    SymMatrix::new(&Mat::from_row_slice(2, 2, v))
}

fn main() {
    let block = LmiBlock::new(sym(&[1.0, 0.0, 0.0, 1.0]), vec![sym(&[2.0, 1.0, 1.0, 0.0])]);
    let problem = SdpProblem::new(vec![-1.0], vec![block.clone()]);
    let opts = SdpOptions::default();

    let f = check_strict_feasibility(&[block], &opts);
    println!("strictly feasible: {} (margin {:.4})", f.feasible, f.margin);

    let sol = solve(&problem, &opts);
    println!("status {:?} after {} Newton steps", sol.status, sol.newton_steps);
    println!("p* = {:.10} (1 + sqrt 2 = {:.10})", sol.x[0], 1.0 + 2f64.sqrt());
    println!("duality gap {:.2e}, dual infeasibility {:.2e}", sol.duality_gap, sol.dual_infeasibility);
    println!("dual certificate Z:{:.6}", sol.dual_z[0].as_mat());
    println!("problem dump:\n{}", problem.dump());
}
