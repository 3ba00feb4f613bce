//! Dense helpers: symmetric eigenvalues, Schur-complement PSD tests,
//! pseudoinverse and the generalized Lyapunov equation.

use mflq::matkit::{eig_sym, lyapunov_residual, pinv, schur_psd, solve_lyapunov_linear, Mat, SymMatrix};

fn main() -> Result<(), mflq::Error> {
    let m = SymMatrix::new(&Mat::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]));
    let e = eig_sym(&m)?;
    println!("eigenvalues of tridiag(-1, 2, -1): {:.6}", e.values.transpose());

    // [[M, N], [Nᵀ, R]] ⪰ 0 with singular R handled through R⁺
    let r = SymMatrix::from_diagonal(&[1.0, 0.0]);
    let n = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
    for mv in [0.5, 1.0, 2.0] {
        let v = schur_psd(&SymMatrix::from_diagonal(&[mv]), &n, &r)?;
        println!("M = {mv}: block PSD {} (lambda_min of Schur complement {:.3})", v.is_psd, v.lambda_min);
    }

    let rank_one = Mat::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
    let p = pinv(&rank_one);
    println!("rank {} pseudoinverse:{:.5}", p.rank, p.pinv);

    // AᵀP + PA + CᵀPC + Q = 0
    let a = Mat::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
    let c = Mat::from_row_slice(2, 2, &[0.3, 0.0, 0.1, 0.3]);
    let q = Mat::identity(2, 2);
    let sol = solve_lyapunov_linear(&a, &c, &q)?;
    println!("Lyapunov solution:{:.6}residual norm {:.1e}", sol.as_mat(), lyapunov_residual(&a, &c, &q, sol.as_mat()).norm());
    Ok(())
}
