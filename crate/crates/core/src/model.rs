//! Problem data, the JSON problem file and the standing-assumption checks.

use serde::{Deserialize, Serialize};
use std::io::Read;

use crate::error::{Error, Result};
use crate::matkit::{from_rows, lambda_min, to_rows, Mat, SymMatrix, Vector};
use crate::stabilize;

/// Coefficients of `dX = (AX + ĀE[X] + Bu + B̄E[u])dt + (CX + C̄E[X] + Du + D̄E[u])dW`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemMatrices {
    pub n: usize,
    pub m: usize,
    pub a: Mat,
    pub a_bar: Mat,
    pub b: Mat,
    pub b_bar: Mat,
    pub c: Mat,
    pub c_bar: Mat,
    pub d: Mat,
    pub d_bar: Mat,
}

impl SystemMatrices {
    /// All-zero system of the given size.
    pub fn zeros(n: usize, m: usize) -> Self {
        let nn = Mat::zeros(n, n);
        let nm = Mat::zeros(n, m);
        Self {
            n,
            m,
            a: nn.clone(),
            a_bar: nn.clone(),
            b: nm.clone(),
            b_bar: nm.clone(),
            c: nn.clone(),
            c_bar: nn,
            d: nm.clone(),
            d_bar: nm,
        }
    }

    /// Scalar system, argument order `a, ā, b, b̄, c, c̄, d, d̄`.
    #[allow(clippy::too_many_arguments)]
    pub fn scalar(a: f64, a_bar: f64, b: f64, b_bar: f64, c: f64, c_bar: f64, d: f64, d_bar: f64) -> Self {
        let s = |x: f64| Mat::from_element(1, 1, x);
        Self {
            n: 1,
            m: 1,
            a: s(a),
            a_bar: s(a_bar),
            b: s(b),
            b_bar: s(b_bar),
            c: s(c),
            c_bar: s(c_bar),
            d: s(d),
            d_bar: s(d_bar),
        }
    }

    /// `A + Ā`.
    pub fn a_hat(&self) -> Mat {
        &self.a + &self.a_bar
    }
    /// `B + B̄`.
    pub fn b_hat(&self) -> Mat {
        &self.b + &self.b_bar
    }
    /// `C + C̄`.
    pub fn c_hat(&self) -> Mat {
        &self.c + &self.c_bar
    }
    /// `D + D̄`.
    pub fn d_hat(&self) -> Mat {
        &self.d + &self.d_bar
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n, self.m);
        if n == 0 || m == 0 {
            return Err(Error::Dimension("n and m must be positive".into()));
        }
        let checks: [(&str, &Mat, (usize, usize)); 8] = [
            ("A", &self.a, (n, n)),
            ("A_bar", &self.a_bar, (n, n)),
            ("B", &self.b, (n, m)),
            ("B_bar", &self.b_bar, (n, m)),
            ("C", &self.c, (n, n)),
            ("C_bar", &self.c_bar, (n, n)),
            ("D", &self.d, (n, m)),
            ("D_bar", &self.d_bar, (n, m)),
        ];
        for (name, mat, shape) in checks {
            if mat.shape() != shape {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {}x{}",
                    mat.nrows(),
                    mat.ncols(),
                    shape.0,
                    shape.1
                )));
            }
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(Error::Value(format!("{name} has a non-finite entry")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostWeights {
    pub q: SymMatrix,
    pub q_bar: SymMatrix,
    pub r: SymMatrix,
    pub r_bar: SymMatrix,
}

impl CostWeights {
    pub fn identity(n: usize, m: usize) -> Self {
        Self {
            q: SymMatrix::identity(n),
            q_bar: SymMatrix::zeros(n),
            r: SymMatrix::identity(m),
            r_bar: SymMatrix::zeros(m),
        }
    }

    /// `Q + Q̄`.
    pub fn q_hat(&self) -> Mat {
        self.q.as_mat() + self.q_bar.as_mat()
    }
    /// `R + R̄`.
    pub fn r_hat(&self) -> Mat {
        self.r.as_mat() + self.r_bar.as_mat()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MfLqProblem {
    pub system: SystemMatrices,
    pub cost: CostWeights,
    pub x0: Vector,
    /// Messages produced while loading (e.g. symmetrisation of slightly asymmetric weights).
    pub notes: Vec<String>,
}

/// Relative asymmetry accepted without comment.
pub const ASYM_SILENT: f64 = 1e-8;
/// Relative asymmetry above which loading fails.
pub const ASYM_REJECT: f64 = 1e-3;

#[derive(Serialize, Deserialize)]
struct ProblemFile {
    n: usize,
    m: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "A_bar")]
    a_bar: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "B_bar")]
    b_bar: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "C_bar")]
    c_bar: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
    #[serde(rename = "D_bar")]
    d_bar: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "Q_bar")]
    q_bar: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
    #[serde(rename = "R_bar")]
    r_bar: Vec<Vec<f64>>,
    x0: Vec<f64>,
}

fn shaped(name: &str, rows: &[Vec<f64>], shape: (usize, usize)) -> Result<Mat> {
    let m = from_rows(rows).map_err(|_| Error::Dimension(format!("{name} has ragged rows")))?;
    // an n×0 or 0×k array of arrays loses its column count
    if m.shape() != shape && !(rows.len() == shape.0 && shape.1 == 0) {
        return Err(Error::Dimension(format!(
            "{name} is {}x{}, expected {}x{}",
            m.nrows(),
            m.ncols(),
            shape.0,
            shape.1
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Value(format!("{name} has a non-finite entry")));
    }
    Ok(m)
}

fn symmetric(name: &str, m: Mat, notes: &mut Vec<String>) -> Result<SymMatrix> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let asym = (&m - m.transpose()).amax() / scale;
    if asym > ASYM_REJECT {
        return Err(Error::Value(format!(
            "{name} is not symmetric (relative asymmetry {asym:e})"
        )));
    }
    if asym > ASYM_SILENT {
        notes.push(format!("{name} symmetrized (relative asymmetry {asym:e})"));
    }
    Ok(SymMatrix::new(&m))
}

impl MfLqProblem {
    pub fn new(system: SystemMatrices, cost: CostWeights, x0: Vector) -> Result<Self> {
        system.validate()?;
        let (n, m) = (system.n, system.m);
        let dims = [
            ("Q", cost.q.order(), n),
            ("Q_bar", cost.q_bar.order(), n),
            ("R", cost.r.order(), m),
            ("R_bar", cost.r_bar.order(), m),
            ("x0", x0.len(), n),
        ];
        for (name, got, want) in dims {
            if got != want {
                return Err(Error::Dimension(format!("{name} has size {got}, expected {want}")));
            }
        }
        let finite = [&cost.q, &cost.q_bar, &cost.r, &cost.r_bar]
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
            && x0.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Value("non-finite weight or x0 entry".into()));
        }
        Ok(Self { system, cost, x0, notes: Vec::new() })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: ProblemFile = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let (n, m) = (f.n, f.m);
        if n == 0 || m == 0 {
            return Err(Error::Dimension("n and m must be positive".into()));
        }
        let system = SystemMatrices {
            n,
            m,
            a: shaped("A", &f.a, (n, n))?,
            a_bar: shaped("A_bar", &f.a_bar, (n, n))?,
            b: shaped("B", &f.b, (n, m))?,
            b_bar: shaped("B_bar", &f.b_bar, (n, m))?,
            c: shaped("C", &f.c, (n, n))?,
            c_bar: shaped("C_bar", &f.c_bar, (n, n))?,
            d: shaped("D", &f.d, (n, m))?,
            d_bar: shaped("D_bar", &f.d_bar, (n, m))?,
        };
        let mut notes = Vec::new();
        let cost = CostWeights {
            q: symmetric("Q", shaped("Q", &f.q, (n, n))?, &mut notes)?,
            q_bar: symmetric("Q_bar", shaped("Q_bar", &f.q_bar, (n, n))?, &mut notes)?,
            r: symmetric("R", shaped("R", &f.r, (m, m))?, &mut notes)?,
            r_bar: symmetric("R_bar", shaped("R_bar", &f.r_bar, (m, m))?, &mut notes)?,
        };
        if f.x0.len() != n {
            return Err(Error::Dimension(format!("x0 has length {}, expected {n}", f.x0.len())));
        }
        if f.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Value("x0 has a non-finite entry".into()));
        }
        let mut p = Self::new(system, cost, Vector::from_vec(f.x0))?;
        p.notes = notes;
        Ok(p)
    }

    pub fn to_json_string(&self) -> String {
        let s = &self.system;
        let c = &self.cost;
        let f = ProblemFile {
            n: s.n,
            m: s.m,
            a: to_rows(&s.a),
            a_bar: to_rows(&s.a_bar),
            b: to_rows(&s.b),
            b_bar: to_rows(&s.b_bar),
            c: to_rows(&s.c),
            c_bar: to_rows(&s.c_bar),
            d: to_rows(&s.d),
            d_bar: to_rows(&s.d_bar),
            q: to_rows(&c.q),
            q_bar: to_rows(&c.q_bar),
            r: to_rows(&c.r),
            r_bar: to_rows(&c.r_bar),
            x0: self.x0.iter().copied().collect(),
        };
        serde_json::to_string_pretty(&f).expect("problem serialization")
    }

    pub fn with_x0(mut self, x0: &[f64]) -> Self {
        assert_eq!(x0.len(), self.system.n);
        self.x0 = Vector::from_column_slice(x0);
        self
    }
}

/// Read and validate a problem file.
pub fn load_problem<R: Read>(mut source: R) -> Result<MfLqProblem> {
    let mut s = String::new();
    source
        .read_to_string(&mut s)
        .map_err(|e| Error::Parse(format!("unreadable input: {e}")))?;
    MfLqProblem::from_json_str(&s)
}

pub const DEFAULT_ASSUMPTION_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    /// `Q ⪰ 0`, `Q+Q̄ ⪰ 0`, `R ≻ 0`, `R+R̄ ≻ 0`.
    pub holds_j: bool,
    /// Same with `Q ≻ 0`, `Q+Q̄ ≻ 0`.
    pub holds_j_prime: bool,
    /// `Q ⪰ 0`, `R ≻ 0`.
    pub holds_j_star: bool,
    pub lambda_min_q: f64,
    pub lambda_min_q_hat: f64,
    pub lambda_min_r: f64,
    pub lambda_min_r_hat: f64,
    pub holds_s: bool,
    /// `[A+Ā; B+B̄]` admits a Hurwitz feedback.
    pub ode_pair_stabilizable: bool,
    /// `[A, C; B, D]` admits a mean-square stabilising feedback.
    pub sde_pair_stabilizable: bool,
    pub notes: Vec<String>,
}

/// Decide (J), (J)′, (J)* and (S) at tolerance `tol`.
pub fn check_assumptions(p: &MfLqProblem, tol: f64) -> AssumptionReport {
    let c = &p.cost;
    let lq = lambda_min(c.q.as_mat());
    let lqh = lambda_min(&c.q_hat());
    let lr = lambda_min(c.r.as_mat());
    let lrh = lambda_min(&c.r_hat());
    let r_ok = lr >= tol && lrh >= tol;
    let holds_j = lq >= -tol && lqh >= -tol && r_ok;
    let holds_j_prime = lq >= tol && lqh >= tol && r_ok;
    let holds_j_star = lq >= -tol && lr >= tol;
    let mut notes = p.notes.clone();
    if !holds_j {
        notes.push(format!(
            "(J) fails: lambda_min Q={lq:.3e}, Q+Q_bar={lqh:.3e}, R={lr:.3e}, R+R_bar={lrh:.3e}"
        ));
    }
    let s = &p.system;
    let ode = stabilize::ode_pair_stabilizer(&s.a_hat(), &s.b_hat());
    let sde = stabilize::sde_pair_stabilizer(&s.a, &s.c, &s.b, &s.d, None);
    if ode.is_none() {
        notes.push("ODE pair [A+Ā;B+B̄] not stabilizable".into());
    }
    if sde.is_none() {
        notes.push("SDE pair [A, C; B, D] not L2-stabilizable (LMI infeasible)".into());
    }
    AssumptionReport {
        holds_j,
        holds_j_prime,
        holds_j_star,
        lambda_min_q: lq,
        lambda_min_q_hat: lqh,
        lambda_min_r: lr,
        lambda_min_r_hat: lrh,
        holds_s: ode.is_some() && sde.is_some(),
        ode_pair_stabilizable: ode.is_some(),
        sde_pair_stabilizable: sde.is_some(),
        notes,
    }
}
