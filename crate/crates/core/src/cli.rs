//! Command-line front end. Every subcommand reads one problem file and emits a
//! versioned JSON report; `--format text` renders the same JSON as flat
//! `key = value` lines.
//!
//! Exit codes: 0 success, 1 negative verdict on a well-posed problem,
//! 2 input error, 3 numerical failure.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::control::{self, SolveMethod, SolveOptions};
use crate::error::Error;
use crate::model::{check_assumptions, load_problem, MfLqProblem};
use crate::riccati::{self, SdpAreOptions};
use crate::simulate::{self, FeedbackPolicy, SimConfig, TailMode};
use crate::stability::classify;
use crate::stabilize::{check_mf_stabilizable, ode_pair_stabilizer};
use crate::Verdict;

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "mflq", version, about = "Mean-field LQ stochastic control toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Assumptions and stability of the uncontrolled system.
    Analyze(Options),
    /// Mean-field L² stabilizability and a stabilizing feedback.
    Stabilize(Options),
    /// Coupled Riccati equations and the optimal feedback.
    Solve(Options),
    /// Monte-Carlo simulation under the optimal (or zero) feedback.
    Simulate(Options),
    /// Solve, then check the value and optimality by simulation.
    Verify(Options),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Sdp,
    Ode,
    Both,
}

#[derive(Args, Debug, Clone)]
pub struct Options {
    /// Problem file (JSON).
    #[arg(long)]
    pub input: PathBuf,
    /// Report destination; stdout when absent. For `simulate`, a `.csv`
    /// suffix writes the trajectory table instead of the JSON report.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Tolerance for the PSD/PD tests of the assumption gate.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 20.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "both")]
    pub method: MethodArg,
    /// Also solve with `Q`, `Q̄` shifted by `εI` for `ε`, `ε/10`, `ε/100`, `0`.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Simulation worker threads (default: machine parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
}

impl Options {
    fn sim(&self) -> SimConfig {
        SimConfig {
            dt: self.dt,
            horizon: self.horizon,
            paths: self.paths,
            seed: self.seed,
            tail_mode: TailMode::Truncate,
            ..SimConfig::default()
        }
    }

    fn solve_opts(&self, skip_verify: bool) -> SolveOptions {
        SolveOptions {
            method: match self.method {
                MethodArg::Sdp => SolveMethod::Sdp,
                MethodArg::Ode => SolveMethod::Ode,
                MethodArg::Both => SolveMethod::Both,
            },
            skip_verify,
            sim: self.sim(),
            assumption_tol: self.tol,
            ..SolveOptions::default()
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::Dimension(_) | Error::Value(_) | Error::Io(_) => EXIT_INPUT,
        Error::AssumptionGate(_) | Error::Overflow { .. } => EXIT_NEGATIVE,
        _ => EXIT_NUMERICAL,
    }
}

struct Outcome {
    report: Value,
    code: i32,
    /// Raw body written instead of the report (CSV dumps).
    raw: Option<String>,
}

fn envelope(command: &str, body: impl Serialize) -> Value {
    let mut v = json!({ "schema_version": SCHEMA_VERSION, "command": command });
    let body = serde_json::to_value(body).expect("report serialization");
    if let (Some(obj), Value::Object(b)) = (v.as_object_mut(), body) {
        obj.extend(b);
    }
    v
}

fn analyze(p: &MfLqProblem, o: &Options) -> Outcome {
    #[derive(Serialize)]
    struct Body {
        assumptions: crate::model::AssumptionReport,
        stability: crate::stability::StabilityVerdict,
    }
    let body = Body { assumptions: check_assumptions(p, o.tol), stability: classify(&p.system, &p.cost) };
    Outcome { report: envelope("analyze", body), code: EXIT_OK, raw: None }
}

fn stabilize(p: &MfLqProblem) -> Outcome {
    let s = &p.system;
    let mut reason = None;
    if ode_pair_stabilizer(&s.a_hat(), &s.b_hat()).is_none() {
        reason = Some("ODE pair [A+Ā;B+B̄] not stabilizable".to_string());
    }
    let rep = check_mf_stabilizable(s);
    let code = match rep.mf_l2_stabilizable {
        Verdict::True => EXIT_OK,
        _ => EXIT_NEGATIVE,
    };
    if code != EXIT_OK && reason.is_none() {
        reason = rep.criteria_fired.last().cloned();
    }
    let mut v = envelope("stabilize", &rep);
    v["reason"] = json!(reason);
    Outcome { report: v, code, raw: None }
}

fn solve(p: &MfLqProblem, o: &Options) -> Result<Outcome, Error> {
    let sol = control::solve_mflq(p, &o.solve_opts(true))?;
    let mut v = envelope("solve", &sol);
    if let Some(eps) = o.epsilon {
        v["epsilon_trend"] = serde_json::to_value(riccati::epsilon_trend(&p.system, &p.cost, eps, &SdpAreOptions::default()))
            .expect("serialize");
    }
    Ok(Outcome { report: v, code: EXIT_OK, raw: None })
}

/// Recorded grid points are thinned to about this many.
const RECORD_POINTS: usize = 1000;
const RECORD_PATHS: usize = 16;

fn simulate_cmd(p: &MfLqProblem, o: &Options) -> Result<Outcome, Error> {
    let mut notes = Vec::new();
    let policy = match control::solve_mflq(p, &o.solve_opts(true)) {
        Ok(sol) => {
            notes.push("policy: optimal feedback from the coupled Riccati equations".to_string());
            sol.policy
        }
        Err(e) => {
            notes.push(format!("policy: zero feedback ({e})"));
            FeedbackPolicy::zero(p.system.n, p.system.m)
        }
    };
    let mut cfg = o.sim();
    cfg.record_paths = RECORD_PATHS.min(cfg.paths);
    cfg.record_stride = (cfg.steps() / RECORD_POINTS).max(1);
    let traj = simulate::simulate(p, &policy, &cfg)?;
    let cost = simulate::estimate_cost(p, &policy, &cfg)?;
    let csv = o.output.as_ref().is_some_and(|path| path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")));
    #[derive(Serialize)]
    struct Body<'a> {
        policy: &'a FeedbackPolicy,
        notes: Vec<String>,
        cost: simulate::CostEstimate,
        trajectory: &'a simulate::Trajectory,
    }
    let code = if cost.divergent { EXIT_NEGATIVE } else { EXIT_OK };
    let report = envelope("simulate", Body { policy: &policy, notes, cost, trajectory: &traj });
    Ok(Outcome { report, code, raw: csv.then(|| traj.to_csv()) })
}

fn verify(p: &MfLqProblem, o: &Options) -> Result<Outcome, Error> {
    let sol = control::solve_mflq(p, &o.solve_opts(false))?;
    let ok = sol.verification.as_ref().is_some_and(|v| v.within_budget && v.stabilizer_ok);
    let v = envelope("verify", &sol);
    Ok(Outcome { report: v, code: if ok { EXIT_OK } else { EXIT_NEGATIVE }, raw: None })
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    let scalar_list = |a: &Vec<Value>| a.iter().all(|x| !x.is_array() && !x.is_object());
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Array(a) if scalar_list(a) => {
            let items: Vec<String> = a.iter().map(|x| x.to_string()).collect();
            out.push_str(&format!("{prefix} = [{}]\n", items.join(", ")));
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        _ => out.push_str(&format!("{prefix} = {v}\n")),
    }
}

/// Text rendering of a JSON report: one `path = value` line per leaf, with
/// numbers printed exactly as in the JSON.
pub fn render_text(v: &Value) -> String {
    let mut s = String::new();
    flatten("", v, &mut s);
    s
}

fn emit(o: &Options, out: &Outcome) -> std::io::Result<()> {
    let body = match (&out.raw, o.format) {
        (Some(raw), _) => raw.clone(),
        (None, Format::Json) => {
            let mut s = serde_json::to_string_pretty(&out.report).expect("json");
            s.push('\n');
            s
        }
        (None, Format::Text) => render_text(&out.report),
    };
    match &o.output {
        Some(path) => std::fs::write(path, body),
        None => std::io::stdout().write_all(body.as_bytes()),
    }
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let (name, o) = match &cli.command {
        Command::Analyze(o) => ("analyze", o),
        Command::Stabilize(o) => ("stabilize", o),
        Command::Solve(o) => ("solve", o),
        Command::Simulate(o) => ("simulate", o),
        Command::Verify(o) => ("verify", o),
    };
    if let Some(w) = o.workers {
        if w == 0 {
            eprintln!("mflq: --workers must be at least 1");
            return EXIT_INPUT;
        }
        // fails only if a pool already exists in this process; the existing one is used then
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let problem = std::fs::File::open(&o.input).map_err(Error::from).and_then(load_problem);
    let p = match problem {
        Ok(p) => p,
        Err(e) => {
            eprintln!("mflq {name}: {}: {e}", o.input.display());
            return exit_code(&e);
        }
    };
    for note in &p.notes {
        eprintln!("mflq {name}: note: {note}");
    }
    let outcome = match &cli.command {
        Command::Analyze(_) => Ok(analyze(&p, o)),
        Command::Stabilize(_) => Ok(stabilize(&p)),
        Command::Solve(_) => solve(&p, o),
        Command::Simulate(_) => simulate_cmd(&p, o),
        Command::Verify(_) => verify(&p, o),
    };
    let outcome = match outcome {
        Ok(out) => out,
        Err(e) => {
            eprintln!("mflq {name}: {e}");
            let code = exit_code(&e);
            let mut v = envelope(name, json!({}));
            v["error"] = json!(e.to_string());
            Outcome { report: v, code, raw: None }
        }
    };
    if let Some(reason) = outcome.report.get("reason").and_then(|r| r.as_str()) {
        eprintln!("mflq {name}: {reason}");
    }
    if let Err(e) = emit(o, &outcome) {
        eprintln!("mflq {name}: cannot write report: {e}");
        return EXIT_INPUT;
    }
    outcome.code
}
