//! The `steerbound` command line.
//!
//! Exit codes: 0 on success, 1 when a computation fails or a check does not
//! hold, 2 on usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;

use crate::assemblage::{chsh_reference, projective_pair, realize, Assemblage, QuantumRealization};
use crate::error::{Error, Result};
use crate::fidelity::classical_fidelity;
use crate::matkernel::{pauli, HermitianMat, Matrix, C64};
use crate::numsearch::{sandwich_sweep, SearchConfig};
use crate::output::{format_sig, write_atomic};
use crate::selftest::{analytic_bound, chsh_upper_bound, coefficient_search, margin_sweep, threshold, BoundCoefficients, TRule};
use crate::fidelity::chsh_classical_fidelity;
use crate::steering::{CHSH_CLASSICAL_BOUND, CHSH_QUANTUM_BOUND};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable that overrides the search seed.
pub const SEED_ENV: &str = "STEERBOUND_SEED";

/// Margin below which `verify-inequality` reports failure.
pub const MARGIN_TOL: f64 = 1e-10;

#[derive(Parser, Debug)]
#[command(name = "steerbound", version, about = "Robust self-testing bounds for CHSH-type steering assemblages")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Analytic lower bound, upper bound and classical fidelity as a CSV curve.
    BoundCurve {
        #[arg(long, default_value_t = CHSH_CLASSICAL_BOUND)]
        beta_min: f64,
        #[arg(long, default_value_t = CHSH_QUANTUM_BOUND)]
        beta_max: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Output CSV path; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweeps the operator inequalities over Bob's angle.
    VerifyInequality {
        #[arg(long, default_value_t = 10_000)]
        theta_points: usize,
        /// `optimal` or a number.
        #[arg(long, default_value = "optimal")]
        s: String,
        /// `constraints` or `fixed:T0,T1`.
        #[arg(long, default_value = "constraints")]
        t0_t1_rule: String,
    },
    /// Classical fidelity of a reference assemblage.
    ClassicalFidelity {
        /// `chsh` or a path to an assemblage JSON file.
        #[arg(long, default_value = "chsh")]
        assemblage: String,
    },
    /// Grid search for the bound coefficients.
    CoefficientSearch {
        #[arg(long, default_value_t = 512)]
        s_points: usize,
        #[arg(long, default_value_t = 10_000)]
        theta_points: usize,
    },
    /// Numerical min-max cross-check of the analytic bound.
    Sandwich {
        /// Search configuration JSON; defaults if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "sandwich.json")]
        json_out: PathBuf,
        #[arg(long, default_value = "sandwich.csv")]
        csv_out: PathBuf,
    },
    /// Builds the assemblage of a state and Alice's projective measurements.
    Realize {
        /// `phi-plus` or a path to a two-qubit state JSON file.
        #[arg(long, default_value = "phi-plus")]
        state: String,
        /// Comma-separated measurement axes: X, Y, Z (optionally negated) or `x:y:z`.
        #[arg(long, default_value = "Z,X")]
        measurements: String,
        /// Output JSON path; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Checks positivity and no-signaling of an assemblage file.
    Validate {
        #[arg(long)]
        assemblage: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(Error::Validation(msg)) if msg.starts_with("usage: ") => {
            let _ = writeln!(err, "error: {}", &msg[7..]);
            EXIT_USAGE
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Validation(format!("usage: {}", msg.into()))
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::BoundCurve { beta_min, beta_max, points, out: path } => {
            let csv = bound_curve_csv(beta_min, beta_max, points)?;
            emit(&csv, path.as_deref(), out)?;
            Ok(EXIT_OK)
        }
        Command::VerifyInequality { theta_points, s, t0_t1_rule } => {
            let s = parse_s(&s)?;
            let rule = parse_rule(&t0_t1_rule)?;
            if theta_points < 2 {
                return Err(usage("--theta-points must be at least 2"));
            }
            let sweep = margin_sweep(s, rule, theta_points, MARGIN_TOL)?;
            writeln!(out, "s = {}", format_sig(s, 10))?;
            writeln!(out, "worst margin = {:e} at theta = {}", sweep.worst_margin, format_sig(sweep.worst_theta, 10))?;
            if sweep.failing_thetas.is_empty() {
                writeln!(out, "all {} angles pass", theta_points)?;
            } else {
                writeln!(out, "{} failing angles:", sweep.failing_thetas.len())?;
                for t in &sweep.failing_thetas {
                    writeln!(out, "  {}", format_sig(*t, 10))?;
                }
            }
            Ok(if sweep.worst_margin >= -MARGIN_TOL { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::ClassicalFidelity { assemblage } => {
            let reference = load_assemblage(&assemblage)?;
            let cf = classical_fidelity(&reference)?;
            writeln!(out, "classical fidelity = {}", format_sig(cf.value.value(), 10))?;
            writeln!(out, "strategy:")?;
            let s = &cf.strategy;
            for ((w, resp), state) in s.weights().iter().zip(s.responses()).zip(s.hidden_states()) {
                let [_, x, y, z] = state.pauli_components();
                writeln!(
                    out,
                    "  weight {} responses {:?} bloch ({}, {}, {})",
                    format_sig(*w, 6),
                    resp,
                    format_sig(2.0 * x, 6),
                    format_sig(2.0 * y, 6),
                    format_sig(2.0 * z, 6)
                )?;
            }
            Ok(EXIT_OK)
        }
        Command::CoefficientSearch { s_points, theta_points } => {
            if s_points < 2 || theta_points < 2 {
                return Err(usage("--s-points and --theta-points must be at least 2"));
            }
            let grid: Vec<f64> = (0..s_points).map(|i| i as f64 / (s_points - 1) as f64).collect();
            let c = coefficient_search(&grid, theta_points)?;
            writeln!(out, "s* = {}", format_sig(c.s, 10))?;
            writeln!(out, "t0 = {}", format_sig(c.t0, 10))?;
            writeln!(out, "t1 = {}", format_sig(c.t1, 10))?;
            writeln!(out, "t* = {}", format_sig(c.t, 10))?;
            writeln!(out, "bound at beta_Q = {}", format_sig(c.bound(CHSH_QUANTUM_BOUND), 10))?;
            writeln!(out, "threshold = {}", format_sig(threshold(&c, chsh_classical_fidelity())?, 10))?;
            Ok(EXIT_OK)
        }
        Command::Sandwich { config, json_out, csv_out } => {
            let mut cfg = match &config {
                Some(p) => SearchConfig::from_json(&std::fs::read_to_string(p)?)?,
                None => SearchConfig::default(),
            };
            if let Ok(seed) = std::env::var(SEED_ENV) {
                cfg.rng_seed = seed.trim().parse().map_err(|_| usage(format!("{SEED_ENV} is not an integer: {seed}")))?;
            }
            let report = sandwich_sweep(&cfg)?;
            report.write_json(&json_out)?;
            report.write_csv(&csv_out)?;
            for r in &report.records {
                writeln!(
                    out,
                    "beta {}  numeric {}  lower {}  upper {}  {}",
                    format_sig(r.beta, 9),
                    format_sig(r.numeric_min, 9),
                    format_sig(r.analytic_lower, 9),
                    format_sig(r.eq8_upper, 9),
                    if r.passed { "ok" } else { "FAIL" }
                )?;
            }
            Ok(if report.passed { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Realize { state, measurements, out: path } => {
            let rho = load_state(&state)?;
            let povms = parse_measurements(&measurements)?;
            let sigma = realize(&QuantumRealization::new(rho, povms)?)?;
            emit(&sigma.to_json()?, path.as_deref(), out)?;
            Ok(EXIT_OK)
        }
        Command::Validate { assemblage, tol } => {
            if !(tol >= 0.0) {
                return Err(usage("--tol must be nonnegative"));
            }
            let sigma = Assemblage::from_json(&std::fs::read_to_string(&assemblage)?)?;
            let report = sigma.validate(tol);
            writeln!(out, "psd margin = {:e}", report.psd_margin)?;
            writeln!(out, "no-signaling deviation = {:e}", report.no_signaling_deviation)?;
            writeln!(out, "normalization deviation = {:e}", report.normalization_deviation)?;
            for v in &report.violations {
                writeln!(out, "violation: {v}")?;
            }
            writeln!(out, "{}", if report.passed() { "valid" } else { "invalid" })?;
            Ok(if report.passed() { EXIT_OK } else { EXIT_FAILURE })
        }
    }
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

/// CSV of `beta, analytic_lower, eq8_upper, trivial_fc` on an even grid.
pub fn bound_curve_csv(beta_min: f64, beta_max: f64, points: usize) -> Result<String> {
    if points < 2 {
        return Err(usage("--points must be at least 2"));
    }
    if !(beta_min.is_finite() && beta_max.is_finite() && beta_min < beta_max) {
        return Err(usage("need --beta-min < --beta-max"));
    }
    let fc = chsh_classical_fidelity();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["beta", "analytic_lower", "eq8_upper", "trivial_fc"])?;
    for i in 0..points {
        let beta = beta_min + (beta_max - beta_min) * i as f64 / (points - 1) as f64;
        w.write_record([
            format_sig(beta, 9),
            format_sig(analytic_bound(beta), 9),
            format_sig(chsh_upper_bound(beta), 9),
            format_sig(fc, 9),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("ascii csv"))
}

fn parse_s(s: &str) -> Result<f64> {
    if s == "optimal" {
        return Ok(BoundCoefficients::optimal().s);
    }
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| usage(format!("--s expects `optimal` or a number, got `{s}`")))
}

fn parse_rule(s: &str) -> Result<TRule> {
    if s == "constraints" {
        return Ok(TRule::Constraints);
    }
    let bad = || usage(format!("--t0-t1-rule expects `constraints` or `fixed:T0,T1`, got `{s}`"));
    let rest = s.strip_prefix("fixed:").ok_or_else(bad)?;
    let (a, b) = rest.split_once(',').ok_or_else(bad)?;
    let t0 = a.trim().parse::<f64>().map_err(|_| bad())?;
    let t1 = b.trim().parse::<f64>().map_err(|_| bad())?;
    Ok(TRule::Fixed(t0, t1))
}

fn load_assemblage(spec: &str) -> Result<Assemblage> {
    if spec == "chsh" {
        return Ok(chsh_reference());
    }
    Assemblage::from_json(&std::fs::read_to_string(spec)?)
}

/// Two-qubit density matrix file: `{"re": [[..4]; 4], "im": [[..4]; 4]}`,
/// `im` optional.
#[derive(Deserialize)]
struct StateFile {
    re: Vec<Vec<f64>>,
    #[serde(default)]
    im: Option<Vec<Vec<f64>>>,
}

fn load_state(spec: &str) -> Result<HermitianMat> {
    if spec == "phi-plus" {
        return Ok(pauli::phi_plus());
    }
    let file: StateFile = serde_json::from_str(&std::fs::read_to_string(spec)?)?;
    let rows_ok = |m: &Vec<Vec<f64>>| m.len() == 4 && m.iter().all(|r| r.len() == 4);
    if !rows_ok(&file.re) || !file.im.as_ref().map_or(true, rows_ok) {
        return Err(Error::Validation("state must be a 4x4 matrix".into()));
    }
    let mut entries = Vec::with_capacity(16);
    for i in 0..4 {
        for j in 0..4 {
            let im = file.im.as_ref().map_or(0.0, |m| m[i][j]);
            entries.push(C64::new(file.re[i][j], im));
        }
    }
    HermitianMat::new(Matrix::from_row_major(4, &entries)?)
}

fn parse_axis(tok: &str) -> Result<[f64; 3]> {
    let tok = tok.trim();
    let (sign, name) = match tok.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, tok.strip_prefix('+').unwrap_or(tok)),
    };
    let axis = match name {
        "X" | "x" => [1.0, 0.0, 0.0],
        "Y" | "y" => [0.0, 1.0, 0.0],
        "Z" | "z" => [0.0, 0.0, 1.0],
        _ => {
            let parts: Vec<f64> = name
                .split(':')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| usage(format!("bad measurement `{tok}`")))?;
            if parts.len() != 3 {
                return Err(usage(format!("bad measurement `{tok}`")));
            }
            let n = parts.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(n > 0.0) {
                return Err(usage(format!("zero measurement axis `{tok}`")));
            }
            [parts[0] / n, parts[1] / n, parts[2] / n]
        }
    };
    Ok(axis.map(|v| sign * v))
}

fn parse_measurements(s: &str) -> Result<Vec<Vec<HermitianMat>>> {
    let povms: Vec<Vec<HermitianMat>> = s.split(',').map(|t| parse_axis(t).map(projective_pair)).collect::<Result<_>>()?;
    if povms.is_empty() {
        return Err(usage("no measurements given"));
    }
    Ok(povms)
}
