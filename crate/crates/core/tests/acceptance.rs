//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Built without the libtest harness so the report is always printed:
//! `cargo test -p steerbound --test acceptance`. Exits nonzero if any
//! criterion fails.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use steerbound::assemblage::{
    chsh_realization, chsh_reference, from_classical, random_realization, random_unit_vector, realize,
    ClassicalStrategy, MeasurementKind,
};
use steerbound::fidelity::{
    appendix_b_strategy, assemblage_fidelity, classical_fidelity, deterministic_responses, state_fidelity,
    strategy_operator,
};
use steerbound::matkernel::{kron, partial_trace_a, pauli, HermitianMat, Matrix, C64};
use steerbound::numsearch::{
    best_channel, best_channel_from, sample_assemblage, sandwich_sweep, ChannelFamily, SearchConfig,
};
use steerbound::selftest::{
    analytic_bound, chsh_upper_bound, coefficient_search, dephasing_channel, dephasing_strength,
    extractability_with_channel, k_operators, margin_sweep, threshold, BoundCoefficients, QubitChannel, TRule,
};
use steerbound::steering::{chsh_functional, chsh_value, BobObservables, CHSH_QUANTUM_BOUND};

// Tolerances pinned by the criteria.
const TOL_CLASSICAL_FIDELITY: f64 = 1e-9;
const TOL_MARGIN: f64 = 1e-10;
const TOL_S: f64 = 2e-3;
const TOL_T: f64 = 1e-4;
const TOL_ENDPOINT: f64 = 1e-12;
const TOL_THRESHOLD: f64 = 1e-9;
const TOL_REALIZE: f64 = 1e-12;
const TOL_FUNCTIONAL: f64 = 1e-10;
const TOL_SANDWICH: f64 = 1e-4;
const TOL_WITNESS: f64 = 1e-9;

const THETA_POINTS: usize = 10_000;
const S_POINTS: usize = 512;
const SANDWICH_TARGETS: [f64; 5] = [2.1, 2.34, 2.5, 2.7, CHSH_QUANTUM_BOUND];
const SANDWICH_RESTARTS: usize = 20;

const FC: f64 = 0.853_553_390_593_273_7; // (2 + √2)/4
const S_STAR: f64 = 0.603_553_390_593_273_8; // (1 + √2)/4
const T_STAR: f64 = 0.292_893_218_813_452_5; // (2 − √2)/2

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_density<R: Rng>(rng: &mut R) -> HermitianMat {
    let r: f64 = rng.random_range(0.0..1.0);
    let u = random_unit_vector(rng);
    pauli::bloch_state([r * u[0], r * u[1], r * u[2]])
}

fn random_hermitian<R: Rng>(rng: &mut R, dim: usize) -> HermitianMat {
    let mut m = Matrix::zeros(dim);
    for i in 0..dim {
        for j in i..dim {
            let re = rng.random_range(-1.0..1.0);
            let im = if i == j { 0.0 } else { rng.random_range(-1.0..1.0) };
            m.set(i, j, C64::new(re, im));
            m.set(j, i, C64::new(re, -im));
        }
    }
    HermitianMat::new(m).unwrap()
}

fn random_classical<R: Rng>(rng: &mut R) -> ClassicalStrategy {
    let k = rng.random_range(1..=4);
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    let responses = (0..k).map(|_| vec![rng.random_range(0..2), rng.random_range(0..2)]).collect();
    let states = (0..k).map(|_| random_density(rng)).collect();
    ClassicalStrategy::new(weights, responses, states).unwrap()
}

fn criterion_1() -> Check {
    let cf = classical_fidelity(&chsh_reference()).map_err(|e| e.to_string())?;
    let value = cf.value.value();
    ensure((value - FC).abs() < TOL_CLASSICAL_FIDELITY, || format!("F^C = {value:.12}"))?;
    let attained = assemblage_fidelity(&chsh_reference(), &from_classical(&appendix_b_strategy(), 2, 2).unwrap()).unwrap();
    ensure((attained - FC).abs() < TOL_CLASSICAL_FIDELITY, || format!("strategy attains {attained:.12}"))?;
    Ok(format!("F^C = {value:.10}, strategy attains {attained:.10}"))
}

fn criterion_2() -> Check {
    let sweep = margin_sweep(S_STAR, TRule::Constraints, THETA_POINTS, TOL_MARGIN).map_err(|e| e.to_string())?;
    ensure(sweep.worst_margin >= -TOL_MARGIN, || {
        format!("worst margin {:e} at θ = {}", sweep.worst_margin, sweep.worst_theta)
    })?;
    Ok(format!("worst margin {:.3e} at θ = {:.6}", sweep.worst_margin, sweep.worst_theta))
}

fn criterion_3() -> Check {
    let grid: Vec<f64> = (0..S_POINTS).map(|i| i as f64 / (S_POINTS - 1) as f64).collect();
    let c = coefficient_search(&grid, THETA_POINTS).map_err(|e| e.to_string())?;
    ensure((c.s - S_STAR).abs() < TOL_S && (c.t - T_STAR).abs() < TOL_T, || format!("s = {:.10}, t = {:.10}", c.s, c.t))?;
    Ok(format!("s = {:.10}, t = {:.10}", c.s, c.t))
}

fn criterion_4() -> Check {
    let top = analytic_bound(2.0 * SQRT_2);
    let at_threshold = analytic_bound(8.0 - 4.0 * SQRT_2);
    let thr = threshold(&BoundCoefficients::optimal(), FC).map_err(|e| e.to_string())?;
    ensure((top - 1.0).abs() < TOL_ENDPOINT, || format!("bound(2√2) = {top:.15}"))?;
    ensure((at_threshold - FC).abs() < TOL_ENDPOINT, || format!("bound(8−4√2) = {at_threshold:.15}"))?;
    ensure((thr - 2.343_145_750_5).abs() < TOL_THRESHOLD, || format!("threshold = {thr:.12}"))?;
    Ok(format!("bound(2√2) = {top:.12}, bound(8−4√2) = {at_threshold:.12}, threshold = {thr:.10}"))
}

fn criterion_5() -> Check {
    let sigma = realize(&chsh_realization()).map_err(|e| e.to_string())?;
    // σ_{0|0} = |0⟩⟨0|/2, σ_{1|0} = |1⟩⟨1|/2, σ_{0|1} = |+⟩⟨+|/2, σ_{1|1} = |−⟩⟨−|/2
    let expected = [
        [[0.5, 0.0], [0.0, 0.0]],
        [[0.0, 0.0], [0.0, 0.5]],
        [[0.25, 0.25], [0.25, 0.25]],
        [[0.25, -0.25], [-0.25, 0.25]],
    ];
    let mut worst: f64 = 0.0;
    for x in 0..2 {
        for a in 0..2 {
            let e = expected[2 * x + a];
            let el = sigma.element(a, x);
            for i in 0..2 {
                for j in 0..2 {
                    worst = worst.max((el.get(i, j) - C64::new(e[i][j], 0.0)).norm());
                }
            }
        }
    }
    ensure(worst < TOL_REALIZE, || format!("max entry deviation {worst:e}"))?;
    let value = chsh_functional(&sigma, &BobObservables::new(FRAC_PI_4).unwrap()).map_err(|e| e.to_string())?;
    ensure((value - CHSH_QUANTUM_BOUND).abs() < TOL_FUNCTIONAL, || format!("I = {value:.15}"))?;
    Ok(format!("entry deviation {worst:.1e}, I(π/4) = {value:.12}"))
}

fn criterion_6() -> Check {
    let cfg = SearchConfig {
        samples: SANDWICH_RESTARTS,
        beta_targets: SANDWICH_TARGETS.to_vec(),
        tolerance: TOL_SANDWICH,
        ..SearchConfig::default()
    };
    let report = sandwich_sweep(&cfg).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut bad = Vec::new();
    for r in &report.records {
        let ok = r.numeric_min >= r.analytic_lower - TOL_SANDWICH && r.numeric_min <= r.eq8_upper + TOL_SANDWICH;
        parts.push(format!("β={:.4}: {:.6} ∈ [{:.6}, {:.6}]", r.beta, r.numeric_min, r.analytic_lower, r.eq8_upper));
        if !ok || r.residual >= TOL_SANDWICH {
            bad.push(format!("β={:.4} numeric {:.6} residual {:.1e}", r.beta, r.numeric_min, r.residual));
        }
    }
    ensure(bad.is_empty() && report.records.len() == SANDWICH_TARGETS.len(), || bad.join("; "))?;
    Ok(parts.join("; "))
}

fn criterion_7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7_007);
    let coeffs = BoundCoefficients::optimal();
    let mut worst = f64::INFINITY;
    for _ in 0..200 {
        let sigma = sample_assemblage(&mut rng, true);
        let theta = rng.random_range(0.0..=FRAC_PI_2);
        let channel = dephasing_channel(theta, dephasing_strength(coeffs.s, theta)).unwrap();
        let f = extractability_with_channel(&sigma, &channel).map_err(|e| e.to_string())?;
        let beta = chsh_value(&sigma, theta);
        worst = worst.min(f - (coeffs.s * beta + coeffs.t) / 2.0);
    }
    ensure(worst >= -TOL_WITNESS, || format!("worst slack {worst:e}"))?;
    Ok(format!("200 instances, worst slack {worst:.3e}"))
}

// Criterion 8: one function per module invariant block.

fn inv_matkernel() -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(801);
    for _ in 0..200 {
        for dim in [2, 4] {
            let h = random_hermitian(&mut rng, dim);
            let (vals, vecs) = h.eigh();
            let mut rec = Matrix::zeros(dim);
            for (l, v) in vals.iter().zip(&vecs) {
                rec = rec + Matrix::outer(v).unwrap().scale(*l);
            }
            ensure(rec.max_abs_diff(h.matrix()) < 1e-9, || "eigendecomposition reconstruction".into())?;
        }
    }
    for _ in 0..100 {
        let a = random_hermitian(&mut rng, 2);
        let b = random_hermitian(&mut rng, 2);
        let pt = partial_trace_a(&kron(&a, &b).unwrap()).unwrap();
        ensure(pt.max_abs_diff(&b.scale(a.trace())) < 1e-10, || "partial trace of product".into())?;
    }
    for _ in 0..200 {
        let p = rng.random_range(0.0..5.0);
        let rho = random_density(&mut rng);
        ensure(rho.scale(p).min_eigval() >= -1e-12, || "scaled density matrix not PSD".into())?;
    }
    Ok(())
}

fn inv_assemblage() -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(802);
    for i in 0..200 {
        let kind = if i % 2 == 0 { MeasurementKind::Projective } else { MeasurementKind::Povm };
        let r = random_realization(&mut rng, kind);
        let sigma = realize(&r).map_err(|e| e.to_string())?;
        ensure(sigma.validate(1e-9).passed(), || "realized assemblage invalid".into())?;
        for x in 0..2 {
            for a in 0..2 {
                let lifted = kron(&r.alice_povms()[x][a], &HermitianMat::identity(2)).unwrap();
                let p = lifted.trace_product(r.state());
                ensure((sigma.prob(a, x) - p).abs() < 1e-10, || "p(a|x) mismatch".into())?;
            }
        }
    }
    for _ in 0..200 {
        let s = random_classical(&mut rng);
        ensure(from_classical(&s, 2, 2).unwrap().validate(1e-10).passed(), || "classical assemblage invalid".into())?;
    }
    Ok(())
}

fn inv_steering() -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(803);
    let grid: Vec<f64> = (0..1000).map(|i| FRAC_PI_2 * i as f64 / 999.0).collect();
    for _ in 0..200 {
        let s1 = sample_assemblage(&mut rng, false);
        let s2 = sample_assemblage(&mut rng, false);
        let p = rng.random_range(0.0..1.0);
        let theta = rng.random_range(0.0..FRAC_PI_2);
        let obs = BobObservables::new(theta).unwrap();
        let mixed = s1.mix(p, &s2).unwrap();
        let lhs = chsh_functional(&mixed, &obs).unwrap();
        let rhs = p * chsh_functional(&s1, &obs).unwrap() + (1.0 - p) * chsh_functional(&s2, &obs).unwrap();
        ensure((lhs - rhs).abs() < 1e-10, || "linearity".into())?;
        let flipped = chsh_functional(&s1.flip_outcomes(), &obs).unwrap();
        ensure((flipped + chsh_functional(&s1, &obs).unwrap()).abs() < 1e-12, || "sign symmetry".into())?;
        for &t in &grid {
            ensure(chsh_value(&s1, t).abs() <= CHSH_QUANTUM_BOUND + 1e-8, || "Tsirelson bound exceeded".into())?;
        }
    }
    Ok(())
}

fn inv_fidelity() -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(804);
    for _ in 0..200 {
        let a = random_density(&mut rng);
        let b = random_density(&mut rng);
        let ab = state_fidelity(&a, &b).unwrap();
        let ba = state_fidelity(&b, &a).unwrap();
        ensure((ab - ba).abs() < 1e-12, || "fidelity not symmetric".into())?;
    }
    let reference = chsh_reference();
    let cf = classical_fidelity(&reference).unwrap().value.value();
    for _ in 0..100 {
        let s = random_classical(&mut rng);
        let f = assemblage_fidelity(&reference, &from_classical(&s, 2, 2).unwrap()).unwrap();
        ensure(f <= cf + 1e-12, || format!("classical strategy beats F^C: {f}"))?;
    }
    ensure(cf < 1.0 && ((1.0 - cf) - (1.0 - FC)).abs() < 1e-9, || "nonclassicality gap".into())?;
    for lambda in deterministic_responses(2, 2) {
        let m = strategy_operator(&reference, &lambda);
        let top = m.max_eigval();
        let mut sampled = f64::NEG_INFINITY;
        for _ in 0..100_000 {
            sampled = sampled.max(m.trace_product(&random_density(&mut rng)));
        }
        ensure(sampled <= top + 1e-9, || format!("sampling oracle exceeds eigenvalue for {lambda:?}"))?;
    }
    Ok(())
}

fn inv_selftest() -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(805);
    let reference = chsh_reference();
    for _ in 0..100 {
        let rho = random_density(&mut rng);
        let theta = rng.random_range(0.0..=FRAC_PI_2);
        let c = rng.random_range(-1.0..=1.0);
        let k = k_operators(theta, c).unwrap();
        let out = dephasing_channel(theta, c).unwrap().apply(&rho);
        for x in 0..2 {
            for a in 0..2 {
                let lhs = k[2 * x + a].trace_product(&rho);
                let rhs = reference.element(a, x).scale(2.0).trace_product(&out);
                ensure((lhs - rhs).abs() < 1e-12, || "self-duality".into())?;
            }
        }
    }
    let sweep = margin_sweep(S_STAR, TRule::Constraints, THETA_POINTS, TOL_MARGIN).unwrap();
    ensure(sweep.worst_margin >= -TOL_MARGIN, || "PSD sweep".into())?;
    let coeffs = BoundCoefficients::optimal();
    for _ in 0..200 {
        let sigma = sample_assemblage(&mut rng, true);
        let theta = rng.random_range(0.0..=FRAC_PI_2);
        let ch = dephasing_channel(theta, dephasing_strength(coeffs.s, theta)).unwrap();
        let f = extractability_with_channel(&sigma, &ch).unwrap();
        ensure(f >= coeffs.s / 2.0 * chsh_value(&sigma, theta) + coeffs.t / 2.0 - 1e-9, || "chain of bounds".into())?;
    }
    for i in 0..1000 {
        let beta = 2.0 + (CHSH_QUANTUM_BOUND - 2.0) * i as f64 / 999.0;
        ensure(analytic_bound(beta) <= chsh_upper_bound(beta) + 1e-12, || format!("lower above upper at {beta}"))?;
    }
    let coarse = coefficient_search(&(0..128).map(|i| i as f64 / 127.0).collect::<Vec<_>>(), 2_000).unwrap();
    let fine = coefficient_search(&(0..256).map(|i| i as f64 / 255.0).collect::<Vec<_>>(), 4_000).unwrap();
    ensure((coarse.s - fine.s).abs() < 1.0 / 127.0 && (coarse.t - fine.t).abs() < 1.0 / 127.0, || {
        format!("grid doubling moved (s, t) from ({}, {}) to ({}, {})", coarse.s, coarse.t, fine.s, fine.t)
    })?;
    Ok(())
}

fn inv_numsearch() -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(806);
    for _ in 0..100 {
        let sigma = sample_assemblage(&mut rng, true);
        let theta = rng.random_range(0.0..FRAC_PI_2);
        let d = best_channel(&sigma, theta, ChannelFamily::DephasingOnly, 3);
        let u = best_channel_from(&sigma, theta, &d.params.embed(ChannelFamily::UnitaryPrePostDephasing, theta), 2);
        let g = best_channel_from(&sigma, theta, &u.params.embed(ChannelFamily::GeneralTwoKraus, theta), 1);
        for b in [&d, &u, &g] {
            ensure(b.history.windows(2).all(|w| w[1] >= w[0]), || "ascent history decreased".into())?;
        }
        ensure(g.fidelity >= u.fidelity - 1e-8 && u.fidelity >= d.fidelity - 1e-8, || "family nesting".into())?;
    }
    let cfg = SearchConfig { samples: 2, beta_targets: vec![2.5], max_evals: 300, ..SearchConfig::default() };
    let a = sandwich_sweep(&cfg).map_err(|e| e.to_string())?;
    let b = sandwich_sweep(&cfg).map_err(|e| e.to_string())?;
    ensure(a.to_json().unwrap() == b.to_json().unwrap(), || "sweep not reproducible".into())?;
    for r in a.records.iter().filter(|_| a.passed) {
        ensure(r.numeric_min >= r.analytic_lower - cfg.tolerance, || "one-sided certification".into())?;
    }
    Ok(())
}

fn inv_cli() -> std::result::Result<(), String> {
    let bin = env!("CARGO_BIN_EXE_steerbound");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let path = dir.path().join(name);
        let status = Command::new(bin)
            .args(["bound-curve", "--points", "50", "--out"])
            .arg(&path)
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.code() == Some(0), || "bound-curve exit code".into())?;
        outputs.push(std::fs::read_to_string(&path).map_err(|e| e.to_string())?);
    }
    ensure(outputs[0] == outputs[1], || "bound-curve not deterministic".into())?;
    let row = outputs[0].lines().nth(2).unwrap_or_default();
    for field in row.split(',') {
        let digits = field.chars().filter(|c| c.is_ascii_digit()).collect::<String>();
        let significant = digits.trim_start_matches('0').len();
        ensure(significant == 9, || format!("field `{field}` is not 9 significant digits"))?;
    }
    let code = |args: &[&str]| Command::new(bin).args(args).output().map(|o| o.status.code()).map_err(|e| e.to_string());
    ensure(code(&["no-such-command"])? == Some(2), || "unknown command exit code".into())?;
    ensure(code(&["bound-curve", "--no-such-flag"])? == Some(2), || "unknown flag exit code".into())?;
    ensure(code(&["classical-fidelity", "--assemblage", "chsh"])? == Some(0), || "classical-fidelity exit code".into())?;
    ensure(code(&["classical-fidelity", "--assemblage", "/nonexistent.json"])? == Some(1), || "missing file exit code".into())?;
    ensure(code(&["verify-inequality", "--theta-points", "1000", "--s", "optimal"])? == Some(0), || "verify exit code".into())?;
    Ok(())
}

fn criterion_8() -> Check {
    let suites: [(&str, fn() -> std::result::Result<(), String>); 7] = [
        ("matkernel", inv_matkernel),
        ("assemblage", inv_assemblage),
        ("steering", inv_steering),
        ("fidelity", inv_fidelity),
        ("selftest", inv_selftest),
        ("numsearch", inv_numsearch),
        ("cli", inv_cli),
    ];
    let mut failed = Vec::new();
    for (name, suite) in suites {
        if let Err(e) = suite() {
            failed.push(format!("{name}: {e}"));
        }
    }
    ensure(failed.is_empty(), || failed.join("; "))?;
    Ok("7 invariant suites".into())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("1 classical fidelity", criterion_1),
        ("2 operator-inequality sweep", criterion_2),
        ("3 coefficient recovery", criterion_3),
        ("4 bound endpoints and threshold", criterion_4),
        ("5 reference realization", criterion_5),
        ("6 sandwich property", criterion_6),
        ("7 witness chain", criterion_7),
        ("8 invariant suites", criterion_8),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  [{name}] {detail} ({secs:.2}s)"),
            Err(detail) => {
                failures += 1;
                println!("FAIL  [{name}] {detail} ({secs:.2}s)");
            }
        }
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
