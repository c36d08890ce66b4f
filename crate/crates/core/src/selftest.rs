//! Analytic robust self-testing bound for the CHSH-type assemblage.
//!
//! For Bob's observables at angle `θ` the two-term dephasing channel
//! `Λ_θ(ρ) = (1+c)/2·ρ + (1−c)/2·ΓρΓ` (with `Γ = Z` for `θ ≤ π/4` and
//! `Γ = X` above) turns the reference states into operators
//! `K_{ax} = Λ_θ†(ρ*_{a|x})`. Whenever
//!
//! ```text
//! K_{ax} ≥ s·T_{ax} + t_{ax}·I     for all a, x, θ
//! ```
//!
//! holds, tracing against a uniform-marginal assemblage gives the extraction
//! fidelity bound `(s·β + t)/2` with `t = t₀ + t₁`. This module builds the
//! channels and `K` operators, evaluates the tightest `t₀, t₁` for a given
//! slope `s`, checks the operator inequalities numerically and searches for
//! the slope that makes the bound reach 1 at the Tsirelson point.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use serde::Serialize;

use crate::assemblage::{chsh_reference, Assemblage};
use crate::error::{Error, Result};
use crate::fidelity::{assemblage_fidelity_unchecked, chsh_classical_fidelity};
use crate::matkernel::{pauli, HermitianMat, Matrix};
use crate::steering::{chsh_value, t_operators, BobObservables, CHSH_CLASSICAL_BOUND, CHSH_QUANTUM_BOUND};

/// Largest allowed `|p(a|x) − 1/2|` when the analytic bound is applied.
pub const UNIFORM_MARGINAL_TOL: f64 = 1e-6;

const UNITARY_TOL: f64 = 1e-12;

/// Any qubit channel that can act on Bob's states.
pub trait QubitChannel {
    fn apply(&self, rho: &HermitianMat) -> HermitianMat;

    fn apply_to_assemblage(&self, sigma: &Assemblage) -> Assemblage {
        sigma.map(|e| self.apply(e))
    }
}

/// One weighted unitary conjugation `w·UρU†`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrausTerm {
    pub weight: f64,
    pub conjugator: Matrix,
}

/// A mixed-unitary qubit channel `ρ ↦ Σ w_i U_i ρ U_i†`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractionChannel {
    terms: Vec<KrausTerm>,
    /// Set when the dephasing parameter had to be clamped into `[−1, 1]`.
    pub clamped: bool,
}

impl ExtractionChannel {
    pub fn new(terms: Vec<KrausTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Validation("channel needs at least one term".into()));
        }
        if terms.iter().any(|t| !(t.weight >= 0.0)) {
            return Err(Error::Validation("channel weights must be nonnegative".into()));
        }
        let total: f64 = terms.iter().map(|t| t.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("channel weights sum to {total}, expected 1")));
        }
        for t in &terms {
            if t.conjugator.dim() != 2 {
                return Err(Error::DimensionMismatch { expected: 2, found: t.conjugator.dim() });
            }
            let uu = t.conjugator * t.conjugator.adjoint();
            if uu.max_abs_diff(&Matrix::identity(2)) > UNITARY_TOL {
                return Err(Error::Validation("channel conjugator is not unitary".into()));
            }
        }
        Ok(Self { terms, clamped: false })
    }

    pub fn identity() -> Self {
        Self::new(vec![KrausTerm { weight: 1.0, conjugator: Matrix::identity(2) }]).expect("identity")
    }

    pub fn terms(&self) -> &[KrausTerm] {
        &self.terms
    }

    /// Kraus operators `√w_i·U_i`.
    pub fn kraus_operators(&self) -> Vec<Matrix> {
        self.terms.iter().map(|t| t.conjugator.scale(t.weight.sqrt())).collect()
    }

    /// Heisenberg-picture map `X ↦ Σ w_i U_i† X U_i`.
    pub fn apply_dual(&self, op: &HermitianMat) -> HermitianMat {
        self.terms
            .iter()
            .fold(HermitianMat::zeros(2), |acc, t| acc + op.conjugate_by(&t.conjugator.adjoint()).scale(t.weight))
    }
}

impl QubitChannel for ExtractionChannel {
    fn apply(&self, rho: &HermitianMat) -> HermitianMat {
        self.terms
            .iter()
            .fold(HermitianMat::zeros(2), |acc, t| acc + rho.conjugate_by(&t.conjugator).scale(t.weight))
    }
}

fn check_theta(theta: f64) -> Result<f64> {
    Ok(BobObservables::new(theta)?.theta())
}

/// `true` on the first interval `[0, π/4]` (boundary included).
pub fn in_first_interval(theta: f64) -> bool {
    theta <= FRAC_PI_4
}

/// `Γ(θ)`: `Z` on `[0, π/4]`, `X` on `(π/4, π/2]`.
pub fn dephasing_axis(theta: f64) -> HermitianMat {
    if in_first_interval(theta) {
        pauli::z()
    } else {
        pauli::x()
    }
}

/// `c(θ) = min{1, 4s·sin θ}` on the first interval, `min{1, 4s·cos θ}` on the second.
pub fn dephasing_strength(s: f64, theta: f64) -> f64 {
    if in_first_interval(theta) {
        (4.0 * s * theta.sin()).min(1.0)
    } else {
        (4.0 * s * theta.cos()).min(1.0)
    }
}

/// `Λ_θ(ρ) = (1+c)/2·ρ + (1−c)/2·Γ(θ)ρΓ(θ)`.
///
/// `c` outside `[−1, 1]` is clamped and flagged on the returned channel.
/// Zero-weight terms are dropped, so `c = ±1` gives a single unitary.
pub fn dephasing_channel(theta: f64, c: f64) -> Result<ExtractionChannel> {
    let theta = check_theta(theta)?;
    if c.is_nan() {
        return Err(Error::Domain("dephasing parameter is NaN".into()));
    }
    let clamped = !(-1.0..=1.0).contains(&c);
    let c = c.clamp(-1.0, 1.0);
    let gamma: Matrix = dephasing_axis(theta).into();
    let terms: Vec<KrausTerm> = [(0.5 * (1.0 + c), Matrix::identity(2)), (0.5 * (1.0 - c), gamma)]
        .into_iter()
        .filter(|(w, _)| *w > 0.0)
        .map(|(weight, conjugator)| KrausTerm { weight, conjugator })
        .collect();
    let mut ch = ExtractionChannel::new(terms)?;
    ch.clamped = clamped;
    Ok(ch)
}

/// `K_{ax} = Λ_θ†(ρ*_{a|x})`, indexed `x * 2 + a`:
/// first interval `(I ± Z)/2, (I ± cX)/2`; second interval `(I ± cZ)/2, (I ± X)/2`.
pub fn k_operators(theta: f64, c: f64) -> Result<[HermitianMat; 4]> {
    let theta = check_theta(theta)?;
    if c.is_nan() {
        return Err(Error::Domain("dephasing parameter is NaN".into()));
    }
    let c = c.clamp(-1.0, 1.0);
    let (cz, cx) = if in_first_interval(theta) { (1.0, c) } else { (c, 1.0) };
    Ok([
        HermitianMat::from_pauli(0.5, 0.0, 0.0, 0.5 * cz),
        HermitianMat::from_pauli(0.5, 0.0, 0.0, -0.5 * cz),
        HermitianMat::from_pauli(0.5, 0.5 * cx, 0.0, 0.0),
        HermitianMat::from_pauli(0.5, -0.5 * cx, 0.0, 0.0),
    ])
}

/// Tightest `(t₀, t₁)` for slope `s` at angle `θ`, with `c = c(θ)`.
pub fn t_constraints(s: f64, theta: f64) -> (f64, f64) {
    let c = dephasing_strength(s, theta);
    let (sin, cos) = theta.sin_cos();
    let sharp = |proj: f64| (1.0 - 2.0 * s * proj).min(2.0 * s * proj);
    let dephased = |proj: f64| (0.5 * (1.0 + c - 4.0 * s * proj)).min(0.5 * (1.0 - c + 4.0 * s * proj));
    if in_first_interval(theta) {
        (sharp(cos), dephased(sin))
    } else {
        (dephased(cos), sharp(sin))
    }
}

/// `min_{a,x} λ_min(K_{ax} − s·T_{ax} − t_{ax}·I)` with `t_{a0} = t₀`, `t_{a1} = t₁`.
/// Nonnegative exactly when the operator inequality holds at this `θ`.
pub fn inequality_margin(s: f64, t0: f64, t1: f64, theta: f64, c: f64) -> Result<f64> {
    let obs = BobObservables::new(theta)?;
    let k = k_operators(obs.theta(), c)?;
    let f = t_operators(&obs);
    let id = HermitianMat::identity(2);
    let mut worst = f64::INFINITY;
    for x in 0..2 {
        let t = if x == 0 { t0 } else { t1 };
        for a in 0..2 {
            let op = k[x * 2 + a] - f.t_op(a, x).scale(s) - id.scale(t);
            worst = worst.min(op.min_eigval());
        }
    }
    Ok(worst)
}

/// Uniform grid on `[0, π/2]` with `n` points, plus `π/4` if not already on it.
pub fn theta_grid(n: usize) -> Vec<f64> {
    let n = n.max(2);
    let step = FRAC_PI_2 / (n - 1) as f64;
    let mut grid: Vec<f64> = (0..n).map(|i| (i as f64 * step).min(FRAC_PI_2)).collect();
    if !grid.iter().any(|&t| t == FRAC_PI_4) {
        let pos = grid.partition_point(|&t| t < FRAC_PI_4);
        grid.insert(pos, FRAC_PI_4);
    }
    grid
}

/// Result of the worst-case sweep over θ.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginSweep {
    pub worst_margin: f64,
    pub worst_theta: f64,
    /// Grid angles whose margin is below `−tol`.
    pub failing_thetas: Vec<f64>,
}

/// How `(t₀, t₁)` are chosen during a margin sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TRule {
    /// `t_constraints(s, θ)` at each θ.
    Constraints,
    /// The same `(t₀, t₁)` at every θ.
    Fixed(f64, f64),
}

/// Evaluates [`inequality_margin`] with `c = c(θ)` over [`theta_grid`].
pub fn margin_sweep(s: f64, rule: TRule, theta_points: usize, tol: f64) -> Result<MarginSweep> {
    let mut sweep = MarginSweep { worst_margin: f64::INFINITY, worst_theta: 0.0, failing_thetas: Vec::new() };
    for theta in theta_grid(theta_points) {
        let (t0, t1) = match rule {
            TRule::Constraints => t_constraints(s, theta),
            TRule::Fixed(t0, t1) => (t0, t1),
        };
        let m = inequality_margin(s, t0, t1, theta, dephasing_strength(s, theta))?;
        if m < sweep.worst_margin {
            sweep.worst_margin = m;
            sweep.worst_theta = theta;
        }
        if m < -tol {
            sweep.failing_thetas.push(theta);
        }
    }
    Ok(sweep)
}

/// Slope and offsets of an affine bound `β ↦ (s·β + t)/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundCoefficients {
    pub s: f64,
    pub t0: f64,
    pub t1: f64,
    pub t: f64,
}

impl BoundCoefficients {
    /// `s = (1 + √2)/4`, `t = (2 − √2)/2` split evenly (the split at `θ = π/4`).
    pub fn optimal() -> Self {
        let half = (2.0 - SQRT_2) / 4.0;
        Self { s: (1.0 + SQRT_2) / 4.0, t0: half, t1: half, t: 2.0 * half }
    }

    /// `(s·β + t)/2`
    pub fn bound(&self, beta: f64) -> f64 {
        0.5 * (self.s * beta + self.t)
    }
}

/// `t(s) = min_θ [t₀(θ) + t₁(θ)]` over the grid, with the split at the minimizer.
pub fn min_offset(s: f64, grid: &[f64]) -> (f64, f64, f64) {
    grid.iter()
        .map(|&theta| t_constraints(s, theta))
        .fold((f64::INFINITY, 0.0, 0.0), |best, (t0, t1)| if t0 + t1 < best.0 { (t0 + t1, t0, t1) } else { best })
}

fn coefficients_at(s: f64, grid: &[f64]) -> BoundCoefficients {
    let (t, t0, t1) = min_offset(s, grid);
    BoundCoefficients { s, t0, t1, t }
}

/// Scores within this of the best are treated as tied.
const SCORE_TIE_TOL: f64 = 1e-12;

/// Searches slopes `s` for the bound `(s·β + t(s))/2` with the largest value at
/// `β = 2√2`; ties go to the smallest `s`, which gives the larger bound at every
/// `β < 2√2`. The best grid cell is then refined: by bisection on the left edge
/// of a tied plateau, otherwise by golden-section search.
pub fn coefficient_search(s_grid: &[f64], theta_grid_size: usize) -> Result<BoundCoefficients> {
    if s_grid.is_empty() {
        return Err(Error::Domain("slope grid is empty".into()));
    }
    let mut slopes = s_grid.to_vec();
    if slopes.iter().any(|s| !s.is_finite()) {
        return Err(Error::Domain("slope grid contains non-finite values".into()));
    }
    slopes.sort_by(f64::total_cmp);
    slopes.dedup();
    let grid = theta_grid(theta_grid_size);
    let score = |s: f64| coefficients_at(s, &grid).bound(CHSH_QUANTUM_BOUND);

    let scores: Vec<f64> = slopes.iter().map(|&s| score(s)).collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let i = scores.iter().position(|&v| v >= best - SCORE_TIE_TOL).expect("nonempty");
    if slopes.len() == 1 {
        return Ok(coefficients_at(slopes[0], &grid));
    }

    let plateau = i + 1 < slopes.len() && scores[i + 1] >= best - SCORE_TIE_TOL;
    let s_star = if plateau {
        if i == 0 {
            slopes[0]
        } else {
            let (mut lo, mut hi) = (slopes[i - 1], slopes[i]);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if score(mid) >= best - SCORE_TIE_TOL {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        }
    } else {
        let lo = slopes[i.saturating_sub(1)];
        let hi = slopes[(i + 1).min(slopes.len() - 1)];
        let (s, v) = crate::linesearch::golden_section_max(score, lo, hi, 1e-14, 300);
        if v >= scores[i] {
            s
        } else {
            slopes[i]
        }
    };
    Ok(coefficients_at(s_star, &grid))
}

/// `((1 + √2)/8)·β + (2 − √2)/4`
pub fn analytic_bound(beta: f64) -> f64 {
    (1.0 + SQRT_2) / 8.0 * beta + (2.0 - SQRT_2) / 4.0
}

/// `F^C + (1 − F^C)·(β − β_C)/(β_Q − β_C)`
pub fn upper_bound(beta: f64, f_c: f64, beta_c: f64, beta_q: f64) -> Result<f64> {
    if !(beta_q > beta_c) {
        return Err(Error::Domain(format!("need beta_c < beta_q, got {beta_c} and {beta_q}")));
    }
    Ok(f_c + (1.0 - f_c) * (beta - beta_c) / (beta_q - beta_c))
}

/// [`upper_bound`] for the CHSH reference.
pub fn chsh_upper_bound(beta: f64) -> f64 {
    upper_bound(beta, chsh_classical_fidelity(), CHSH_CLASSICAL_BOUND, CHSH_QUANTUM_BOUND).expect("fixed bounds")
}

/// The violation at which `(s·β + t)/2` reaches `f_c`.
pub fn threshold(coeffs: &BoundCoefficients, f_c: f64) -> Result<f64> {
    if coeffs.s == 0.0 {
        return Err(Error::Domain("slope s = 0 has no threshold".into()));
    }
    Ok((2.0 * f_c - coeffs.t) / coeffs.s)
}

/// Fidelity of `Λ(Σ)` with the CHSH reference.
pub fn extractability_with_channel(sigma: &Assemblage, channel: &impl QubitChannel) -> Result<f64> {
    let reference = chsh_reference();
    if !sigma.same_shape(&reference) {
        return Err(Error::Validation("assemblage must have 2 outcomes and 2 settings".into()));
    }
    let report = sigma.validate(1e-9);
    if !report.passed() {
        return Err(Error::Validation(report.violations.join("; ")));
    }
    Ok(assemblage_fidelity_unchecked(&reference, &channel.apply_to_assemblage(sigma)))
}

/// Per-instance certificate: the CHSH value at `θ`, the witness fidelity
/// reached by `Λ_θ`, and the certified lower bound `(s·β + t)/2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub theta: f64,
    pub beta: f64,
    pub witness_fidelity: f64,
    pub lower_bound: f64,
    pub max_marginal_deviation: f64,
}

/// Applies the analytic bound to one assemblage at Bob's angle `theta`.
///
/// Rejects assemblages whose marginals deviate from 1/2 by more than
/// [`UNIFORM_MARGINAL_TOL`] unless `allow_nonuniform` is set.
pub fn certify(sigma: &Assemblage, theta: f64, coeffs: &BoundCoefficients, allow_nonuniform: bool) -> Result<Certificate> {
    let theta = check_theta(theta)?;
    let deviation = sigma.max_marginal_deviation();
    if !allow_nonuniform && deviation > UNIFORM_MARGINAL_TOL {
        return Err(Error::Domain(format!(
            "marginals deviate from 1/2 by {deviation:.3e}; the bound assumes uniform marginals"
        )));
    }
    let channel = dephasing_channel(theta, dephasing_strength(coeffs.s, theta))?;
    let witness_fidelity = extractability_with_channel(sigma, &channel)?;
    let beta = chsh_value(sigma, theta);
    Ok(Certificate { theta, beta, witness_fidelity, lower_bound: coeffs.bound(beta), max_marginal_deviation: deviation })
}
