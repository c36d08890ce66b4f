//! Bob's dichotomic observables in the Jordan-block qubit form and the CHSH
//! steering functional `I = tr Σ_{a,x} T_{ax} σ_{a|x}`.

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use crate::assemblage::Assemblage;
use crate::error::{Error, Result};
use crate::linesearch::golden_section_max;
use crate::matkernel::{pauli, HermitianMat};

pub const CHSH_CLASSICAL_BOUND: f64 = 2.0;
pub const CHSH_QUANTUM_BOUND: f64 = 2.0 * SQRT_2;

/// Default number of grid points for the θ maximization.
pub const DEFAULT_THETA_GRID: usize = 10_000;

/// Assemblages handed to [`chsh_functional`] must validate at this tolerance.
pub const FUNCTIONAL_VALIDATION_TOL: f64 = 1e-9;

const THETA_SLACK: f64 = 1e-12;

/// `B₀ = cos θ Z + sin θ X`, `B₁ = cos θ Z − sin θ X` with `θ ∈ [0, π/2]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BobObservables {
    theta: f64,
}

impl BobObservables {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta >= -THETA_SLACK && theta <= FRAC_PI_2 + THETA_SLACK) {
            return Err(Error::Domain(format!("theta = {theta} outside [0, pi/2]")));
        }
        Ok(Self { theta: theta.clamp(0.0, FRAC_PI_2) })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn b0(&self) -> HermitianMat {
        let (s, c) = self.theta.sin_cos();
        pauli::z().scale(c) + pauli::x().scale(s)
    }

    pub fn b1(&self) -> HermitianMat {
        let (s, c) = self.theta.sin_cos();
        pauli::z().scale(c) - pauli::x().scale(s)
    }
}

/// Operators `T_{ax}` of a steering inequality with its classical and quantum bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct SteeringFunctional {
    /// Indexed `x * 2 + a`.
    t_ops: Vec<HermitianMat>,
    pub classical_bound: f64,
    pub quantum_bound: f64,
}

impl SteeringFunctional {
    pub fn t_op(&self, a: usize, x: usize) -> &HermitianMat {
        &self.t_ops[x * 2 + a]
    }

    /// `tr Σ_{a,x} T_{ax} σ_{a|x}` without validating the assemblage.
    pub fn evaluate(&self, sigma: &Assemblage) -> Result<f64> {
        check_chsh_shape(sigma)?;
        let mut acc = 0.0;
        for x in 0..2 {
            for a in 0..2 {
                acc += self.t_op(a, x).trace_product(sigma.element(a, x));
            }
        }
        Ok(acc)
    }
}

fn check_chsh_shape(sigma: &Assemblage) -> Result<()> {
    if sigma.outcomes() != 2 || sigma.settings() != 2 {
        return Err(Error::Validation(format!(
            "CHSH functional needs 2 outcomes and 2 settings, got {} and {}",
            sigma.outcomes(),
            sigma.settings()
        )));
    }
    Ok(())
}

/// `T₀₀ = −T₁₀ = B₀ + B₁ = 2cos θ Z`, `T₀₁ = −T₁₁ = B₀ − B₁ = 2sin θ X`.
pub fn t_operators(obs: &BobObservables) -> SteeringFunctional {
    let t00 = obs.b0() + obs.b1();
    let t01 = obs.b0() - obs.b1();
    SteeringFunctional {
        t_ops: vec![t00, -t00, t01, -t01],
        classical_bound: CHSH_CLASSICAL_BOUND,
        quantum_bound: CHSH_QUANTUM_BOUND,
    }
}

/// CHSH value of `sigma` at angle `theta`, shape-checked only.
///
/// Uses the closed form `2cos θ·tr Z(σ₀₀ − σ₁₀) + 2sin θ·tr X(σ₀₁ − σ₁₁)`.
pub fn chsh_value(sigma: &Assemblage, theta: f64) -> f64 {
    let (zc, xc) = chsh_components(sigma);
    let (s, c) = theta.sin_cos();
    2.0 * (c * zc + s * xc)
}

/// `(tr Z(σ₀₀ − σ₁₀), tr X(σ₀₁ − σ₁₁))`
pub fn chsh_components(sigma: &Assemblage) -> (f64, f64) {
    let z = (*sigma.element(0, 0) - *sigma.element(1, 0)).pauli_components()[3];
    let x = (*sigma.element(0, 1) - *sigma.element(1, 1)).pauli_components()[1];
    // tr(Z·M) = 2·m_z for M = m0 I + m·σ
    (2.0 * z, 2.0 * x)
}

/// The CHSH functional of a valid two-setting, two-outcome assemblage.
pub fn chsh_functional(sigma: &Assemblage, obs: &BobObservables) -> Result<f64> {
    check_chsh_shape(sigma)?;
    let report = sigma.validate(FUNCTIONAL_VALIDATION_TOL);
    if !report.passed() {
        return Err(Error::Validation(report.violations.join("; ")));
    }
    t_operators(obs).evaluate(sigma)
}

/// Maximizes the CHSH value over `θ ∈ [0, π/2]`: a uniform grid of
/// `grid_size` points, then golden-section refinement around the best point.
pub fn max_violation_over_theta(sigma: &Assemblage, grid_size: usize) -> Result<(f64, f64)> {
    check_chsh_shape(sigma)?;
    if grid_size < 2 {
        return Err(Error::Domain(format!("theta grid needs at least 2 points, got {grid_size}")));
    }
    let step = FRAC_PI_2 / (grid_size - 1) as f64;
    let (best_i, _) = (0..grid_size)
        .map(|i| (i, chsh_value(sigma, i as f64 * step)))
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let lo = (best_i as f64 - 1.0).max(0.0) * step;
    let hi = ((best_i + 1) as f64 * step).min(FRAC_PI_2);
    Ok(golden_section_max(|t| chsh_value(sigma, t), lo, hi, 1e-10, 200))
}
