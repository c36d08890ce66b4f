//! State and assemblage fidelities, and the best fidelity any deterministic
//! local-hidden-state model reaches with a given reference.

use std::f64::consts::SQRT_2;

use crate::assemblage::{Assemblage, ClassicalStrategy, PHYSICAL_TOL, ZERO_PROB};
use crate::error::{Error, Result};
use crate::matkernel::{pauli, HermitianMat};

/// Reference states count as pure when their smallest eigenvalue is below this.
pub const PURITY_TOL: f64 = 1e-9;

/// A fidelity in `[0, 1]` (up to `1e-10` of roundoff above 1).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct FidelityValue(f64);

impl FidelityValue {
    pub fn new(value: f64) -> Result<Self> {
        if !(value >= 0.0 && value <= 1.0 + 1e-10) {
            return Err(Error::Validation(format!("fidelity {value} outside [0, 1]")));
        }
        Ok(Self(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

fn check_density(rho: &HermitianMat, name: &str) -> Result<()> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: rho.dim() });
    }
    if (rho.trace() - 1.0).abs() > PHYSICAL_TOL || !rho.is_psd(PHYSICAL_TOL) {
        return Err(Error::Validation(format!("{name} is not a qubit density matrix")));
    }
    Ok(())
}

/// Unnormalized qubit fidelity kernel `tr(AB) + 2√(det A · det B)`.
#[inline]
fn fidelity_kernel(a: &HermitianMat, b: &HermitianMat) -> f64 {
    a.trace_product(b) + 2.0 * (a.det2().max(0.0) * b.det2().max(0.0)).sqrt()
}

/// Uhlmann–Jozsa fidelity `(tr√(√ρ σ √ρ))²` of two qubit states, via the
/// closed form `tr(ρσ) + 2√(det ρ · det σ)`.
pub fn state_fidelity(rho: &HermitianMat, sigma: &HermitianMat) -> Result<f64> {
    check_density(rho, "first state")?;
    check_density(sigma, "second state")?;
    Ok(fidelity_kernel(rho, sigma))
}

/// `(1/|X|) Σ_{a,x} √(p*(a|x) p(a|x)) F(ρ*_{a|x}, ρ_{a|x})`, with
/// zero-probability pairs contributing nothing. Only shapes are checked.
pub fn assemblage_fidelity_unchecked(reference: &Assemblage, other: &Assemblage) -> f64 {
    let mut acc = 0.0;
    for x in 0..reference.settings() {
        for a in 0..reference.outcomes() {
            let s_ref = reference.element(a, x);
            let s = other.element(a, x);
            let (p_ref, p) = (s_ref.trace(), s.trace());
            if p_ref < ZERO_PROB || p < ZERO_PROB {
                continue;
            }
            // √(p*p)·F(σ*/p*, σ/p) = kernel(σ*, σ)/√(p*p)
            acc += fidelity_kernel(s_ref, s) / (p_ref * p).sqrt();
        }
    }
    acc / reference.settings() as f64
}

/// Assemblage fidelity between two valid assemblages of equal shape.
pub fn assemblage_fidelity(reference: &Assemblage, other: &Assemblage) -> Result<f64> {
    if !reference.same_shape(other) {
        return Err(Error::Validation(format!(
            "shape mismatch: ({}, {}) vs ({}, {})",
            reference.outcomes(),
            reference.settings(),
            other.outcomes(),
            other.settings()
        )));
    }
    for (name, s) in [("reference", reference), ("other", other)] {
        let report = s.validate(1e-9);
        if !report.passed() {
            return Err(Error::Validation(format!("{name} assemblage invalid: {}", report.violations.join("; "))));
        }
    }
    Ok(assemblage_fidelity_unchecked(reference, other))
}

/// Optimal classical fidelity with the strategy attaining it.
#[derive(Clone, Debug)]
pub struct ClassicalFidelity {
    pub value: FidelityValue,
    pub strategy: ClassicalStrategy,
}

/// All deterministic response functions `λ: x ↦ a`, in mixed-radix order
/// (setting 0 is the most significant digit).
pub fn deterministic_responses(outcomes: usize, settings: usize) -> Vec<Vec<usize>> {
    let count = outcomes.pow(settings as u32);
    (0..count)
        .map(|mut k| {
            let mut resp = vec![0; settings];
            for x in (0..settings).rev() {
                resp[x] = k % outcomes;
                k /= outcomes;
            }
            resp
        })
        .collect()
}

/// The per-`λ` operator `M_λ = (√|A| / (|X|·|Λ|)) Σ_x √p*(λ_x|x) ρ*_{λ_x|x}`,
/// with `|Λ| = |A|^|X|` the number of deterministic responses.
pub fn strategy_operator(reference: &Assemblage, response: &[usize]) -> HermitianMat {
    let outcomes = reference.outcomes();
    let settings = reference.settings();
    let n_lambda = outcomes.pow(settings as u32) as f64;
    let prefactor = (outcomes as f64).sqrt() / (settings as f64 * n_lambda);
    let mut m = HermitianMat::zeros(2);
    for (x, &a) in response.iter().enumerate() {
        let p = reference.prob(a, x);
        // σ*/√p* = √p*·ρ*
        m = m + reference.element(a, x).scale(1.0 / p.sqrt());
    }
    m.scale(prefactor)
}

/// Best fidelity of a classical assemblage with a reference whose conditional
/// states are pure and whose marginals are uniform.
///
/// For each deterministic response `λ` the objective `tr(M_λ ρ_λ)` is linear
/// in the hidden state, so its maximum over density matrices is the top
/// eigenvalue of `M_λ`, attained at the matching eigenprojector.
pub fn classical_fidelity(reference: &Assemblage) -> Result<ClassicalFidelity> {
    let outcomes = reference.outcomes();
    let settings = reference.settings();
    let uniform = 1.0 / outcomes as f64;
    for x in 0..settings {
        for a in 0..outcomes {
            let p = reference.prob(a, x);
            if (p - uniform).abs() > PURITY_TOL {
                return Err(Error::Unsupported(format!(
                    "classical fidelity needs uniform reference marginals; p({a}|{x}) = {p}"
                )));
            }
            let rho = reference.conditional_state(a, x).expect("nonzero probability");
            if rho.min_eigval() > PURITY_TOL {
                return Err(Error::Unsupported(format!("reference state for (a={a}, x={x}) is not pure")));
            }
        }
    }

    let responses = deterministic_responses(outcomes, settings);
    let mut total = 0.0;
    let mut states = Vec::with_capacity(responses.len());
    for resp in &responses {
        let m = strategy_operator(reference, resp);
        let (vals, vecs) = m.eigh();
        total += vals[1];
        states.push(HermitianMat::projector(&vecs[1])?);
    }
    let weights = vec![1.0 / responses.len() as f64; responses.len()];
    let strategy = ClassicalStrategy::new(weights, responses, states)?;
    Ok(ClassicalFidelity { value: FidelityValue::new(total)?, strategy })
}

/// Two equiprobable hidden variables; Alice outputs `a = λ` for both settings
/// and Bob receives `(I ± (Z + X)/√2)/2`.
pub fn appendix_b_strategy() -> ClassicalStrategy {
    let h = 1.0 / SQRT_2;
    ClassicalStrategy::new(
        vec![0.5, 0.5],
        vec![vec![0, 0], vec![1, 1]],
        vec![pauli::bloch_state([h, 0.0, h]), pauli::bloch_state([-h, 0.0, -h])],
    )
    .expect("valid strategy")
}

/// `(2 + √2)/4`, the classical fidelity of the CHSH-type reference.
pub fn chsh_classical_fidelity() -> f64 {
    (2.0 + SQRT_2) / 4.0
}
