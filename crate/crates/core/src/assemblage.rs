//! Assemblages `{σ_{a|x}}` on a qubit, their quantum realizations, and
//! deterministic classical (local-hidden-state) strategies.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkernel::{kron, partial_trace_a, pauli, HermitianMat, Matrix, C64};

/// Below this trace an outcome is treated as never occurring.
pub const ZERO_PROB: f64 = 1e-12;

/// Tolerance for the physical invariants of realizations and strategies.
pub const PHYSICAL_TOL: f64 = 1e-10;

/// A family of subnormalized qubit states `σ_{a|x}`, stored setting-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Assemblage {
    outcomes: usize,
    settings: usize,
    elements: Vec<HermitianMat>,
}

impl Assemblage {
    /// Wraps elements given in setting-major order (`x * outcomes + a`).
    ///
    /// Only the shape is checked; use [`Assemblage::validate`] for the
    /// positivity, no-signaling and normalization conditions.
    pub fn from_elements(outcomes: usize, settings: usize, elements: Vec<HermitianMat>) -> Result<Self> {
        if outcomes == 0 || settings == 0 {
            return Err(Error::Validation("assemblage needs at least one outcome and one setting".into()));
        }
        if elements.len() != outcomes * settings {
            return Err(Error::DimensionMismatch { expected: outcomes * settings, found: elements.len() });
        }
        if let Some(bad) = elements.iter().find(|e| e.dim() != 2) {
            return Err(Error::DimensionMismatch { expected: 2, found: bad.dim() });
        }
        Ok(Self { outcomes, settings, elements })
    }

    /// Builds an assemblage with `f(a, x)` as the element for each pair.
    pub fn from_fn(outcomes: usize, settings: usize, mut f: impl FnMut(usize, usize) -> HermitianMat) -> Result<Self> {
        let mut elements = Vec::with_capacity(outcomes * settings);
        for x in 0..settings {
            for a in 0..outcomes {
                elements.push(f(a, x));
            }
        }
        Self::from_elements(outcomes, settings, elements)
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn settings(&self) -> usize {
        self.settings
    }

    pub fn elements(&self) -> &[HermitianMat] {
        &self.elements
    }

    #[inline]
    pub fn element(&self, a: usize, x: usize) -> &HermitianMat {
        &self.elements[x * self.outcomes + a]
    }

    /// `p(a|x) = tr σ_{a|x}`
    pub fn prob(&self, a: usize, x: usize) -> f64 {
        self.element(a, x).trace()
    }

    /// `ρ_{a|x} = σ_{a|x} / p(a|x)`, or `None` for a zero-probability outcome.
    pub fn conditional_state(&self, a: usize, x: usize) -> Option<HermitianMat> {
        let p = self.prob(a, x);
        (p >= ZERO_PROB).then(|| self.element(a, x).scale(1.0 / p))
    }

    /// Bob's reduced state given setting `x`: `Σ_a σ_{a|x}`.
    pub fn bob_marginal(&self, x: usize) -> HermitianMat {
        (0..self.outcomes).fold(HermitianMat::zeros(2), |acc, a| acc + *self.element(a, x))
    }

    pub fn same_shape(&self, other: &Assemblage) -> bool {
        self.outcomes == other.outcomes && self.settings == other.settings
    }

    /// Applies `f` to every element.
    pub fn map(&self, mut f: impl FnMut(&HermitianMat) -> HermitianMat) -> Assemblage {
        Assemblage {
            outcomes: self.outcomes,
            settings: self.settings,
            elements: self.elements.iter().map(&mut f).collect(),
        }
    }

    /// Convex mixture `w·self + (1 − w)·other`.
    pub fn mix(&self, w: f64, other: &Assemblage) -> Result<Assemblage> {
        if !self.same_shape(other) {
            return Err(Error::Validation("cannot mix assemblages of different shape".into()));
        }
        Ok(Assemblage {
            outcomes: self.outcomes,
            settings: self.settings,
            elements: self
                .elements
                .iter()
                .zip(&other.elements)
                .map(|(s, o)| s.scale(w) + o.scale(1.0 - w))
                .collect(),
        })
    }

    /// Relabels outcomes `a → |A| − 1 − a` for every setting.
    pub fn flip_outcomes(&self) -> Assemblage {
        Assemblage::from_fn(self.outcomes, self.settings, |a, x| *self.element(self.outcomes - 1 - a, x))
            .expect("shape preserved")
    }

    /// Conjugates every element by Bob's unitary `u`.
    pub fn conjugate_by(&self, u: &Matrix) -> Assemblage {
        self.map(|e| e.conjugate_by(u))
    }

    /// Largest `|p(a|x) − 1/|A||` over all pairs.
    pub fn max_marginal_deviation(&self) -> f64 {
        let target = 1.0 / self.outcomes as f64;
        (0..self.settings)
            .flat_map(|x| (0..self.outcomes).map(move |a| (a, x)))
            .map(|(a, x)| (self.prob(a, x) - target).abs())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        validate(self, tol)
    }
}

/// Outcome of [`validate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Smallest eigenvalue over all elements.
    pub psd_margin: f64,
    /// Largest entrywise difference between `Σ_a σ_{a|x}` for different `x`.
    pub no_signaling_deviation: f64,
    /// Largest `|tr Σ_a σ_{a|x} − 1|`.
    pub normalization_deviation: f64,
    pub tol: f64,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate(sigma: &Assemblage, tol: f64) -> ValidationReport {
    let psd_margin = sigma.elements.iter().map(|e| e.min_eigval()).fold(f64::INFINITY, f64::min);
    let marginals: Vec<HermitianMat> = (0..sigma.settings).map(|x| sigma.bob_marginal(x)).collect();
    let no_signaling_deviation = marginals
        .iter()
        .skip(1)
        .map(|m| m.max_abs_diff(&marginals[0]))
        .fold(0.0, f64::max);
    let normalization_deviation = marginals.iter().map(|m| (m.trace() - 1.0).abs()).fold(0.0, f64::max);

    let mut violations = Vec::new();
    if psd_margin < -tol {
        violations.push(format!("element not positive semidefinite (min eigenvalue {psd_margin:.3e})"));
    }
    if no_signaling_deviation > tol {
        violations.push(format!("no-signaling violated (marginal deviation {no_signaling_deviation:.3e})"));
    }
    if normalization_deviation > tol {
        violations.push(format!("normalization violated (trace deviation {normalization_deviation:.3e})"));
    }
    ValidationReport { psd_margin, no_signaling_deviation, normalization_deviation, tol, violations }
}

/// A two-qubit state with a POVM for each of Alice's settings.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumRealization {
    state: HermitianMat,
    alice_povms: Vec<Vec<HermitianMat>>,
}

impl QuantumRealization {
    pub fn new(state: HermitianMat, alice_povms: Vec<Vec<HermitianMat>>) -> Result<Self> {
        if state.dim() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, found: state.dim() });
        }
        if (state.trace() - 1.0).abs() > PHYSICAL_TOL {
            return Err(Error::Validation(format!("state trace is {} (expected 1)", state.trace())));
        }
        if !state.is_psd(PHYSICAL_TOL) {
            return Err(Error::Validation("state is not positive semidefinite".into()));
        }
        if alice_povms.is_empty() {
            return Err(Error::Validation("at least one measurement setting is required".into()));
        }
        let outcomes = alice_povms[0].len();
        for (x, povm) in alice_povms.iter().enumerate() {
            if povm.len() != outcomes || outcomes == 0 {
                return Err(Error::Validation(format!("setting {x} has {} outcomes, expected {outcomes}", povm.len())));
            }
            let mut total = HermitianMat::zeros(2);
            for (a, e) in povm.iter().enumerate() {
                if e.dim() != 2 {
                    return Err(Error::DimensionMismatch { expected: 2, found: e.dim() });
                }
                if !e.is_psd(PHYSICAL_TOL) {
                    return Err(Error::Validation(format!("POVM element M_{{{a}|{x}}} is not positive semidefinite")));
                }
                total = total + *e;
            }
            if total.max_abs_diff(&HermitianMat::identity(2)) > PHYSICAL_TOL {
                return Err(Error::Validation(format!("POVM elements for setting {x} do not sum to the identity")));
            }
        }
        Ok(Self { state, alice_povms })
    }

    pub fn state(&self) -> &HermitianMat {
        &self.state
    }

    pub fn alice_povms(&self) -> &[Vec<HermitianMat>] {
        &self.alice_povms
    }

    /// `tr((M_{a|x} ⊗ I)·ρ_AB)`
    pub fn outcome_probability(&self, a: usize, x: usize) -> f64 {
        let lifted = kron(&self.alice_povms[x][a], &HermitianMat::identity(2)).expect("qubit POVM");
        lifted.trace_product(&self.state)
    }
}

/// `σ_{a|x} = tr_A((M_{a|x} ⊗ I)·ρ_AB)`
pub fn realize(r: &QuantumRealization) -> Result<Assemblage> {
    let outcomes = r.alice_povms[0].len();
    let settings = r.alice_povms.len();
    let id = HermitianMat::identity(2);
    let mut elements = Vec::with_capacity(outcomes * settings);
    for povm in &r.alice_povms {
        for m in povm {
            let lifted = kron(m, &id)?;
            let product = *lifted.matrix() * *r.state.matrix();
            elements.push(partial_trace_a(&HermitianMat::symmetrize(product))?);
        }
    }
    Assemblage::from_elements(outcomes, settings, elements)
}

/// Two-outcome projective measurement along Bloch direction `n`:
/// `{(I + n·σ)/2, (I − n·σ)/2}`.
pub fn projective_pair(n: [f64; 3]) -> Vec<HermitianMat> {
    vec![pauli::bloch_state(n), pauli::bloch_state([-n[0], -n[1], -n[2]])]
}

/// `|φ⁺⟩` with Alice measuring `Z` for `x = 0` and `X` for `x = 1`.
pub fn chsh_realization() -> QuantumRealization {
    QuantumRealization::new(pauli::phi_plus(), vec![projective_pair([0.0, 0.0, 1.0]), projective_pair([1.0, 0.0, 0.0])])
        .expect("valid realization")
}

/// The CHSH-type reference assemblage:
/// `σ_{0|0} = |0⟩⟨0|/2, σ_{1|0} = |1⟩⟨1|/2, σ_{0|1} = |+⟩⟨+|/2, σ_{1|1} = |−⟩⟨−|/2`.
pub fn chsh_reference() -> Assemblage {
    Assemblage::from_elements(
        2,
        2,
        vec![pauli::ket0().scale(0.5), pauli::ket1().scale(0.5), pauli::plus().scale(0.5), pauli::minus().scale(0.5)],
    )
    .expect("fixed shape")
}

/// A local-hidden-state model with deterministic responses.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalStrategy {
    weights: Vec<f64>,
    responses: Vec<Vec<usize>>,
    hidden_states: Vec<HermitianMat>,
}

impl ClassicalStrategy {
    /// `responses[λ][x]` is the outcome Alice outputs for hidden variable `λ`
    /// and setting `x`; `hidden_states[λ]` is the state sent to Bob.
    pub fn new(weights: Vec<f64>, responses: Vec<Vec<usize>>, hidden_states: Vec<HermitianMat>) -> Result<Self> {
        let n = weights.len();
        if n == 0 || responses.len() != n || hidden_states.len() != n {
            return Err(Error::Validation("weights, responses and hidden states must have equal nonzero length".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Validation("hidden-variable weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("hidden-variable weights sum to {total}, expected 1")));
        }
        for (l, rho) in hidden_states.iter().enumerate() {
            if rho.dim() != 2 || (rho.trace() - 1.0).abs() > PHYSICAL_TOL || !rho.is_psd(PHYSICAL_TOL) {
                return Err(Error::Validation(format!("hidden state {l} is not a qubit density matrix")));
            }
        }
        Ok(Self { weights, responses, hidden_states })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn responses(&self) -> &[Vec<usize>] {
        &self.responses
    }

    pub fn hidden_states(&self) -> &[HermitianMat] {
        &self.hidden_states
    }
}

/// `σ_{a|x} = Σ_λ p(λ)·[response(λ, x) = a]·ρ_λ`
pub fn from_classical(s: &ClassicalStrategy, outcomes: usize, settings: usize) -> Result<Assemblage> {
    for (l, resp) in s.responses.iter().enumerate() {
        if resp.len() != settings {
            return Err(Error::Validation(format!("response of λ = {l} covers {} settings, expected {settings}", resp.len())));
        }
        if let Some(&a) = resp.iter().find(|&&a| a >= outcomes) {
            return Err(Error::Validation(format!("response of λ = {l} outputs {a}, out of range")));
        }
    }
    Assemblage::from_fn(outcomes, settings, |a, x| {
        s.weights
            .iter()
            .zip(&s.responses)
            .zip(&s.hidden_states)
            .filter(|((_, resp), _)| resp[x] == a)
            .fold(HermitianMat::zeros(2), |acc, ((&w, _), rho)| acc + rho.scale(w))
    })
}

/// How Alice's random measurements are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasurementKind {
    /// Rank-1 projective pair along a uniformly random Bloch direction.
    Projective,
    /// Random two-outcome POVM `{E, I − E}` with `0 ≤ E ≤ I`.
    Povm,
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-9 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Haar-random pure two-qubit state vector (normalized complex Gaussian).
pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R) -> [C64; 4] {
    loop {
        let mut v = [C64::new(0.0, 0.0); 4];
        for z in v.iter_mut() {
            *z = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-9 {
            v.iter_mut().for_each(|z| *z /= n);
            return v;
        }
    }
}

/// `v·|ψ⟩⟨ψ| + (1 − v)·I/4`
pub fn noisy_pure_state(psi: &[C64; 4], visibility: f64) -> Result<HermitianMat> {
    let pure = HermitianMat::projector(psi)?;
    Ok(pure.scale(visibility) + HermitianMat::identity(4).scale((1.0 - visibility) / 4.0))
}

fn random_povm<R: Rng + ?Sized>(rng: &mut R) -> Vec<HermitianMat> {
    let alpha: f64 = rng.random();
    let radius = alpha.min(1.0 - alpha) * rng.random::<f64>();
    let n = random_unit_vector(rng);
    let e = HermitianMat::from_pauli(alpha, radius * n[0], radius * n[1], radius * n[2]);
    vec![e, HermitianMat::identity(2) - e]
}

/// Random realization: Haar-random pure state mixed with white noise at a
/// uniformly random visibility, two random two-outcome measurements for Alice.
pub fn random_realization<R: Rng + ?Sized>(rng: &mut R, kind: MeasurementKind) -> QuantumRealization {
    let psi = random_pure_state(rng);
    let visibility: f64 = rng.random();
    let state = noisy_pure_state(&psi, visibility).expect("dim 4");
    let povms = (0..2)
        .map(|_| match kind {
            MeasurementKind::Projective => projective_pair(random_unit_vector(rng)),
            MeasurementKind::Povm => random_povm(rng),
        })
        .collect();
    QuantumRealization::new(state, povms).expect("sampled realization is valid")
}

#[derive(Serialize, Deserialize)]
struct ElementJson {
    a: usize,
    x: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct AssemblageJson {
    outcomes: usize,
    settings: usize,
    elements: Vec<ElementJson>,
}

/// Row-major real and imaginary parts of a matrix.
pub(crate) fn split_parts(m: &Matrix) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = m.dim();
    let re = (0..n).map(|i| (0..n).map(|j| m.get(i, j).re).collect()).collect();
    let im = (0..n).map(|i| (0..n).map(|j| m.get(i, j).im).collect()).collect();
    (re, im)
}

pub(crate) fn join_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Matrix> {
    let n = re.len();
    if im.len() != n || re.iter().chain(im).any(|row| row.len() != n) {
        return Err(Error::Validation("real and imaginary parts must be square and of equal size".into()));
    }
    let entries: Vec<C64> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| C64::new(re[i][j], im[i][j])).collect();
    Matrix::from_row_major(n, &entries)
}

impl Serialize for Assemblage {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut elements = Vec::with_capacity(self.elements.len());
        for x in 0..self.settings {
            for a in 0..self.outcomes {
                let (re, im) = split_parts(self.element(a, x).matrix());
                elements.push(ElementJson { a, x, re, im });
            }
        }
        AssemblageJson { outcomes: self.outcomes, settings: self.settings, elements }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Assemblage {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = AssemblageJson::deserialize(deserializer)?;
        let n = raw.outcomes * raw.settings;
        let mut slots: Vec<Option<HermitianMat>> = vec![None; n];
        for e in raw.elements {
            if e.a >= raw.outcomes || e.x >= raw.settings {
                return Err(D::Error::custom(format!("element index (a={}, x={}) out of range", e.a, e.x)));
            }
            let m = join_parts(&e.re, &e.im).map_err(D::Error::custom)?;
            let h = HermitianMat::new(m).map_err(D::Error::custom)?;
            slots[e.x * raw.outcomes + e.a] = Some(h);
        }
        let elements = slots
            .into_iter()
            .enumerate()
            .map(|(k, s)| s.ok_or_else(|| D::Error::custom(format!("missing element {k}"))))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Assemblage::from_elements(raw.outcomes, raw.settings, elements).map_err(D::Error::custom)
    }
}

impl Assemblage {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkernel::pauli;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reference_matches_phi_plus_realization() {
        let realized = realize(&chsh_realization()).unwrap();
        let reference = chsh_reference();
        for (r, e) in realized.elements().iter().zip(reference.elements()) {
            assert!(r.max_abs_diff(e) < 1e-12);
        }
    }

    #[test]
    fn reference_probabilities_and_marginals() {
        let s = chsh_reference();
        assert!((s.prob(0, 0) - 0.5).abs() < 1e-15);
        for x in 0..2 {
            assert!(s.bob_marginal(x).max_abs_diff(&pauli::identity().scale(0.5)) < 1e-15);
            for a in 0..2 {
                assert_eq!(s.prob(a, x), 0.5);
            }
        }
    }

    #[test]
    fn product_state_gives_independent_bob_states() {
        let rho_a = pauli::bloch_state([0.2, 0.1, 0.6]);
        let rho_b = pauli::bloch_state([-0.4, 0.3, 0.0]);
        let state = kron(&rho_a, &rho_b).unwrap();
        let povms = vec![projective_pair([0.0, 0.0, 1.0]), projective_pair([0.6, 0.0, 0.8])];
        let r = QuantumRealization::new(state, povms.clone()).unwrap();
        let s = realize(&r).unwrap();
        for x in 0..2 {
            for a in 0..2 {
                let want = rho_b.scale(povms[x][a].trace_product(&rho_a));
                assert!(s.element(a, x).max_abs_diff(&want) < 1e-14);
            }
        }
    }

    #[test]
    fn maximally_mixed_state_gives_quarter_identity() {
        let r = QuantumRealization::new(
            HermitianMat::identity(4).scale(0.25),
            vec![projective_pair([0.0, 0.0, 1.0]), projective_pair([1.0, 0.0, 0.0])],
        )
        .unwrap();
        let s = realize(&r).unwrap();
        for e in s.elements() {
            assert!(e.max_abs_diff(&pauli::identity().scale(0.25)) < 1e-15);
        }
    }

    #[test]
    fn invalid_realizations_rejected() {
        let good_povm = vec![projective_pair([0.0, 0.0, 1.0])];
        let err = QuantumRealization::new(HermitianMat::identity(4), good_povm.clone()).unwrap_err();
        assert!(err.to_string().contains("trace"));
        let bad_povm = vec![vec![pauli::ket0(), pauli::ket0()]];
        let err = QuantumRealization::new(pauli::phi_plus(), bad_povm).unwrap_err();
        assert!(err.to_string().contains("identity"));
        let neg = vec![vec![pauli::z(), pauli::identity() - pauli::z()]];
        assert!(QuantumRealization::new(pauli::phi_plus(), neg).is_err());
    }

    #[test]
    fn classical_single_hidden_state() {
        let s = ClassicalStrategy::new(vec![1.0], vec![vec![0, 0]], vec![pauli::ket0()]).unwrap();
        let sigma = from_classical(&s, 2, 2).unwrap();
        for x in 0..2 {
            assert_eq!(*sigma.element(0, x), pauli::ket0());
            assert_eq!(*sigma.element(1, x), HermitianMat::zeros(2));
        }
        assert!(sigma.conditional_state(1, 0).is_none());
    }

    #[test]
    fn classical_uniform_over_all_responses() {
        let responses = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
        let s = ClassicalStrategy::new(vec![0.25; 4], responses, vec![pauli::identity().scale(0.5); 4]).unwrap();
        let sigma = from_classical(&s, 2, 2).unwrap();
        for e in sigma.elements() {
            assert!(e.max_abs_diff(&pauli::identity().scale(0.25)) < 1e-15);
        }
    }

    #[test]
    fn classical_strategy_errors() {
        assert!(ClassicalStrategy::new(vec![0.5, 0.4], vec![vec![0], vec![1]], vec![pauli::ket0(); 2]).is_err());
        assert!(ClassicalStrategy::new(vec![1.0], vec![vec![0]], vec![pauli::z()]).is_err());
        let s = ClassicalStrategy::new(vec![1.0], vec![vec![3, 0]], vec![pauli::ket0()]).unwrap();
        assert!(from_classical(&s, 2, 2).is_err());
    }

    #[test]
    fn validate_reports() {
        let ok = chsh_reference().validate(1e-12);
        assert!(ok.passed());
        assert!(ok.no_signaling_deviation < 1e-12 && ok.normalization_deviation < 1e-12);

        let mut els = chsh_reference().elements().to_vec();
        els[0] = els[0].scale(1.1);
        let scaled = Assemblage::from_elements(2, 2, els).unwrap().validate(1e-10);
        assert!(!scaled.passed());
        assert!(scaled.violations.iter().any(|v| v.contains("normalization")));

        // same normalization, different marginals
        let els = vec![pauli::ket0(), HermitianMat::zeros(2), pauli::ket1(), HermitianMat::zeros(2)];
        let signaling = Assemblage::from_elements(2, 2, els).unwrap().validate(1e-10);
        assert!(signaling.violations.iter().any(|v| v.contains("no-signaling")));
        assert!(signaling.normalization_deviation < 1e-15);
    }

    #[test]
    fn shape_errors() {
        assert!(Assemblage::from_elements(2, 2, vec![pauli::ket0()]).is_err());
        assert!(Assemblage::from_elements(1, 1, vec![HermitianMat::identity(4)]).is_err());
        assert!(chsh_reference().mix(0.5, &Assemblage::from_elements(1, 1, vec![pauli::ket0()]).unwrap()).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = realize(&random_realization(&mut rng, MeasurementKind::Povm)).unwrap();
        let back = Assemblage::from_json(&s.to_json().unwrap()).unwrap();
        for (a, b) in s.elements().iter().zip(back.elements()) {
            assert!(a.max_abs_diff(b) < 1e-12);
        }
        let text = chsh_reference().to_json().unwrap();
        assert!(text.contains("\"outcomes\": 2"));
        assert!(Assemblage::from_json(r#"{"outcomes":1,"settings":1,"elements":[]}"#).is_err());
    }

    #[test]
    fn random_realizations_yield_valid_assemblages() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for i in 0..200 {
            let kind = if i % 2 == 0 { MeasurementKind::Projective } else { MeasurementKind::Povm };
            let r = random_realization(&mut rng, kind);
            let s = realize(&r).unwrap();
            let report = s.validate(1e-9);
            assert!(report.passed(), "{report:?}");
            for x in 0..2 {
                for a in 0..2 {
                    assert!((s.prob(a, x) - r.outcome_probability(a, x)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn random_classical_strategies_yield_valid_assemblages() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let n = rng.random_range(1..6);
            let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let drift: f64 = 1.0 - weights.iter().sum::<f64>();
            weights[0] += drift;
            let responses = (0..n).map(|_| vec![rng.random_range(0..2), rng.random_range(0..2)]).collect();
            let states = (0..n)
                .map(|_| {
                    let v = random_unit_vector(&mut rng);
                    let r: f64 = rng.random();
                    pauli::bloch_state([r * v[0], r * v[1], r * v[2]])
                })
                .collect();
            let s = ClassicalStrategy::new(weights, responses, states).unwrap();
            assert!(from_classical(&s, 2, 2).unwrap().validate(1e-10).passed());
        }
    }
}
