use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use steerbound::assemblage as asm;
use steerbound::numsearch::{self, ChannelFamily, SearchConfig};
use steerbound::selftest::{self, TRule};
use steerbound::{fidelity, steering, BoundCoefficients, HermitianMat, Matrix, C64};

fn to_py_err(e: steerbound::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix_rows(h: &HermitianMat) -> Vec<Vec<C64>> {
    (0..h.dim()).map(|i| (0..h.dim()).map(|j| h.get(i, j)).collect()).collect()
}

fn parse_family(name: &str) -> PyResult<ChannelFamily> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown channel family `{name}`")))
}

/// A qubit steering assemblage `σ_{a|x}`.
#[pyclass(name = "Assemblage", module = "steerbound_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyAssemblage {
    inner: asm::Assemblage,
}

#[pymethods]
impl PyAssemblage {
    /// Builds from 2x2 complex matrices listed setting-major (`x` outer, `a` inner).
    #[new]
    fn new(outcomes: usize, settings: usize, elements: Vec<Vec<Vec<C64>>>) -> PyResult<Self> {
        let mut mats = Vec::with_capacity(elements.len());
        for rows in elements {
            if rows.len() != 2 || rows.iter().any(|r| r.len() != 2) {
                return Err(PyValueError::new_err("each element must be a 2x2 matrix"));
            }
            let m = Matrix::mat2(rows[0][0], rows[0][1], rows[1][0], rows[1][1]);
            mats.push(HermitianMat::new(m).map_err(to_py_err)?);
        }
        let inner = asm::Assemblage::from_elements(outcomes, settings, mats).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn chsh_reference() -> Self {
        Self { inner: asm::chsh_reference() }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        asm::Assemblage::from_json(text).map(|inner| Self { inner }).map_err(to_py_err)
    }

    /// Assemblage of a two-qubit state (4x4 density matrix) under projective
    /// measurements along the given Bloch axes.
    #[staticmethod]
    fn realize(state: Vec<Vec<C64>>, axes: Vec<[f64; 3]>) -> PyResult<Self> {
        if state.len() != 4 || state.iter().any(|r| r.len() != 4) {
            return Err(PyValueError::new_err("state must be a 4x4 matrix"));
        }
        let entries: Vec<C64> = state.into_iter().flatten().collect();
        let rho = Matrix::from_row_major(4, &entries).and_then(HermitianMat::new).map_err(to_py_err)?;
        let povms = axes.into_iter().map(asm::projective_pair).collect();
        let r = asm::QuantumRealization::new(rho, povms).map_err(to_py_err)?;
        asm::realize(&r).map(|inner| Self { inner }).map_err(to_py_err)
    }

    /// A random valid quantum assemblage from a seeded generator.
    #[staticmethod]
    #[pyo3(signature = (seed, uniform_marginals = true))]
    fn sample(seed: u64, uniform_marginals: bool) -> Self {
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Self { inner: numsearch::sample_assemblage(&mut rng, uniform_marginals) }
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py_err)
    }

    #[getter]
    fn outcomes(&self) -> usize {
        self.inner.outcomes()
    }

    #[getter]
    fn settings(&self) -> usize {
        self.inner.settings()
    }

    fn element(&self, a: usize, x: usize) -> PyResult<Vec<Vec<C64>>> {
        if a >= self.inner.outcomes() || x >= self.inner.settings() {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(matrix_rows(self.inner.element(a, x)))
    }

    fn prob(&self, a: usize, x: usize) -> PyResult<f64> {
        if a >= self.inner.outcomes() || x >= self.inner.settings() {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.inner.prob(a, x))
    }

    /// `True` when positivity, no-signaling and normalization hold within `tol`.
    #[pyo3(signature = (tol = 1e-9))]
    fn is_valid(&self, tol: f64) -> bool {
        self.inner.validate(tol).passed()
    }

    fn chsh_value(&self, theta: f64) -> PyResult<f64> {
        let obs = steering::BobObservables::new(theta).map_err(to_py_err)?;
        steering::chsh_functional(&self.inner, &obs).map_err(to_py_err)
    }

    /// Fidelity with respect to `reference` (this assemblage is the candidate).
    fn fidelity_to(&self, reference: &PyAssemblage) -> PyResult<f64> {
        fidelity::assemblage_fidelity(&reference.inner, &self.inner).map_err(to_py_err)
    }

    fn uniformize(&self) -> Self {
        Self { inner: numsearch::uniformize(&self.inner) }
    }

    fn __repr__(&self) -> String {
        format!("Assemblage(outcomes={}, settings={})", self.inner.outcomes(), self.inner.settings())
    }
}

#[pyfunction]
fn analytic_bound(beta: f64) -> f64 {
    selftest::analytic_bound(beta)
}

#[pyfunction]
fn upper_bound(beta: f64) -> f64 {
    selftest::chsh_upper_bound(beta)
}

/// CHSH value above which the analytic bound beats the classical fidelity.
#[pyfunction]
fn threshold() -> PyResult<f64> {
    selftest::threshold(&BoundCoefficients::optimal(), fidelity::chsh_classical_fidelity()).map_err(to_py_err)
}

/// `(value, weights, responses)` of the optimal classical strategy.
#[pyfunction]
fn classical_fidelity(reference: &PyAssemblage) -> PyResult<(f64, Vec<f64>, Vec<Vec<usize>>)> {
    let cf = fidelity::classical_fidelity(&reference.inner).map_err(to_py_err)?;
    Ok((cf.value.value(), cf.strategy.weights().to_vec(), cf.strategy.responses().to_vec()))
}

/// `(s, t0, t1, t)` of the optimal bound.
#[pyfunction]
fn optimal_coefficients() -> (f64, f64, f64, f64) {
    let c = BoundCoefficients::optimal();
    (c.s, c.t0, c.t1, c.t)
}

#[pyfunction]
#[pyo3(signature = (s_points = 512, theta_points = 10_000))]
fn coefficient_search(py: Python<'_>, s_points: usize, theta_points: usize) -> PyResult<(f64, f64, f64, f64)> {
    if s_points < 2 {
        return Err(PyValueError::new_err("s_points must be at least 2"));
    }
    let grid: Vec<f64> = (0..s_points).map(|i| i as f64 / (s_points - 1) as f64).collect();
    let c = py.detach(|| selftest::coefficient_search(&grid, theta_points)).map_err(to_py_err)?;
    Ok((c.s, c.t0, c.t1, c.t))
}

/// `(worst_margin, worst_theta, failing_thetas)` of the operator-inequality sweep.
#[pyfunction]
#[pyo3(signature = (s = None, theta_points = 10_000, fixed_t = None, tol = 1e-10))]
fn verify_inequality(
    s: Option<f64>,
    theta_points: usize,
    fixed_t: Option<(f64, f64)>,
    tol: f64,
) -> PyResult<(f64, f64, Vec<f64>)> {
    let s = s.unwrap_or(BoundCoefficients::optimal().s);
    let rule = match fixed_t {
        Some((t0, t1)) => TRule::Fixed(t0, t1),
        None => TRule::Constraints,
    };
    let m = selftest::margin_sweep(s, rule, theta_points, tol).map_err(to_py_err)?;
    Ok((m.worst_margin, m.worst_theta, m.failing_thetas))
}

/// `(beta, witness_fidelity, lower_bound)` of the analytic certificate at `theta`.
#[pyfunction]
#[pyo3(signature = (sigma, theta, allow_nonuniform = false))]
fn certify(sigma: &PyAssemblage, theta: f64, allow_nonuniform: bool) -> PyResult<(f64, f64, f64)> {
    let c = selftest::certify(&sigma.inner, theta, &BoundCoefficients::optimal(), allow_nonuniform).map_err(to_py_err)?;
    Ok((c.beta, c.witness_fidelity, c.lower_bound))
}

/// `(fidelity, channel_json)` of the best channel found in `family`.
#[pyfunction]
#[pyo3(signature = (sigma, theta, family = "unitary-pre-post-dephasing", rounds = 3))]
fn best_channel(sigma: &PyAssemblage, theta: f64, family: &str, rounds: usize) -> PyResult<(f64, String)> {
    let fam = parse_family(family)?;
    let b = numsearch::best_channel(&sigma.inner, theta, fam, rounds);
    let json = serde_json::to_string(&b.params).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((b.fidelity, json))
}

/// Runs the numerical sandwich sweep; takes and returns JSON.
#[pyfunction]
fn sandwich(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg = SearchConfig::from_json(config_json).map_err(to_py_err)?;
    let report = py.detach(|| numsearch::sandwich_sweep(&cfg)).map_err(to_py_err)?;
    report.to_json().map_err(to_py_err)
}

#[pymodule]
fn steerbound_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAssemblage>()?;
    m.add_function(wrap_pyfunction!(analytic_bound, m)?)?;
    m.add_function(wrap_pyfunction!(upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(threshold, m)?)?;
    m.add_function(wrap_pyfunction!(classical_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(coefficient_search, m)?)?;
    m.add_function(wrap_pyfunction!(verify_inequality, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(best_channel, m)?)?;
    m.add_function(wrap_pyfunction!(sandwich, m)?)?;
    m.add("CHSH_CLASSICAL_BOUND", steering::CHSH_CLASSICAL_BOUND)?;
    m.add("CHSH_QUANTUM_BOUND", steering::CHSH_QUANTUM_BOUND)?;
    Ok(())
}
