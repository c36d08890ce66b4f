//! Numerical cross-check of the analytic bound.
//!
//! The robust self-testing figure of merit is a min-max: the smallest, over
//! assemblages reaching a CHSH value `β`, of the best extraction fidelity over
//! channels. Here the inner maximum is a coordinate ascent over a small
//! parametrized channel family and the outer minimum is a pattern search over
//! qubit assemblages and Bob's angle. Both are heuristics, so a record only
//! ever says that no assemblage below the analytic bound was found.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assemblage::{chsh_reference, random_realization, realize, Assemblage, MeasurementKind};
use crate::error::{Error, Result};
use crate::fidelity::{appendix_b_strategy, assemblage_fidelity_unchecked};
use crate::linesearch::golden_section_max;
use crate::matkernel::{pauli, HermitianMat, Matrix, C64};
use crate::output::{format_sig, write_atomic};
use crate::selftest::{analytic_bound, chsh_upper_bound, dephasing_axis, dephasing_strength, in_first_interval, BoundCoefficients, QubitChannel};
use crate::steering::{chsh_value, CHSH_CLASSICAL_BOUND, CHSH_QUANTUM_BOUND};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelFamily {
    /// `(1+c)/2·ρ + (1−c)/2·ΓρΓ` with `Γ = Γ(θ)`.
    DephasingOnly,
    /// `V·D_c(UρU†)·V†` with `D_c` the `Z`-dephasing, `U = R_z(α)R_y(φ)`, `V = R_y(ψ)`.
    UnitaryPrePostDephasing,
    /// Two arbitrary Kraus operators, normalized to be trace preserving.
    GeneralTwoKraus,
}

impl ChannelFamily {
    fn bounds(self) -> Vec<(f64, f64)> {
        match self {
            ChannelFamily::DephasingOnly => vec![(-1.0, 1.0)],
            ChannelFamily::UnitaryPrePostDephasing => vec![(-1.0, 1.0), (-PI, PI), (-PI, PI), (-PI, PI)],
            ChannelFamily::GeneralTwoKraus => vec![(-1.5, 1.5); 16],
        }
    }
}

/// A point in one of the channel families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ChannelParams {
    DephasingOnly { c: f64 },
    UnitaryPrePostDephasing { c: f64, pre_z: f64, pre_y: f64, post_y: f64 },
    /// Row-major `(re, im)` pairs of the two unnormalized Kraus operators.
    GeneralTwoKraus { k0: [f64; 8], k1: [f64; 8] },
}

/// A qubit channel given by Kraus operators, `ρ ↦ Σ K ρ K†`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    ops: Vec<Matrix>,
}

impl KrausChannel {
    pub fn ops(&self) -> &[Matrix] {
        &self.ops
    }

    /// `Σ K†K`, the identity for a trace-preserving channel.
    pub fn completeness(&self) -> Matrix {
        self.ops.iter().fold(Matrix::zeros(2), |acc, k| acc + k.adjoint() * *k)
    }
}

impl QubitChannel for KrausChannel {
    fn apply(&self, rho: &HermitianMat) -> HermitianMat {
        let m = self.ops.iter().fold(Matrix::zeros(2), |acc, k| acc + rho.matrix().conjugate_by(k));
        HermitianMat::symmetrize(m)
    }
}

fn y_rot(angle: f64) -> Matrix {
    pauli::rotation([0.0, 1.0, 0.0], angle)
}

fn z_rot(angle: f64) -> Matrix {
    pauli::rotation([0.0, 0.0, 1.0], angle)
}

fn encode(m: &Matrix) -> [f64; 8] {
    let mut out = [0.0; 8];
    for i in 0..2 {
        for j in 0..2 {
            let z = m.get(i, j);
            out[4 * i + 2 * j] = z.re;
            out[4 * i + 2 * j + 1] = z.im;
        }
    }
    out
}

fn decode(v: &[f64]) -> Matrix {
    Matrix::mat2(C64::new(v[0], v[1]), C64::new(v[2], v[3]), C64::new(v[4], v[5]), C64::new(v[6], v[7]))
}

/// `S^{-1/2}` of a positive definite 2×2 matrix, `None` when near singular.
fn inverse_sqrt(s: &Matrix) -> Option<Matrix> {
    let h = HermitianMat::symmetrize(*s);
    let (vals, vecs) = h.eigh();
    if vals[0] < 1e-10 {
        return None;
    }
    let mut out = Matrix::zeros(2);
    for (l, v) in vals.iter().zip(&vecs) {
        out = out + Matrix::outer(v).expect("dim 2").scale(1.0 / l.sqrt());
    }
    Some(out)
}

impl ChannelParams {
    pub fn family(&self) -> ChannelFamily {
        match self {
            ChannelParams::DephasingOnly { .. } => ChannelFamily::DephasingOnly,
            ChannelParams::UnitaryPrePostDephasing { .. } => ChannelFamily::UnitaryPrePostDephasing,
            ChannelParams::GeneralTwoKraus { .. } => ChannelFamily::GeneralTwoKraus,
        }
    }

    pub fn identity(family: ChannelFamily) -> Self {
        match family {
            ChannelFamily::DephasingOnly => ChannelParams::DephasingOnly { c: 1.0 },
            ChannelFamily::UnitaryPrePostDephasing => {
                ChannelParams::UnitaryPrePostDephasing { c: 1.0, pre_z: 0.0, pre_y: 0.0, post_y: 0.0 }
            }
            ChannelFamily::GeneralTwoKraus => {
                ChannelParams::GeneralTwoKraus { k0: encode(&Matrix::identity(2)), k1: [0.0; 8] }
            }
        }
    }

    /// The dephasing channel `Λ_θ` with `c = c(θ)` for slope `s`, expressed in `family`.
    pub fn dephasing_at(family: ChannelFamily, theta: f64, c: f64) -> Self {
        ChannelParams::DephasingOnly { c }.embed(family, theta)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            ChannelParams::DephasingOnly { c } => vec![*c],
            ChannelParams::UnitaryPrePostDephasing { c, pre_z, pre_y, post_y } => vec![*c, *pre_z, *pre_y, *post_y],
            ChannelParams::GeneralTwoKraus { k0, k1 } => k0.iter().chain(k1).copied().collect(),
        }
    }

    pub fn from_vec(family: ChannelFamily, v: &[f64]) -> Self {
        match family {
            ChannelFamily::DephasingOnly => ChannelParams::DephasingOnly { c: v[0] },
            ChannelFamily::UnitaryPrePostDephasing => {
                ChannelParams::UnitaryPrePostDephasing { c: v[0], pre_z: v[1], pre_y: v[2], post_y: v[3] }
            }
            ChannelFamily::GeneralTwoKraus => {
                let mut k0 = [0.0; 8];
                let mut k1 = [0.0; 8];
                k0.copy_from_slice(&v[..8]);
                k1.copy_from_slice(&v[8..16]);
                ChannelParams::GeneralTwoKraus { k0, k1 }
            }
        }
    }

    /// Re-expresses this channel in a family that contains it. Families nest as
    /// dephasing-only ⊂ unitary-pre-post-dephasing ⊂ general-two-kraus;
    /// embedding into a smaller family returns the target family's identity.
    pub fn embed(&self, target: ChannelFamily, theta: f64) -> Self {
        use ChannelFamily::*;
        match (self, target) {
            (p, t) if p.family() == t => p.clone(),
            (ChannelParams::DephasingOnly { c }, UnitaryPrePostDephasing) => {
                if in_first_interval(theta) {
                    ChannelParams::UnitaryPrePostDephasing { c: *c, pre_z: 0.0, pre_y: 0.0, post_y: 0.0 }
                } else {
                    ChannelParams::UnitaryPrePostDephasing { c: *c, pre_z: 0.0, pre_y: -FRAC_PI_2, post_y: FRAC_PI_2 }
                }
            }
            (ChannelParams::DephasingOnly { .. }, GeneralTwoKraus) => {
                self.embed(UnitaryPrePostDephasing, theta).embed(GeneralTwoKraus, theta)
            }
            (ChannelParams::UnitaryPrePostDephasing { c, pre_z, pre_y, post_y }, GeneralTwoKraus) => {
                let u = z_rot(*pre_z) * y_rot(*pre_y);
                let v = y_rot(*post_y);
                let z: Matrix = pauli::z().into();
                let k0 = (v * u).scale((0.5 * (1.0 + c)).sqrt());
                let k1 = (v * z * u).scale((0.5 * (1.0 - c)).max(0.0).sqrt());
                ChannelParams::GeneralTwoKraus { k0: encode(&k0), k1: encode(&k1) }
            }
            (_, t) => ChannelParams::identity(t),
        }
    }

    /// Kraus form of the channel at Bob's angle `theta`; `None` for a general
    /// pair whose completeness matrix is singular.
    pub fn channel(&self, theta: f64) -> Option<KrausChannel> {
        match self {
            ChannelParams::DephasingOnly { c } => {
                let c = c.clamp(-1.0, 1.0);
                let gamma: Matrix = dephasing_axis(theta).into();
                Some(KrausChannel {
                    ops: vec![Matrix::identity(2).scale((0.5 * (1.0 + c)).sqrt()), gamma.scale((0.5 * (1.0 - c)).sqrt())],
                })
            }
            ChannelParams::UnitaryPrePostDephasing { c, pre_z, pre_y, post_y } => {
                let c = c.clamp(-1.0, 1.0);
                let u = z_rot(*pre_z) * y_rot(*pre_y);
                let v = y_rot(*post_y);
                let z: Matrix = pauli::z().into();
                Some(KrausChannel {
                    ops: vec![(v * u).scale((0.5 * (1.0 + c)).sqrt()), (v * z * u).scale((0.5 * (1.0 - c)).sqrt())],
                })
            }
            ChannelParams::GeneralTwoKraus { k0, k1 } => {
                let a = decode(k0);
                let b = decode(k1);
                let s = a.adjoint() * a + b.adjoint() * b;
                let norm = inverse_sqrt(&s)?;
                Some(KrausChannel { ops: vec![a * norm, b * norm] })
            }
        }
    }
}

/// Fidelity of `Λ(Σ)` with the CHSH reference, `−∞` for an invalid channel.
fn channel_fidelity(reference: &Assemblage, sigma: &Assemblage, params: &ChannelParams, theta: f64) -> f64 {
    match params.channel(theta) {
        Some(ch) => assemblage_fidelity_unchecked(reference, &ch.apply_to_assemblage(sigma)),
        None => f64::NEG_INFINITY,
    }
}

/// Cyclic coordinate ascent with a golden-section line search per coordinate.
///
/// Each coordinate is searched on its full range and on a local window that
/// halves every round; a move is taken only if it improves the objective, so
/// the per-round history is nondecreasing.
pub fn coordinate_ascent<F>(f: F, x0: &[f64], bounds: &[(f64, f64)], rounds: usize, xtol: f64) -> (Vec<f64>, f64, Vec<f64>)
where
    F: Fn(&[f64]) -> f64,
{
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut history = Vec::with_capacity(rounds);
    let mut probe = x.clone();
    for round in 0..rounds {
        for i in 0..x.len() {
            let (lo, hi) = bounds[i];
            let window = 0.25 * (hi - lo) * 0.5f64.powi(round as i32);
            let local = ((x[i] - window).max(lo), (x[i] + window).min(hi));
            for (a, b) in [(lo, hi), local] {
                probe.copy_from_slice(&x);
                let (xi, val) = golden_section_max(
                    |t| {
                        probe[i] = t;
                        f(&probe)
                    },
                    a,
                    b,
                    xtol,
                    200,
                );
                if val > fx {
                    x[i] = xi;
                    fx = val;
                }
            }
        }
        history.push(fx);
    }
    (x, fx, history)
}

/// Best channel found for one assemblage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestChannel {
    pub params: ChannelParams,
    pub fidelity: f64,
    /// Best fidelity after each round.
    pub history: Vec<f64>,
}

const INNER_XTOL: f64 = 1e-7;

/// The identity and the three Pauli conjugations, expressed in `family`
/// (only the identity for the dephasing-only family).
pub fn frame_starts(family: ChannelFamily) -> Vec<ChannelParams> {
    let frames = [(0.0, 0.0, 0.0), (PI, -FRAC_PI_2, FRAC_PI_2), (0.0, PI, 0.0), (PI, 0.0, 0.0)];
    match family {
        ChannelFamily::DephasingOnly => vec![ChannelParams::identity(family)],
        _ => frames
            .iter()
            .map(|&(pre_z, pre_y, post_y)| {
                ChannelParams::UnitaryPrePostDephasing { c: 1.0, pre_z, pre_y, post_y }.embed(family, 0.0)
            })
            .collect(),
    }
}

fn best_start<'a>(reference: &Assemblage, sigma: &Assemblage, theta: f64, starts: &'a [ChannelParams]) -> &'a ChannelParams {
    starts
        .iter()
        .map(|p| (p, channel_fidelity(reference, sigma, p, theta)))
        .fold(None, |acc: Option<(&ChannelParams, f64)>, (p, f)| match acc {
            Some((_, g)) if g >= f => acc,
            _ => Some((p, f)),
        })
        .expect("nonempty starts")
        .0
}

/// Maximizes the extraction fidelity over `family`, starting from the best of
/// the identity and the Pauli frames.
pub fn best_channel(sigma: &Assemblage, theta: f64, family: ChannelFamily, rounds: usize) -> BestChannel {
    let starts = frame_starts(family);
    let start = best_start(&chsh_reference(), sigma, theta, &starts);
    best_channel_from(sigma, theta, start, rounds)
}

/// As [`best_channel`] but warm-started at `start` (whose family is searched).
pub fn best_channel_from(sigma: &Assemblage, theta: f64, start: &ChannelParams, rounds: usize) -> BestChannel {
    let reference = chsh_reference();
    let family = start.family();
    let objective = |v: &[f64]| channel_fidelity(&reference, sigma, &ChannelParams::from_vec(family, v), theta);
    let (x, fidelity, history) = coordinate_ascent(objective, &start.to_vec(), &family.bounds(), rounds.max(1), INNER_XTOL);
    BestChannel { params: ChannelParams::from_vec(family, &x), fidelity, history }
}

/// Inner maximization used by the outer search: as [`best_channel`] with the
/// analytic channel `Λ_θ` added to the starts.
fn inner_max(sigma: &Assemblage, theta: f64, family: ChannelFamily, rounds: usize, s: f64) -> BestChannel {
    let mut starts = frame_starts(family);
    starts.push(ChannelParams::dephasing_at(family, theta, dephasing_strength(s, theta)));
    let start = best_start(&chsh_reference(), sigma, theta, &starts);
    best_channel_from(sigma, theta, start, rounds)
}

/// Averages an assemblage with its outcome-flipped, `Y`-conjugated copy.
///
/// The result has `p(a|x) = 1/2`, the same CHSH value at every `θ`, and the
/// CHSH reference is a fixed point.
pub fn uniformize(sigma: &Assemblage) -> Assemblage {
    let partner = sigma.flip_outcomes().conjugate_by(pauli::y().matrix());
    sigma.mix(0.5, &partner).expect("same shape")
}

/// A random valid quantum assemblage (projective measurements on a noisy
/// Haar-random state), optionally uniformized.
pub fn sample_assemblage<R: Rng + ?Sized>(rng: &mut R, uniform_marginals: bool) -> Assemblage {
    let sigma = realize(&random_realization(rng, MeasurementKind::Projective)).expect("valid realization");
    if uniform_marginals {
        uniformize(&sigma)
    } else {
        sigma
    }
}

/// Search configuration, read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Restarts per target.
    pub samples: usize,
    pub beta_targets: Vec<f64>,
    #[serde(default = "default_family")]
    pub channel_family: ChannelFamily,
    /// Coordinate-ascent rounds of the inner channel search.
    pub seesaw_rounds: usize,
    pub rng_seed: u64,
    pub tolerance: f64,
    /// Outer pattern search stops once its step falls below this.
    #[serde(default = "default_min_step")]
    pub min_step: f64,
    /// Cap on objective evaluations per restart and penalty level.
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    #[serde(default = "default_escalations")]
    pub penalty_escalations: usize,
    /// Pins Bob's angle instead of minimizing over it.
    #[serde(default)]
    pub fixed_theta: Option<f64>,
}

fn default_family() -> ChannelFamily {
    ChannelFamily::UnitaryPrePostDephasing
}
fn default_min_step() -> f64 {
    1e-4
}
fn default_max_evals() -> usize {
    3000
}
fn default_escalations() -> usize {
    8
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            samples: 20,
            beta_targets: vec![2.1, 2.34, 2.5, 2.7, CHSH_QUANTUM_BOUND],
            channel_family: default_family(),
            seesaw_rounds: 2,
            rng_seed: 2024,
            tolerance: 1e-4,
            min_step: default_min_step(),
            max_evals: default_max_evals(),
            penalty_escalations: default_escalations(),
            fixed_theta: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 1 {
            return Err(Error::Validation("samples must be at least 1".into()));
        }
        if self.seesaw_rounds < 1 {
            return Err(Error::Validation("seesaw_rounds must be at least 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::Validation("tolerance must be nonnegative".into()));
        }
        if let Some(t) = self.fixed_theta {
            if !(0.0..=FRAC_PI_2).contains(&t) {
                return Err(Error::Validation(format!("fixed_theta = {t} outside [0, pi/2]")));
            }
        }
        if !(self.min_step > 0.0) {
            return Err(Error::Validation("min_step must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: SearchConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Where the outer search ended for one target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub assemblage: Assemblage,
    pub theta: f64,
    /// CHSH value of the witness at `theta`.
    pub beta: f64,
    pub channel: ChannelParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichRecord {
    pub beta: f64,
    /// Lowest inner maximum found: an upper estimate of the true minimum.
    pub numeric_min: f64,
    pub analytic_lower: f64,
    pub eq8_upper: f64,
    /// `|I(witness) − β|`
    pub residual: f64,
    pub restarts_used: usize,
    pub passed: bool,
    pub witness: Witness,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub config: SearchConfig,
    pub records: Vec<SandwichRecord>,
    pub passed: bool,
}

impl SandwichReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["beta", "numeric_min", "analytic_lower", "eq8_upper", "residual", "restarts_used"])?;
        for r in &self.records {
            w.write_record([
                format_sig(r.beta, 9),
                format_sig(r.numeric_min, 9),
                format_sig(r.analytic_lower, 9),
                format_sig(r.eq8_upper, 9),
                format_sig(r.residual, 9),
                r.restarts_used.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("ascii csv"))
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        write_atomic(path, self.to_csv()?.as_bytes())
    }
}

/// Outer search coordinates: Bob's Bloch vector (3), then for each setting a
/// POVM weight and direction (1 + 3), then `θ`.
const OUTER_DIM: usize = 12;

fn clamp_ball(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n > 1.0 {
        [v[0] / n, v[1] / n, v[2] / n]
    } else {
        v
    }
}

fn outer_bounds() -> [(f64, f64); OUTER_DIM] {
    let mut b = [(-1.0, 1.0); OUTER_DIM];
    b[3] = (0.0, 1.0);
    b[7] = (0.0, 1.0);
    b[11] = (0.0, FRAC_PI_2);
    b
}

/// Decodes outer coordinates into a uniform-marginal assemblage and `θ`.
///
/// `σ_{0|x} = √ρ_B E_x √ρ_B`, `σ_{1|x} = ρ_B − σ_{0|x}` covers every
/// no-signaling qubit assemblage; [`uniformize`] then fixes the marginals.
fn decode_assemblage(p: &[f64]) -> (Assemblage, f64) {
    let rho = pauli::bloch_state(clamp_ball([p[0], p[1], p[2]]));
    let root = rho.sqrt_psd2();
    let povm = |alpha: f64, dir: [f64; 3]| {
        let alpha = alpha.clamp(0.0, 1.0);
        let r = alpha.min(1.0 - alpha);
        let u = clamp_ball(dir);
        HermitianMat::from_pauli(alpha, r * u[0], r * u[1], r * u[2])
    };
    let effects = [povm(p[3], [p[4], p[5], p[6]]), povm(p[7], [p[8], p[9], p[10]])];
    let sigma = Assemblage::from_fn(2, 2, |a, x| {
        let s0 = HermitianMat::symmetrize(*root.matrix() * *effects[x].matrix() * *root.matrix());
        if a == 0 {
            s0
        } else {
            rho - s0
        }
    })
    .expect("2x2 shape");
    (uniformize(&sigma), p[11].clamp(0.0, FRAC_PI_2))
}

/// Coordinates of `q·Σ* + (1 − q)·Σ_C` at `θ = π/4`, where `Σ_C` is the
/// classical assemblage attaining the classical fidelity.
fn mixture_start(q: f64) -> [f64; OUTER_DIM] {
    let h = 1.0 / SQRT_2;
    let d0 = [(1.0 - q) * h, 0.0, q + (1.0 - q) * h];
    let d1 = [q + (1.0 - q) * h, 0.0, (1.0 - q) * h];
    [0.0, 0.0, 0.0, 0.5, d0[0], d0[1], d0[2], 0.5, d1[0], d1[1], d1[2], FRAC_PI_4]
}

fn random_start<R: Rng + ?Sized>(rng: &mut R) -> [f64; OUTER_DIM] {
    let mut p = [0.0; OUTER_DIM];
    for (v, (lo, hi)) in p.iter_mut().zip(outer_bounds()) {
        *v = rng.random_range(lo..hi);
    }
    p
}

/// The white-noise assemblage `σ_{a|x} = I/4`.
fn white_noise() -> Assemblage {
    Assemblage::from_fn(2, 2, |_, _| pauli::identity().scale(0.25)).expect("2x2 shape")
}

struct Candidate {
    sigma: Assemblage,
    theta: f64,
    /// `max(0, β − I(Σ, θ))`
    shortfall: f64,
}

/// Maps outer coordinates to a candidate at CHSH value `β`: overshooting
/// assemblages are mixed with white noise down to `β` exactly, undershooting
/// ones are kept and penalized.
fn candidate(p: &[f64], beta: f64, fixed_theta: Option<f64>) -> Candidate {
    let (sigma, theta) = decode_assemblage(p);
    let theta = fixed_theta.unwrap_or(theta);
    let value = chsh_value(&sigma, theta);
    if value >= beta && value > 0.0 {
        let q = beta / value;
        let sigma = sigma.mix(q, &white_noise()).expect("same shape");
        Candidate { sigma, theta, shortfall: 0.0 }
    } else {
        Candidate { sigma, theta, shortfall: beta - value }
    }
}

/// Pattern search: try `±step` along each coordinate, take the first
/// improvement, halve the step after a full sweep without one.
fn pattern_search<F>(f: F, x0: &[f64; OUTER_DIM], step0: f64, min_step: f64, max_evals: usize) -> ([f64; OUTER_DIM], f64)
where
    F: Fn(&[f64]) -> f64,
{
    let bounds = outer_bounds();
    let mut x = *x0;
    let mut fx = f(&x);
    let mut step = step0;
    let mut evals = 1;
    while step >= min_step && evals < max_evals {
        let mut improved = false;
        'sweep: for i in 0..OUTER_DIM {
            for dir in [1.0, -1.0] {
                let mut y = x;
                y[i] = (y[i] + dir * step).clamp(bounds[i].0, bounds[i].1);
                if y[i] == x[i] {
                    continue;
                }
                let fy = f(&y);
                evals += 1;
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                    break 'sweep;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}

struct RestartOutcome {
    value: f64,
    residual: f64,
    witness: Witness,
}

fn run_restart(beta: f64, start: &[f64; OUTER_DIM], cfg: &SearchConfig, s: f64) -> RestartOutcome {
    let rounds = cfg.seesaw_rounds;
    let family = cfg.channel_family;
    let mut x = *start;
    let mut weight = 10.0;
    let mut step = 0.25;
    for _ in 0..=cfg.penalty_escalations {
        let objective = |p: &[f64]| {
            let c = candidate(p, beta, cfg.fixed_theta);
            let inner = inner_max(&c.sigma, c.theta, family, rounds, s).fidelity;
            inner + weight * c.shortfall * c.shortfall
        };
        x = pattern_search(objective, &x, step, cfg.min_step, cfg.max_evals).0;
        if candidate(&x, beta, cfg.fixed_theta).shortfall < cfg.tolerance {
            break;
        }
        weight *= 10.0;
        step = 0.05;
    }
    let c = candidate(&x, beta, cfg.fixed_theta);
    // final polish of the inner maximum at the witness
    let best = inner_max(&c.sigma, c.theta, family, rounds.max(4), s);
    let achieved = chsh_value(&c.sigma, c.theta);
    RestartOutcome {
        value: best.fidelity,
        residual: (achieved - beta).abs(),
        witness: Witness { assemblage: c.sigma, theta: c.theta, beta: achieved, channel: best.params },
    }
}

/// Estimates the minimum extractability at CHSH value `beta` by a penalized
/// pattern search over assemblages and `θ`, restarted `cfg.samples` times.
///
/// The first restart starts at the mixture of the reference with the optimal
/// classical assemblage, the second at the noisy reference, the rest at random
/// points drawn from per-restart ChaCha streams of `cfg.rng_seed`.
pub fn min_extractability_at_beta(beta: f64, cfg: &SearchConfig) -> Result<SandwichRecord> {
    cfg.validate()?;
    if !(beta > CHSH_CLASSICAL_BOUND && beta <= CHSH_QUANTUM_BOUND + 1e-12) {
        return Err(Error::Domain(format!("beta = {beta} outside (2, 2*sqrt(2)]")));
    }
    let beta = beta.min(CHSH_QUANTUM_BOUND);
    let s = BoundCoefficients::optimal().s;
    let q = ((beta - CHSH_CLASSICAL_BOUND) / (CHSH_QUANTUM_BOUND - CHSH_CLASSICAL_BOUND)).clamp(0.0, 1.0);
    let target_stream = (beta * 1e9).round() as u64;

    let starts: Vec<[f64; OUTER_DIM]> = (0..cfg.samples)
        .map(|k| match k {
            0 => mixture_start(q),
            1 => mixture_start(1.0),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
                rng.set_stream(target_stream.wrapping_mul(1 << 16).wrapping_add(k as u64));
                random_start(&mut rng)
            }
        })
        .collect();

    let outcomes: Vec<RestartOutcome> = starts.par_iter().map(|st| run_restart(beta, st, cfg, s)).collect();
    // feasible restarts first, lowest value among them; otherwise the closest to feasible
    let best = outcomes
        .into_iter()
        .filter(|o| o.value.is_finite())
        .min_by(|a, b| {
            let fa = a.residual < cfg.tolerance;
            let fb = b.residual < cfg.tolerance;
            match (fa, fb) {
                (true, true) => a.value.total_cmp(&b.value),
                (true, false) => std::cmp::Ordering::Less,
                (false, true) => std::cmp::Ordering::Greater,
                (false, false) => a.residual.total_cmp(&b.residual),
            }
        })
        .ok_or_else(|| Error::Domain("no restart produced a finite value".into()))?;

    let analytic_lower = analytic_bound(beta);
    let eq8_upper = chsh_upper_bound(beta);
    let tol = cfg.tolerance;
    let passed = best.residual < tol && best.value >= analytic_lower - tol && best.value <= eq8_upper + tol;
    Ok(SandwichRecord {
        beta,
        numeric_min: best.value,
        analytic_lower,
        eq8_upper,
        residual: best.residual,
        restarts_used: cfg.samples,
        passed,
        witness: best.witness,
    })
}

/// Runs [`min_extractability_at_beta`] over every target in order.
pub fn sandwich_sweep(cfg: &SearchConfig) -> Result<SandwichReport> {
    cfg.validate()?;
    let records = cfg
        .beta_targets
        .iter()
        .map(|&b| min_extractability_at_beta(b, cfg))
        .collect::<Result<Vec<_>>>()?;
    let passed = records.iter().all(|r| r.passed);
    Ok(SandwichReport { config: cfg.clone(), records, passed })
}

/// `Λ(Σ)` for the reference conjugated by `u`, used by tests and examples.
pub fn conjugated_reference(u: &Matrix) -> Assemblage {
    chsh_reference().conjugate_by(u)
}

/// The classical assemblage that attains the classical fidelity.
pub fn optimal_classical_assemblage() -> Assemblage {
    crate::assemblage::from_classical(&appendix_b_strategy(), 2, 2).expect("valid strategy")
}
