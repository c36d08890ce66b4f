//! Exact-dimension complex matrix algebra for qubit and two-qubit operators.
//!
//! Every operator in the crate lives in a 2×2 or 4×4 complex matrix. [`Matrix`]
//! is the general (possibly non-Hermitian) carrier used for unitaries, Kraus
//! operators and intermediate products; [`HermitianMat`] wraps it once
//! Hermiticity has been checked and is the type that spectra are taken of.
//!
//! Storage is a fixed inline array so that every value is `Copy` and nothing in
//! the inner optimization loops allocates.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Absolute tolerance on `|m[i][j] - conj(m[j][i])|`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Off-diagonal Frobenius norm at which the 4×4 Jacobi iteration stops.
pub const JACOBI_TOL: f64 = 1e-13;

const MAX_DIM: usize = 4;
const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 4 {
        Ok(())
    } else {
        Err(Error::Validation(format!("matrix dimension must be 2 or 4, got {dim}")))
    }
}

/// A square complex matrix of dimension 2 or 4, row-major.
#[derive(Clone, Copy, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: [C64; MAX_DIM * MAX_DIM],
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix({}x{})[", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self.get(i, j);
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 4, "matrix dimension must be 2 or 4");
        Self { dim, data: [ZERO; MAX_DIM * MAX_DIM] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, ONE);
        }
        m
    }

    /// Builds a matrix from `dim * dim` row-major entries.
    pub fn from_row_major(dim: usize, entries: &[C64]) -> Result<Self> {
        check_dim(dim)?;
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.set(i, j, entries[i * dim + j]);
            }
        }
        Ok(m)
    }

    pub fn from_real(dim: usize, entries: &[f64]) -> Result<Self> {
        let cs: Vec<C64> = entries.iter().map(|&x| c(x, 0.0)).collect();
        Self::from_row_major(dim, &cs)
    }

    /// 2×2 matrix from rows `[[a, b], [c, d]]`.
    pub fn mat2(a: C64, b: C64, cc: C64, d: C64) -> Self {
        let mut m = Self::zeros(2);
        m.set(0, 0, a);
        m.set(0, 1, b);
        m.set(1, 0, cc);
        m.set(1, 1, d);
        m
    }

    /// Outer product `|v⟩⟨v|`.
    pub fn outer(v: &[C64]) -> Result<Self> {
        let dim = v.len();
        check_dim(dim)?;
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.set(i, j, v[i] * v[j].conj());
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * MAX_DIM + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * MAX_DIM + j] = v;
    }

    pub fn to_row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.dim * self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.set(i, j, self.get(j, i).conj());
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, k: f64) -> Self {
        self.scale_complex(c(k, 0.0))
    }

    pub fn scale_complex(&self, k: C64) -> Self {
        let mut m = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.set(i, j, k * self.get(i, j));
            }
        }
        m
    }

    /// `u · self · u†`
    pub fn conjugate_by(&self, u: &Matrix) -> Self {
        *u * *self * u.adjoint()
    }

    /// `tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Matrix) -> C64 {
        assert_eq!(self.dim, other.dim);
        let mut acc = ZERO;
        for i in 0..self.dim {
            for k in 0..self.dim {
                acc += self.get(i, k) * other.get(k, i);
            }
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((self.get(i, j) - other.get(i, j)).norm());
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.to_row_major().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest `|m[i][j] - conj(m[j][i])|`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Standard tensor product with `self` as the major (first) factor.
    pub fn kron(&self, other: &Matrix) -> Result<Matrix> {
        if self.dim != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: self.dim });
        }
        if other.dim != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: other.dim });
        }
        let mut m = Matrix::zeros(4);
        for i in 0..2 {
            for j in 0..2 {
                let a = self.get(i, j);
                for k in 0..2 {
                    for l in 0..2 {
                        m.set(2 * i + k, 2 * j + l, a * other.get(k, l));
                    }
                }
            }
        }
        Ok(m)
    }

    /// Traces out the first (major) qubit of a 4×4 operator.
    pub fn partial_trace_a(&self) -> Result<Matrix> {
        if self.dim != 4 {
            return Err(Error::DimensionMismatch { expected: 4, found: self.dim });
        }
        let mut m = Matrix::zeros(2);
        for k in 0..2 {
            for l in 0..2 {
                m.set(k, l, self.get(k, l) + self.get(2 + k, 2 + l));
            }
        }
        Ok(m)
    }
}

impl Add for Matrix {
    type Output = Matrix;
    fn add(self, rhs: Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim);
        let mut m = self;
        for k in 0..self.data.len() {
            m.data[k] += rhs.data[k];
        }
        m
    }
}

impl Sub for Matrix {
    type Output = Matrix;
    fn sub(self, rhs: Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim);
        let mut m = self;
        for k in 0..self.data.len() {
            m.data[k] -= rhs.data[k];
        }
        m
    }
}

impl Neg for Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl Mul for Matrix {
    type Output = Matrix;
    fn mul(self, rhs: Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += self.get(i, k) * rhs.get(k, j);
                }
                m.set(i, j, acc);
            }
        }
        m
    }
}

impl Mul<Matrix> for f64 {
    type Output = Matrix;
    fn mul(self, rhs: Matrix) -> Matrix {
        rhs.scale(self)
    }
}

/// A complex Hermitian matrix of dimension 2 or 4.
///
/// Construction checks Hermiticity to [`HERMITIAN_TOL`] and stores the
/// symmetrized part `(M + M†)/2`, so the stored value is exactly Hermitian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HermitianMat(Matrix);

impl HermitianMat {
    pub fn new(m: Matrix) -> Result<Self> {
        let defect = m.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::Validation(format!(
                "matrix is not Hermitian (max |m_ij - conj(m_ji)| = {defect:.3e})"
            )));
        }
        Ok(Self::symmetrize(m))
    }

    /// Hermitian part `(M + M†)/2`, with no tolerance check.
    pub fn symmetrize(m: Matrix) -> Self {
        HermitianMat((m + m.adjoint()).scale(0.5))
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianMat(Matrix::zeros(dim))
    }

    pub fn identity(dim: usize) -> Self {
        HermitianMat(Matrix::identity(dim))
    }

    /// Projector `|v⟩⟨v|` onto a (not necessarily normalized) vector.
    pub fn projector(v: &[C64]) -> Result<Self> {
        Ok(HermitianMat(Matrix::outer(v)?))
    }

    /// Qubit operator `a0·I + ax·X + ay·Y + az·Z`.
    pub fn from_pauli(a0: f64, ax: f64, ay: f64, az: f64) -> Self {
        HermitianMat(Matrix::mat2(c(a0 + az, 0.0), c(ax, -ay), c(ax, ay), c(a0 - az, 0.0)))
    }

    /// Pauli coefficients `(a0, ax, ay, az)` of a qubit operator.
    pub fn pauli_components(&self) -> [f64; 4] {
        assert_eq!(self.dim(), 2);
        let m = &self.0;
        let a0 = 0.5 * (m.get(0, 0).re + m.get(1, 1).re);
        let az = 0.5 * (m.get(0, 0).re - m.get(1, 1).re);
        let ax = m.get(1, 0).re;
        let ay = m.get(1, 0).im;
        [a0, ax, ay, az]
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0.get(i, j)
    }

    /// Real trace (the imaginary part of a Hermitian trace is zero).
    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn scale(&self, k: f64) -> Self {
        HermitianMat(self.0.scale(k))
    }

    /// `tr(self · other)` for two Hermitian operators; real by construction.
    pub fn trace_product(&self, other: &HermitianMat) -> f64 {
        self.0.trace_product(&other.0).re
    }

    /// `u · self · u†`, symmetrized.
    pub fn conjugate_by(&self, u: &Matrix) -> Self {
        Self::symmetrize(self.0.conjugate_by(u))
    }

    pub fn max_abs_diff(&self, other: &HermitianMat) -> f64 {
        self.0.max_abs_diff(&other.0)
    }

    /// Determinant of a 2×2 Hermitian matrix (real).
    pub fn det2(&self) -> f64 {
        assert_eq!(self.dim(), 2);
        let m = &self.0;
        m.get(0, 0).re * m.get(1, 1).re - m.get(0, 1).norm_sqr()
    }

    /// Eigenvalues in ascending order.
    pub fn eigvals(&self) -> Vec<f64> {
        match self.dim() {
            2 => {
                let (lo, hi) = eig2_values(&self.0);
                vec![lo, hi]
            }
            _ => self.eigh().0,
        }
    }

    pub fn min_eigval(&self) -> f64 {
        self.eigvals()[0]
    }

    pub fn max_eigval(&self) -> f64 {
        *self.eigvals().last().expect("nonempty spectrum")
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigval() >= -tol
    }

    /// Eigenvalues (ascending) and the matching orthonormal eigenvectors.
    pub fn eigh(&self) -> (Vec<f64>, Vec<Vec<C64>>) {
        match self.dim() {
            2 => eig2(&self.0),
            _ => eig4_jacobi(&self.0),
        }
    }

    /// Principal square root of a PSD qubit operator (negative eigenvalues clipped).
    pub fn sqrt_psd2(&self) -> HermitianMat {
        assert_eq!(self.dim(), 2);
        let det = self.det2().max(0.0);
        let s = det.sqrt();
        let denom = (self.trace() + 2.0 * s).max(0.0).sqrt();
        if denom <= 0.0 {
            return HermitianMat::zeros(2);
        }
        HermitianMat((self.0 + Matrix::identity(2).scale(s)).scale(1.0 / denom))
    }
}

impl Add for HermitianMat {
    type Output = HermitianMat;
    fn add(self, rhs: HermitianMat) -> HermitianMat {
        HermitianMat(self.0 + rhs.0)
    }
}

impl Sub for HermitianMat {
    type Output = HermitianMat;
    fn sub(self, rhs: HermitianMat) -> HermitianMat {
        HermitianMat(self.0 - rhs.0)
    }
}

impl Neg for HermitianMat {
    type Output = HermitianMat;
    fn neg(self) -> HermitianMat {
        HermitianMat(-self.0)
    }
}

impl Mul<HermitianMat> for f64 {
    type Output = HermitianMat;
    fn mul(self, rhs: HermitianMat) -> HermitianMat {
        rhs.scale(self)
    }
}

impl From<HermitianMat> for Matrix {
    fn from(h: HermitianMat) -> Matrix {
        h.0
    }
}

fn eig2_values(m: &Matrix) -> (f64, f64) {
    let a = m.get(0, 0).re;
    let d = m.get(1, 1).re;
    let b = m.get(0, 1);
    let mean = 0.5 * (a + d);
    let r = (0.5 * (a - d)).hypot(b.norm());
    (mean - r, mean + r)
}

fn eig2(m: &Matrix) -> (Vec<f64>, Vec<Vec<C64>>) {
    let (lo, hi) = eig2_values(m);
    let a = m.get(0, 0).re;
    let d = m.get(1, 1).re;
    let b = m.get(0, 1);
    if b.norm() <= f64::EPSILON * (a.abs() + d.abs()).max(1.0) {
        let e0 = vec![ONE, ZERO];
        let e1 = vec![ZERO, ONE];
        return if a <= d { (vec![lo, hi], vec![e0, e1]) } else { (vec![lo, hi], vec![e1, e0]) };
    }
    let vec_for = |lambda: f64| {
        let v = [b, c(lambda - a, 0.0)];
        let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        vec![v[0] / n, v[1] / n]
    };
    (vec![lo, hi], vec![vec_for(lo), vec_for(hi)])
}

/// Cyclic Jacobi on the real symmetric 8×8 embedding `[[Re, -Im], [Im, Re]]`
/// of a 4×4 Hermitian matrix. Each eigenvalue appears twice in the embedding;
/// the complex eigenvectors are recovered by complex Gram-Schmidt.
fn eig4_jacobi(m: &Matrix) -> (Vec<f64>, Vec<Vec<C64>>) {
    const N: usize = 8;
    let mut a = [[0.0f64; N]; N];
    for i in 0..4 {
        for j in 0..4 {
            let z = m.get(i, j);
            a[i][j] = z.re;
            a[i + 4][j + 4] = z.re;
            a[i][j + 4] = -z.im;
            a[i + 4][j] = z.im;
        }
    }
    let mut v = [[0.0f64; N]; N];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    for _sweep in 0..100 {
        let off: f64 = (0..N)
            .flat_map(|i| (0..N).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off < JACOBI_TOL {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                let apq = a[p][q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = cs * akp - sn * akq;
                    row[q] = sn * akp + cs * akq;
                }
                for k in 0..N {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = cs * apk - sn * aqk;
                    a[q][k] = sn * apk + cs * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = cs * vkp - sn * vkq;
                    row[q] = sn * vkp + cs * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..N).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));

    let mut values = Vec::with_capacity(4);
    let mut vectors: Vec<Vec<C64>> = Vec::with_capacity(4);
    for &k in &order {
        if vectors.len() == 4 {
            break;
        }
        let mut cand: Vec<C64> = (0..4).map(|i| c(v[i][k], v[i + 4][k])).collect();
        for q in &vectors {
            let overlap: C64 = q.iter().zip(&cand).map(|(x, y)| x.conj() * y).sum();
            for (ci, qi) in cand.iter_mut().zip(q) {
                *ci -= overlap * qi;
            }
        }
        let norm = cand.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.5 {
            cand.iter_mut().for_each(|z| *z /= norm);
            values.push(a[k][k]);
            vectors.push(cand);
        }
    }
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn eigvals_hermitian(m: &Matrix) -> Result<Vec<f64>> {
    Ok(HermitianMat::new(*m)?.eigvals())
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigval(m: &Matrix) -> Result<f64> {
    Ok(HermitianMat::new(*m)?.min_eigval())
}

pub fn kron(a: &HermitianMat, b: &HermitianMat) -> Result<HermitianMat> {
    Ok(HermitianMat::symmetrize(a.matrix().kron(b.matrix())?))
}

pub fn partial_trace_a(m: &HermitianMat) -> Result<HermitianMat> {
    Ok(HermitianMat::symmetrize(m.matrix().partial_trace_a()?))
}

/// Single-qubit Pauli operators and common states.
pub mod pauli {
    use super::*;

    pub fn identity() -> HermitianMat {
        HermitianMat::identity(2)
    }

    pub fn x() -> HermitianMat {
        HermitianMat::from_pauli(0.0, 1.0, 0.0, 0.0)
    }

    pub fn y() -> HermitianMat {
        HermitianMat::from_pauli(0.0, 0.0, 1.0, 0.0)
    }

    pub fn z() -> HermitianMat {
        HermitianMat::from_pauli(0.0, 0.0, 0.0, 1.0)
    }

    /// `|0⟩⟨0|`
    pub fn ket0() -> HermitianMat {
        HermitianMat::from_pauli(0.5, 0.0, 0.0, 0.5)
    }

    /// `|1⟩⟨1|`
    pub fn ket1() -> HermitianMat {
        HermitianMat::from_pauli(0.5, 0.0, 0.0, -0.5)
    }

    /// `|+⟩⟨+|`
    pub fn plus() -> HermitianMat {
        HermitianMat::from_pauli(0.5, 0.5, 0.0, 0.0)
    }

    /// `|−⟩⟨−|`
    pub fn minus() -> HermitianMat {
        HermitianMat::from_pauli(0.5, -0.5, 0.0, 0.0)
    }

    /// Density matrix with Bloch vector `r`.
    pub fn bloch_state(r: [f64; 3]) -> HermitianMat {
        HermitianMat::from_pauli(0.5, 0.5 * r[0], 0.5 * r[1], 0.5 * r[2])
    }

    /// `exp(-i·angle/2·σ)` for a unit axis.
    pub fn rotation(axis: [f64; 3], angle: f64) -> Matrix {
        let (s, co) = (0.5 * angle).sin_cos();
        let [nx, ny, nz] = axis;
        Matrix::mat2(c(co, -s * nz), c(-s * ny, -s * nx), c(s * ny, -s * nx), c(co, s * nz))
    }

    /// `|φ⁺⟩⟨φ⁺|` with `|φ⁺⟩ = (|00⟩ + |11⟩)/√2`.
    pub fn phi_plus() -> HermitianMat {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        HermitianMat::projector(&[c(h, 0.0), ZERO, ZERO, c(h, 0.0)]).expect("dim 4")
    }
}
