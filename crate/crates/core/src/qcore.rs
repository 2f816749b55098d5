//! Dense complex linear algebra for the handful of dimensions this crate needs
//! (2 and 4, with headroom up to 8).
//!
//! Basis ordering is fixed throughout: a two-qubit ket `|q_A q_B⟩` lives at
//! index `2·q_A + q_B`, so qubit A is the most significant bit and
//! `tensor(a, b)` places `a` on qubit A.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Largest dimension accepted by the eigensolver.
pub const MAX_DIM: usize = 8;

/// Hermiticity tolerance for `hermitian_eigen` inputs.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues above this (but below zero) are clamped by `psd_sqrt`.
pub const PSD_NEGATIVE_ERROR: f64 = -1e-6;

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("dimension {0} exceeds the supported maximum of {MAX_DIM}")]
    TooLarge(usize),
    #[error("Jacobi sweeps did not converge (off-diagonal norm {0:.3e})")]
    NoConvergence(f64),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector {
    entries: Vec<C64>,
}

impl ComplexVector {
    pub fn new(entries: Vec<C64>) -> Self {
        assert!(!entries.is_empty(), "vectors must have positive dimension");
        Self { entries }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&x| real(x)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(vec![C64::default(); dim])
    }

    /// Computational basis ket `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.entries[index] = real(1.0);
        v
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<C64> {
        self.entries
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    /// Returns `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n == 0.0 {
            return None;
        }
        Some(self.scale(real(1.0 / n)))
    }

    pub fn scale(&self, k: C64) -> Self {
        Self::new(self.entries.iter().map(|z| z * k).collect())
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> C64 {
        assert_eq!(self.dim(), other.dim());
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|self⟩⟨other|`.
    pub fn outer(&self, other: &Self) -> ComplexMatrix {
        let n = self.dim();
        let m = other.dim();
        let mut out = ComplexMatrix::zeros(n, m);
        for i in 0..n {
            for j in 0..m {
                out[(i, j)] = self.entries[i] * other.entries[j].conj();
            }
        }
        out
    }

    pub fn projector(&self) -> ComplexMatrix {
        self.outer(self)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `|⟨self|other⟩|²` for normalized inputs; insensitive to global phase.
    pub fn overlap_sqr(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }
}

impl Index<usize> for ComplexVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.entries[i]
    }
}

impl IndexMut<usize> for ComplexVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.entries[i]
    }
}

impl Add for &ComplexVector {
    type Output = ComplexVector;
    fn add(self, rhs: &ComplexVector) -> ComplexVector {
        assert_eq!(self.dim(), rhs.dim());
        ComplexVector::new(self.entries.iter().zip(&rhs.entries).map(|(a, b)| a + b).collect())
    }
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<C64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols != entries.len() {
            return Err(LinalgError::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn from_rows(rows: &[&[C64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinalgError::Shape("ragged rows".into()));
        }
        Self::new(r, c, rows.iter().flat_map(|row| row.iter().copied()).collect())
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let owned: Vec<Vec<C64>> = rows.iter().map(|r| r.iter().map(|&x| real(x)).collect()).collect();
        let refs: Vec<&[C64]> = owned.iter().map(|r| r.as_slice()).collect();
        Self::from_rows(&refs)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![C64::default(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = real(1.0);
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = real(v);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn column(&self, j: usize) -> ComplexVector {
        ComplexVector::new((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    pub fn scale(&self, k: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, entries: self.entries.iter().map(|z| z * k).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `‖M − M†‖_max`.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// `‖M†M − I‖_max`.
    pub fn unitarity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let prod = dagger(self).mul(self);
        prod.max_abs_diff(&Self::identity(self.rows))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_deviation() <= tol
    }

    /// Matrix-vector product; panics on shape mismatch.
    pub fn apply(&self, v: &ComplexVector) -> ComplexVector {
        assert_eq!(self.cols, v.dim(), "matrix-vector shape mismatch");
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let row = &self.entries[i * self.cols..(i + 1) * self.cols];
            out.push(row.iter().zip(v.entries()).map(|(a, b)| a * b).sum());
        }
        ComplexVector::new(out)
    }

    /// `⟨v|M|v⟩`.
    pub fn expectation(&self, v: &ComplexVector) -> C64 {
        v.inner(&self.apply(v))
    }

    /// Re-symmetrizes `(M + M†)/2`; used to scrub rounding asymmetry.
    pub fn hermitian_part(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
            }
        }
        out
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.entries[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.entries[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        matmul(self, rhs).expect("matrix product shape mismatch")
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a - b).collect(),
        }
    }
}

impl fmt::Display for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.6}{:+.6}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.cols != b.rows {
        return Err(LinalgError::Shape(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = ComplexMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a[(i, k)];
            if aik == C64::default() {
                continue;
            }
            for j in 0..b.cols {
                out.entries[i * b.cols + j] += aik * b.entries[k * b.cols + j];
            }
        }
    }
    Ok(out)
}

pub fn dagger(m: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(m.cols, m.rows);
    for i in 0..m.rows {
        for j in 0..m.cols {
            out[(j, i)] = m[(i, j)].conj();
        }
    }
    out
}

/// `[a, b] = ab − ba`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(&matmul(a, b)? - &matmul(b, a)?)
}

/// Kronecker product, left operand on the more significant index.
pub trait Tensor {
    fn tensor(&self, other: &Self) -> Self;
}

impl Tensor for ComplexMatrix {
    fn tensor(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut out = ComplexMatrix::zeros(rows, cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out[(i * other.rows + k, j * other.cols + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }
}

impl Tensor for ComplexVector {
    fn tensor(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.dim() * other.dim());
        for a in self.entries() {
            for b in other.entries() {
                out.push(a * b);
            }
        }
        ComplexVector::new(out)
    }
}

pub fn tensor<T: Tensor>(a: &T, b: &T) -> T {
    a.tensor(b)
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Sorted descending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// `V diag(f(λ)) V†`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = self.vectors[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += vik * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_values(|x| x)
    }
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.rows;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Cyclic complex Jacobi eigensolver.
///
/// Each rotation first rephases the `(p, q)` pair so `a_pq` becomes real and
/// then applies the classical real Jacobi rotation that annihilates it.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(LinalgError::Shape(format!("{}x{} is not square", m.rows, m.cols)));
    }
    let n = m.rows;
    if n > MAX_DIM {
        return Err(LinalgError::TooLarge(n));
    }
    let dev = m.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(LinalgError::NotHermitian(dev));
    }

    let mut a = m.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm();
    let threshold = JACOBI_TOL * scale.max(f64::MIN_POSITIVE);

    let mut sweeps = 0;
    while off_diagonal_norm(&a) > threshold {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(LinalgError::NoConvergence(off_diagonal_norm(&a)));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = apq / mag;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // J = diag(1, e^{-iφ}) · [[c, s], [-s, c]] on the (p, q) plane.
                let jpp = real(c);
                let jpq = real(s);
                let jqp = -phase.conj() * s;
                let jqq = phase.conj() * c;

                // A ← A J
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * jpp + aiq * jqp;
                    a[(i, q)] = aip * jpq + aiq * jqq;
                }
                // A ← J† A
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = jpp.conj() * apj + jqp.conj() * aqj;
                    a[(q, j)] = jpq.conj() * apj + jqq.conj() * aqj;
                }
                a[(p, q)] = C64::default();
                a[(q, p)] = C64::default();
                // V ← V J
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * jpp + viq * jqp;
                    v[(i, q)] = vip * jpq + viq * jqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, k)] = v[(i, src)];
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// Principal square root of a positive semidefinite Hermitian matrix.
///
/// Slightly negative eigenvalues (down to `PSD_NEGATIVE_ERROR`) are solver
/// noise and are clamped to zero.
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eigen(m)?;
    if let Some(&min) = eig.values.last() {
        if min < PSD_NEGATIVE_ERROR {
            return Err(LinalgError::NotPsd(min));
        }
    }
    Ok(eig.map_values(|x| x.max(0.0).sqrt()).hermitian_part())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn hadamard() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[FRAC_1_SQRT_2, FRAC_1_SQRT_2], &[FRAC_1_SQRT_2, -FRAC_1_SQRT_2]])
            .unwrap()
    }

    fn g(theta: f64) -> ComplexMatrix {
        let (s, c) = (theta / 2.0).sin_cos();
        ComplexMatrix::from_real_rows(&[&[c, s], &[s, -c]]).unwrap()
    }

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    #[test]
    fn matmul_identity_and_involutions() {
        let h = hadamard();
        assert_eq!(matmul(&ComplexMatrix::identity(2), &h).unwrap(), h);
        assert!((&h * &h).max_abs_diff(&ComplexMatrix::identity(2)) <= 1e-12);
        let gq = g(std::f64::consts::FRAC_PI_4);
        assert!((&gq * &gq).max_abs_diff(&ComplexMatrix::identity(2)) <= 1e-12);
    }

    #[test]
    fn matmul_rejects_bad_shapes() {
        let a = ComplexMatrix::zeros(2, 3);
        assert!(matches!(matmul(&a, &a), Err(LinalgError::Shape(_))));
        assert!(ComplexMatrix::new(2, 2, vec![C64::default(); 3]).is_err());
    }

    #[test]
    fn tensor_orders_qubit_a_first() {
        let zero = ComplexVector::basis(2, 0);
        assert_eq!(tensor(&zero, &zero), ComplexVector::from_real(&[1.0, 0.0, 0.0, 0.0]));

        let one = ComplexVector::basis(2, 1);
        // |1⟩_A ⊗ |0⟩_B sits at index 2.
        assert_eq!(tensor(&one, &zero), ComplexVector::basis(4, 2));

        let hi = tensor(&hadamard(), &ComplexMatrix::identity(2));
        let out = hi.apply(&ComplexVector::basis(4, 0));
        let expected = ComplexVector::from_real(&[FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2, 0.0]);
        assert!(out.max_abs_diff(&expected) <= 1e-15);
    }

    #[test]
    fn dagger_cases() {
        assert_eq!(dagger(&ComplexMatrix::identity(2)), ComplexMatrix::identity(2));
        assert_eq!(dagger(&hadamard()), hadamard());
        let m = ComplexMatrix::from_rows(&[&[c64(1.0, 2.0), c64(0.0, -1.0)], &[c64(3.0, 0.5), c64(0.0, 0.0)]])
            .unwrap();
        let d = dagger(&m);
        assert_eq!(d[(0, 1)], c64(3.0, -0.5));
        assert_eq!(d[(1, 0)], c64(0.0, 1.0));
    }

    #[test]
    fn eigen_of_diagonal() {
        let eig = hermitian_eigen(&ComplexMatrix::diag(&[1.0, 3.0])).unwrap();
        assert_eq!(eig.values, vec![3.0, 1.0]);
        assert!(eig.vectors[(1, 0)].norm() > 0.999_999);
    }

    #[test]
    fn eigen_of_pauli_x() {
        let eig = hermitian_eigen(&pauli_x()).unwrap();
        assert_abs_diff_eq!(eig.values[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.values[1], -1.0, epsilon = 1e-14);
        let plus = ComplexVector::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]);
        let minus = ComplexVector::from_real(&[FRAC_1_SQRT_2, -FRAC_1_SQRT_2]);
        assert_abs_diff_eq!(eig.vectors.column(0).overlap_sqr(&plus), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.vectors.column(1).overlap_sqr(&minus), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eigen_of_pure_projector() {
        let psi = ComplexVector::new(vec![c64(0.5, 0.0), c64(0.0, 0.5), c64(-0.5, 0.0), c64(0.5, 0.0)]);
        let eig = hermitian_eigen(&psi.projector()).unwrap();
        assert_abs_diff_eq!(eig.values[0], 1.0, epsilon = 1e-14);
        for &x in &eig.values[1..] {
            assert_abs_diff_eq!(x, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn eigen_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(hermitian_eigen(&m), Err(LinalgError::NotHermitian(_))));
        assert!(matches!(hermitian_eigen(&ComplexMatrix::identity(9)), Err(LinalgError::TooLarge(9))));
    }

    #[test]
    fn psd_sqrt_cases() {
        let i4 = ComplexMatrix::identity(4);
        assert!(psd_sqrt(&i4).unwrap().max_abs_diff(&i4) <= 1e-14);

        let r = psd_sqrt(&ComplexMatrix::diag(&[4.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(r.max_abs_diff(&ComplexMatrix::diag(&[2.0, 0.0, 0.0, 0.0])) <= 1e-14);

        let mixed = i4.scale(real(0.25));
        let root = psd_sqrt(&mixed).unwrap();
        assert!((&root * &root).max_abs_diff(&mixed) <= 1e-12);
    }

    #[test]
    fn psd_sqrt_clamps_noise_but_rejects_real_negativity() {
        let noisy = ComplexMatrix::diag(&[1.0, -1e-11]);
        let r = psd_sqrt(&noisy).unwrap();
        assert_eq!(r[(1, 1)], C64::default());
        assert!(matches!(psd_sqrt(&ComplexMatrix::diag(&[1.0, -1e-3])), Err(LinalgError::NotPsd(_))));
    }

    #[test]
    fn psd_sqrt_chain_on_diagonal() {
        let m = ComplexMatrix::diag(&[16.0, 81.0, 1.0, 0.0625]);
        let fourth = psd_sqrt(&psd_sqrt(&m).unwrap()).unwrap();
        assert!(fourth.max_abs_diff(&ComplexMatrix::diag(&[2.0, 3.0, 1.0, 0.5])) <= 1e-14);
    }

    fn arb_c64() -> impl Strategy<Value = C64> {
        (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| c64(re, im))
    }

    fn arb_hermitian(n: usize) -> impl Strategy<Value = ComplexMatrix> {
        prop::collection::vec(arb_c64(), n * n).prop_map(move |raw| {
            let m = ComplexMatrix::new(n, n, raw).unwrap();
            (&m + &dagger(&m)).scale(real(0.5))
        })
    }

    fn arb_matrix(n: usize) -> impl Strategy<Value = ComplexMatrix> {
        prop::collection::vec(arb_c64(), n * n).prop_map(move |raw| ComplexMatrix::new(n, n, raw).unwrap())
    }

    /// `exp(iH)` via the eigendecomposition, independent of the gate builders.
    fn unitary_from(h: &ComplexMatrix) -> ComplexMatrix {
        let eig = hermitian_eigen(h).unwrap();
        let n = eig.values.len();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lambda) in eig.values.iter().enumerate() {
            let w = C64::from_polar(1.0, lambda);
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += eig.vectors[(i, k)] * w * eig.vectors[(j, k)].conj();
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn eigen_reconstructs_and_is_orthonormal(m in (2usize..=8).prop_flat_map(arb_hermitian)) {
            let eig = hermitian_eigen(&m).unwrap();
            prop_assert!(eig.reconstruct().max_abs_diff(&m) <= 1e-10);
            prop_assert!(eig.vectors.is_unitary(1e-10));
            let sum: f64 = eig.values.iter().sum();
            prop_assert!((sum - m.trace().re).abs() <= 1e-10);
            prop_assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn exponentiated_hermitians_are_unitary(h in arb_hermitian(4)) {
            let u = unitary_from(&h.scale(real(3.0)));
            prop_assert!(u.unitarity_deviation() <= 1e-10);
        }

        #[test]
        fn tensor_is_associative(a in arb_matrix(2), b in arb_matrix(2), c in arb_matrix(2)) {
            let left = tensor(&tensor(&a, &b), &c);
            let right = tensor(&a, &tensor(&b, &c));
            prop_assert!(left.max_abs_diff(&right) <= 1e-14);
        }

        #[test]
        fn psd_sqrt_squares_back(m in arb_matrix(4)) {
            let psd = &dagger(&m) * &m;
            let root = psd_sqrt(&psd).unwrap();
            prop_assert!((&root * &root).max_abs_diff(&psd) <= 1e-9);
            prop_assert!(root.is_hermitian(1e-12));
            let eig = hermitian_eigen(&root).unwrap();
            prop_assert!(eig.values.iter().all(|&x| x >= -1e-10));
        }
    }
}
