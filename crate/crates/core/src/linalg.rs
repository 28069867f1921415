//! Dense complex linear algebra for the small matrices used throughout the
//! crate (two-qubit states, qutrits, and the 3×3 correlation matrices).
//!
//! Everything here is dependency-free: the eigensolver is a cyclic Jacobi
//! iteration run on the real symmetric embedding
//!
//! ```text
//!     M = A + iB   ->   [ A  -B ]
//!                       [ B   A ]
//! ```
//!
//! whose spectrum is the spectrum of `M` with every eigenvalue doubled.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::round_sig;

pub type C64 = Complex64;

/// Largest supported matrix dimension (a 4-qubit Kronecker product).
pub const MAX_DIM: usize = 16;

/// Numerical tolerances shared by the validity checks.
///
/// The defaults are the module constants below; callers that need looser or
/// stricter checks (e.g. the CLI config file) construct their own value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Max entry of `|M - M^dagger|`.
    pub hermitian: f64,
    /// Allowed deviation of the real part of the trace from one.
    pub trace: f64,
    /// Allowed imaginary part of the trace.
    pub trace_imag: f64,
    /// Most negative eigenvalue still accepted as PSD.
    pub psd: f64,
    /// Jacobi stopping criterion on the off-diagonal Frobenius norm.
    pub jacobi: f64,
}

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const TRACE_IMAG_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-9;
pub const JACOBI_TOL: f64 = 1e-13;

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermitian: HERMITIAN_TOL,
            trace: TRACE_TOL,
            trace_imag: TRACE_IMAG_TOL,
            psd: PSD_TOL,
            jacobi: JACOBI_TOL,
        }
    }
}

/// Square complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.6}{:+.6}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { dim, data }
    }

    /// Builds a matrix from row vectors; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::BadShape(format!(
                "dimension {dim} not in 1..={MAX_DIM}"
            )));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::BadShape(format!(
                "row of length {} in a {dim}x{dim} matrix",
                bad.len()
            )));
        }
        Ok(ComplexMatrix {
            dim,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    /// Outer product `|v><v|`.
    pub fn projector(v: &[C64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(i, j)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry-wise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "max_abs_diff on unequal dimensions");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermitian_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(M + M^dagger) / 2`.
    pub fn hermitize(&self) -> Self {
        Self::from_fn(self.dim, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    /// Principal submatrix on the given index set, in the given order.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |i, j| self[(idx[i], idx[j])])
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// `<v| M |v>` for a (not necessarily normalized) vector.
    pub fn expectation(&self, v: &[C64]) -> C64 {
        let mv = self.mul_vec(v);
        v.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum()
    }

    /// Kronecker product. Fails when the result would exceed [`MAX_DIM`].
    pub fn kron(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        let dim = self.dim * other.dim;
        if dim > MAX_DIM {
            return Err(Error::DimOverflow(dim));
        }
        let nb = other.dim;
        Ok(Self::from_fn(dim, |i, j| {
            self[(i / nb, j / nb)] * other[(i % nb, j % nb)]
        }))
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix product on unequal dimensions");
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix sum on unequal dimensions");
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix difference on unequal dimensions");
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Pauli matrices σ₁, σ₂, σ₃ and the 2×2 identity.
pub mod pauli {
    use super::{ComplexMatrix, C64};

    pub fn identity() -> ComplexMatrix {
        ComplexMatrix::identity(2)
    }

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_fn(2, |i, j| C64::new(if i != j { 1.0 } else { 0.0 }, 0.0))
    }

    pub fn y() -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(2);
        m[(0, 1)] = C64::new(0.0, -1.0);
        m[(1, 0)] = C64::new(0.0, 1.0);
        m
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::diag(&[1.0, -1.0])
    }

    /// `[σ₁, σ₂, σ₃]`.
    pub fn all() -> [ComplexMatrix; 3] {
        [x(), y(), z()]
    }
}

/// Eigen-decomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Column `k` (stored row-major, `vectors[i * n + k]`) is the eigenvector of `values[k]`.
    pub vectors: Vec<f64>,
}

/// Cyclic Jacobi eigen-decomposition of the real symmetric `n×n` matrix `a`
/// (row-major). Only the upper triangle is trusted; the input is symmetrized
/// first.
pub fn symmetric_eigen(a: &[f64], n: usize, tol: f64) -> SymmetricEigen {
    assert_eq!(a.len(), n * n);
    let mut m: Vec<f64> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            0.5 * (a[i * n + j] + a[j * n + i])
        })
        .collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let scale = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    const MAX_SWEEPS: usize = 100;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off < tol * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[row * n + col] = v[row * n + src];
        }
    }
    SymmetricEigen { values, vectors }
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending real eigenvalues.
    pub values: Vec<f64>,
    /// Unitary matrix whose column `k` is the eigenvector of `values[k]`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// `V f(Λ) V^dagger`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        ComplexMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| self.vectors[(i, k)] * self.vectors[(j, k)].conj() * fv[k])
                .sum()
        })
    }
}

fn check_hermitian(m: &ComplexMatrix, tol: f64) -> Result<()> {
    let res = m.hermitian_residual();
    if res > tol || res.is_nan() {
        return Err(Error::NonHermitian(res));
    }
    Ok(())
}

fn embed(m: &ComplexMatrix) -> Vec<f64> {
    let n = m.dim();
    let n2 = 2 * n;
    let mut s = vec![0.0; n2 * n2];
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            s[i * n2 + j] = z.re;
            s[(i + n) * n2 + (j + n)] = z.re;
            s[i * n2 + (j + n)] = -z.im;
            s[(i + n) * n2 + j] = z.im;
        }
    }
    s
}

/// Full eigen-decomposition of a Hermitian matrix.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<HermitianEigen> {
    hermitian_eigen_with(m, &Tolerances::default())
}

pub fn hermitian_eigen_with(m: &ComplexMatrix, tol: &Tolerances) -> Result<HermitianEigen> {
    check_hermitian(m, tol.hermitian)?;
    let n = m.dim();
    let h = m.hermitize();
    let emb = symmetric_eigen(&embed(&h), 2 * n, tol.jacobi);
    let n2 = 2 * n;

    // Each eigenvalue of M appears twice in the embedding; average the pairs.
    let values: Vec<f64> = (0..n)
        .map(|k| 0.5 * (emb.values[2 * k] + emb.values[2 * k + 1]))
        .collect();

    // Candidate complex vectors u + i w from every real eigenvector; pick an
    // orthonormal basis greedily by largest Gram-Schmidt residual.
    let candidates: Vec<Vec<C64>> = (0..n2)
        .map(|col| {
            (0..n)
                .map(|i| C64::new(emb.vectors[i * n2 + col], emb.vectors[(i + n) * n2 + col]))
                .collect()
        })
        .collect();
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut used = vec![false; n2];
    for _ in 0..n {
        let mut best: Option<(usize, Vec<C64>, f64)> = None;
        for (idx, cand) in candidates.iter().enumerate() {
            if used[idx] {
                continue;
            }
            let mut r = cand.clone();
            for e in &basis {
                let ov: C64 = e.iter().zip(&r).map(|(a, b)| a.conj() * b).sum();
                for (ri, ei) in r.iter_mut().zip(e) {
                    *ri -= ov * ei;
                }
            }
            let norm = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|b| norm > b.2) {
                best = Some((idx, r, norm));
            }
        }
        let (idx, mut r, norm) = best.expect("candidate set is never exhausted");
        used[idx] = true;
        for z in r.iter_mut() {
            *z /= norm;
        }
        basis.push(r);
    }

    let mut tagged: Vec<(f64, Vec<C64>)> = basis
        .into_iter()
        .map(|e| (h.expectation(&e).re, e))
        .collect();
    tagged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let vectors = ComplexMatrix::from_fn(n, |i, k| tagged[k].1[i]);
    Ok(HermitianEigen { values, vectors })
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    hermitian_eigenvalues_with(m, &Tolerances::default())
}

pub fn hermitian_eigenvalues_with(m: &ComplexMatrix, tol: &Tolerances) -> Result<Vec<f64>> {
    check_hermitian(m, tol.hermitian)?;
    let n = m.dim();
    let emb = symmetric_eigen(&embed(&m.hermitize()), 2 * n, tol.jacobi);
    Ok((0..n)
        .map(|k| 0.5 * (emb.values[2 * k] + emb.values[2 * k + 1]))
        .collect())
}

/// Kronecker product (free-function form).
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.kron(b)
}

/// Square root of a PSD matrix; negative eigenvalues are clamped to zero.
pub fn sqrt_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(hermitian_eigen(m)?.map_spectrum(|x| x.max(0.0).sqrt()))
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    inner: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::new_with(m, &Tolerances::default())
    }

    pub fn new_with(m: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        let res = m.hermitian_residual();
        if res > tol.hermitian || res.is_nan() {
            return Err(Error::InvalidState(format!(
                "not Hermitian (residual {res:e})"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > tol.trace || tr.im.abs() > tol.trace_imag {
            return Err(Error::InvalidState(format!(
                "trace {:.12}{:+.3e}i is not 1",
                tr.re, tr.im
            )));
        }
        let min = hermitian_eigenvalues_with(&m, tol)?[0];
        if min < -tol.psd {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (min eigenvalue {min:e})"
            )));
        }
        Ok(DensityMatrix { inner: m })
    }

    /// Wraps a matrix that is valid by construction. Callers inside the crate
    /// use this for closed-form states whose validity is covered by tests.
    pub(crate) fn from_trusted(m: ComplexMatrix) -> Self {
        debug_assert!(m.hermitian_residual() <= 1e-9);
        DensityMatrix { inner: m }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.inner
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.inner).expect("density matrix is Hermitian")
    }

    pub fn to_json(&self) -> String {
        DensityMatrixFile::from_matrix(&self.inner).to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DensityMatrixFile =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        Self::new(file.into_matrix()?)
    }
}

impl AsRef<ComplexMatrix> for DensityMatrix {
    fn as_ref(&self) -> &ComplexMatrix {
        &self.inner
    }
}

/// On-disk density-matrix representation: full row-major real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixFile {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl DensityMatrixFile {
    /// Entries are rounded to 9 significant digits.
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let n = m.dim();
        let re = (0..n)
            .map(|i| (0..n).map(|j| round_sig(m[(i, j)].re)).collect())
            .collect();
        let im = (0..n)
            .map(|i| (0..n).map(|j| round_sig(m[(i, j)].im)).collect())
            .collect();
        DensityMatrixFile { dim: n, re, im }
    }

    pub fn into_matrix(self) -> Result<ComplexMatrix> {
        let n = self.dim;
        let shape_ok = self.re.len() == n
            && self.im.len() == n
            && self.re.iter().chain(&self.im).all(|r| r.len() == n);
        if !shape_ok {
            return Err(Error::BadShape(format!(
                "density-matrix file declares dim {n} but arrays disagree"
            )));
        }
        let rows: Vec<Vec<C64>> = self
            .re
            .iter()
            .zip(&self.im)
            .map(|(r, i)| r.iter().zip(i).map(|(&a, &b)| C64::new(a, b)).collect())
            .collect();
        ComplexMatrix::from_rows(&rows)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data always serializes")
    }
}

/// Singular values in descending order, from the eigenvalues of the
/// Hermitian dilation `[[0, M], [M^dagger, 0]]`. Small singular values come
/// out with absolute (not square-root) accuracy.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    let n = m.dim();
    let dil = ComplexMatrix::from_fn(2 * n, |i, j| match (i < n, j < n) {
        (true, false) => m[(i, j - n)],
        (false, true) => m[(j, i - n)].conj(),
        _ => C64::new(0.0, 0.0),
    });
    let ev = hermitian_eigenvalues(&dil).expect("dilation is Hermitian by construction");
    ev.into_iter().rev().take(n).map(|x| x.max(0.0)).collect()
}

/// Uhlmann fidelity `(Tr |sqrt(a) sqrt(b)|)²`.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch(a.dim(), b.dim()));
    }
    FidelityReference::new(a)?.fidelity_to(b.matrix())
}

/// Bures distance `sqrt(2 (1 - sqrt(F)))`.
pub fn bures_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    Ok(bures_from_fidelity(fidelity(a, b)?))
}

pub fn bures_from_fidelity(f: f64) -> f64 {
    (2.0 * (1.0 - f.clamp(0.0, 1.0).sqrt())).max(0.0).sqrt()
}

/// Caches `sqrt(a)` for repeated fidelities against one state (the fitting
/// loop evaluates thousands).
#[derive(Debug, Clone)]
pub struct FidelityReference {
    sqrt: ComplexMatrix,
}

impl FidelityReference {
    pub fn new(a: &DensityMatrix) -> Result<Self> {
        Ok(FidelityReference {
            sqrt: sqrt_psd(a.matrix())?,
        })
    }

    /// Fidelity to `b`, which must be a density matrix of the same dimension.
    pub fn fidelity_to(&self, b: &ComplexMatrix) -> Result<f64> {
        if b.dim() != self.sqrt.dim() {
            return Err(Error::DimMismatch(self.sqrt.dim(), b.dim()));
        }
        let product = &self.sqrt * &sqrt_psd(b)?;
        let nuclear: f64 = singular_values(&product).into_iter().sum();
        Ok((nuclear * nuclear).clamp(0.0, 1.0))
    }
}
