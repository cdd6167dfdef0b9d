//! Dense complex linear algebra at desk scale (dimensions up to 4096).
//!
//! Matrices are stored row-major. Everything here is a pure function over
//! immutable inputs; results are freshly allocated.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Largest matrix dimension accepted by the dense routines.
pub const MAX_DIM: usize = 4096;

/// Hermiticity tolerance on ‖h − h†‖_max.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Unitarity tolerance on ‖U†U − I‖_max.
pub const UNITARY_TOL: f64 = 1e-10;

/// Tolerance used when validating density matrices (PSD and trace checks).
pub const DENSITY_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),
    #[error("zero vector")]
    ZeroVector,
}

pub const fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinalgError::DimensionMismatch("ragged rows".into()));
        }
        Self::from_vec(r, c, rows.iter().flatten().copied().collect())
    }

    /// Convenience constructor for small literal matrices with real entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), rows * cols);
        CMatrix { rows, cols, data: entries.iter().map(|&x| C64::new(x, 0.0)).collect() }
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
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

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn adjoint(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn one_norm(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_residual(&self) -> f64 {
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
        self.hermiticity_residual() < tol
    }

    pub fn unitarity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.adjoint() * self).max_abs_diff(&CMatrix::identity(self.rows))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_residual() < tol
    }

    pub fn mul_vec(&self, v: &CVector) -> CVector {
        assert_eq!(self.cols, v.dim(), "matrix-vector dimension mismatch");
        let data = (0..self.rows)
            .map(|i| self.row(i).iter().zip(v.as_slice()).map(|(a, b)| a * b).sum())
            .collect();
        CVector::from_vec(data)
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> CMatrix {
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[(i, j)] = m[(i, j)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> =
                self.row(i).iter().map(|z| format!("{:+.4}{:+.4}i", z.re, z.im)).collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CVector {
    data: Vec<C64>,
}

impl CVector {
    pub fn from_vec(data: Vec<C64>) -> Self {
        CVector { data }
    }

    pub fn zeros(dim: usize) -> Self {
        CVector { data: vec![C64::new(0.0, 0.0); dim] }
    }

    /// Computational basis vector |index⟩.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.data[index] = C64::new(1.0, 0.0);
        v
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() < tol
    }

    pub fn normalized(&self) -> Result<CVector, LinalgError> {
        let n = self.norm();
        if n == 0.0 {
            return Err(LinalgError::ZeroVector);
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    /// ⟨self|other⟩ (conjugate-linear in `self`).
    pub fn inner(&self, other: &CVector) -> C64 {
        assert_eq!(self.dim(), other.dim(), "inner product dimension mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scale(&self, s: C64) -> CVector {
        CVector { data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn add_scaled(&mut self, s: C64, other: &CVector) {
        assert_eq!(self.dim(), other.dim());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn max_abs_diff(&self, other: &CVector) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// |self⟩⟨self|
    pub fn outer(&self) -> CMatrix {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.data[i] * self.data[j].conj();
            }
        }
        m
    }

    /// ⟨self|m|self⟩
    pub fn quadratic_form(&self, m: &CMatrix) -> C64 {
        self.inner(&m.mul_vec(self))
    }
}

impl Index<usize> for CVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for CVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.data[i]
    }
}

/// Kronecker product; `kron(a, b)[(i·rb + k, j·cb + l)] = a[i,j]·b[k,l]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (rb, cb) = (b.rows, b.cols);
    let mut out = CMatrix::zeros(a.rows * rb, a.cols * cb);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let x = a[(i, j)];
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = x * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let mut data = Vec::with_capacity(a.dim() * b.dim());
    for x in a.as_slice() {
        data.extend(b.as_slice().iter().map(|y| x * y));
    }
    CVector::from_vec(data)
}

/// Hermitian eigendecomposition: eigenvalues ascending, eigenvectors as the
/// columns of a unitary matrix.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigh {
    /// V·f(Λ)·V† for a scalar function applied to the spectrum.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fj = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        &scaled * &self.vectors.adjoint()
    }

    pub fn eigenvector(&self, k: usize) -> CVector {
        CVector::from_vec((0..self.vectors.rows()).map(|i| self.vectors[(i, k)]).collect())
    }
}

pub fn eigh(h: &CMatrix) -> Result<Eigh, LinalgError> {
    if !h.is_square() {
        return Err(LinalgError::DimensionMismatch(format!("eigh of {}x{}", h.rows, h.cols)));
    }
    let residual = h.hermiticity_residual();
    if residual >= HERMITIAN_TOL {
        return Err(LinalgError::NotHermitian(residual));
    }
    let n = h.rows;
    if n == 0 {
        return Ok(Eigh { values: vec![], vectors: CMatrix::zeros(0, 0) });
    }
    // Symmetrize so the solver sees an exactly Hermitian input.
    let mut sym = h.clone();
    for i in 0..n {
        sym[(i, i)] = C64::new(h[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
            sym[(i, j)] = avg;
            sym[(j, i)] = avg.conj();
        }
    }
    let decomposition = sym.to_nalgebra().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| decomposition.eigenvalues[a].total_cmp(&decomposition.eigenvalues[b]));
    let values = order.iter().map(|&k| decomposition.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, col)] = decomposition.eigenvectors[(i, k)];
        }
    }
    Ok(Eigh { values, vectors })
}

/// exp(−i·h·t) for Hermitian `h` and real `t`, computed through the spectrum
/// so that the result is unitary to machine precision.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> Result<CMatrix, LinalgError> {
    let e = eigh(h)?;
    Ok(e.reconstruct_with(|lambda| C64::from_polar(1.0, -lambda * t)))
}

/// exp(scale·a) by scaling and squaring with a truncated Taylor series.
///
/// When `a` is Hermitian and `scale` is purely imaginary the spectral path
/// is taken instead, which keeps long products of propagators unitary.
pub fn matexp(a: &CMatrix, scale: C64) -> Result<CMatrix, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::DimensionMismatch(format!("matexp of {}x{}", a.rows, a.cols)));
    }
    let n = a.rows;
    if n > MAX_DIM {
        return Err(LinalgError::DimensionMismatch(format!("dimension {n} exceeds {MAX_DIM}")));
    }
    if scale == C64::new(0.0, 0.0) {
        return Ok(CMatrix::identity(n));
    }
    if scale.re == 0.0 && a.hermiticity_residual() < 1e-14 {
        return expm_hermitian(a, -scale.im);
    }
    Ok(taylor_expm(&a.scale(scale)))
}

fn taylor_expm(x: &CMatrix) -> CMatrix {
    let n = x.rows;
    let norm = x.one_norm();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let reduced = x.scale(C64::new(0.5f64.powi(squarings), 0.0));

    let mut result = CMatrix::identity(n);
    let mut term = CMatrix::identity(n);
    for k in 1..64 {
        term = (&term * &reduced).scale(C64::new(1.0 / k as f64, 0.0));
        result = &result + &term;
        if term.max_abs() < 1e-17 * result.max_abs().max(1.0) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// ⟨ψ|ρ|ψ⟩ for a density matrix ρ and a normalized pure target ψ.
pub fn pure_state_fidelity(rho: &CMatrix, psi: &CVector) -> Result<f64, LinalgError> {
    check_density_matrix(rho)?;
    if rho.rows != psi.dim() {
        return Err(LinalgError::DimensionMismatch(format!(
            "rho is {}x{}, psi has dim {}",
            rho.rows,
            rho.cols,
            psi.dim()
        )));
    }
    if !psi.is_normalized(1e-10) {
        return Err(LinalgError::NotDensityMatrix("target state is not normalized".into()));
    }
    Ok(psi.quadratic_form(rho).re)
}

pub fn check_density_matrix(rho: &CMatrix) -> Result<(), LinalgError> {
    if !rho.is_square() {
        return Err(LinalgError::NotDensityMatrix("not square".into()));
    }
    let herm = rho.hermiticity_residual();
    if herm > DENSITY_TOL {
        return Err(LinalgError::NotDensityMatrix(format!("hermiticity residual {herm:.3e}")));
    }
    let tr = rho.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > DENSITY_TOL {
        return Err(LinalgError::NotDensityMatrix(format!("trace {tr}")));
    }
    let min_eig = eigh(&hermitian_part(rho))?.values[0];
    if min_eig < -DENSITY_TOL {
        return Err(LinalgError::NotDensityMatrix(format!("minimum eigenvalue {min_eig:.3e}")));
    }
    Ok(())
}

/// (m + m†)/2
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + &m.adjoint()).scale(C64::new(0.5, 0.0))
}

/// Closest unit-trace PSD matrix in Frobenius norm (Smolin–Gambetta–Smith):
/// after trace normalization, the most negative eigenvalues are zeroed one
/// at a time and their mass is shared evenly among the rest. Only used for
/// reporting.
pub fn clip_to_physical(rho: &CMatrix) -> Result<CMatrix, LinalgError> {
    let h = hermitian_part(rho);
    let trace = h.trace().re;
    if trace <= 0.0 {
        return Err(LinalgError::NotDensityMatrix(format!("trace {trace:.3e} is not positive")));
    }
    let e = eigh(&h)?;
    let n = e.values.len();
    let mut lam: Vec<f64> = e.values.iter().map(|x| x / trace).collect();
    let mut deficit = 0.0;
    let mut k = 0;
    while k < n && lam[k] + deficit / ((n - k) as f64) < 0.0 {
        deficit += lam[k];
        lam[k] = 0.0;
        k += 1;
    }
    let share = deficit / (n - k) as f64;
    for l in &mut lam[k..] {
        *l += share;
    }
    let mut scaled = e.vectors.clone();
    for (j, l) in lam.iter().enumerate() {
        for i in 0..n {
            scaled[(i, j)] *= l;
        }
    }
    Ok(&scaled * &e.vectors.adjoint())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FidelityConvention {
    /// |⟨u|v⟩| / (‖u‖‖v‖)
    Overlap,
    /// |⟨u|v⟩|² / (‖u‖²‖v‖²)
    #[default]
    OverlapSquared,
}

pub fn vector_fidelity(
    u: &CVector,
    v: &CVector,
    convention: FidelityConvention,
) -> Result<f64, LinalgError> {
    if u.dim() != v.dim() {
        return Err(LinalgError::DimensionMismatch(format!("{} vs {}", u.dim(), v.dim())));
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(LinalgError::ZeroVector);
    }
    let overlap = u.inner(v).norm() / (nu * nv);
    Ok(match convention {
        FidelityConvention::Overlap => overlap,
        FidelityConvention::OverlapSquared => overlap * overlap,
    })
}

/// Single-qubit Pauli matrices and friends.
pub mod paulis {
    use super::{c64, CMatrix};

    pub fn identity() -> CMatrix {
        CMatrix::identity(2)
    }

    pub fn x() -> CMatrix {
        CMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])
    }

    pub fn y() -> CMatrix {
        CMatrix::from_vec(2, 2, vec![c64(0.0, 0.0), c64(0.0, -1.0), c64(0.0, 1.0), c64(0.0, 0.0)])
            .expect("2x2")
    }

    pub fn z() -> CMatrix {
        CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])
    }

    pub fn hadamard() -> CMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CMatrix::from_real(2, 2, &[s, s, s, -s])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    pub(crate) fn random_matrix(rng: &mut impl Rng, n: usize) -> CMatrix {
        let data = (0..n * n).map(|_| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        CMatrix::from_vec(n, n, data).unwrap()
    }

    fn random_hermitian(rng: &mut impl Rng, n: usize) -> CMatrix {
        hermitian_part(&random_matrix(rng, n))
    }

    #[test]
    fn kron_identities() {
        assert_eq!(kron(&paulis::identity(), &paulis::identity()), CMatrix::identity(4));
        let zx = kron(&paulis::z(), &paulis::x());
        let expected = CMatrix::from_real(
            4,
            4,
            &[0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 0., -1., 0., 0., -1., 0.],
        );
        assert_eq!(zx, expected);
        let hh = kron(&paulis::hadamard(), &paulis::hadamard());
        let out = hh.mul_vec(&CVector::basis(4, 0));
        for amp in out.as_slice() {
            assert!((amp - c64(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn kron_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let (a, b, c) = (random_matrix(&mut rng, 2), random_matrix(&mut rng, 2), random_matrix(&mut rng, 2));
            let left = kron(&kron(&a, &b), &c);
            let right = kron(&a, &kron(&b, &c));
            assert!(left.max_abs_diff(&right) < 1e-12);
        }
    }

    #[test]
    fn eigh_pauli_and_gamma_hamiltonian() {
        let e = eigh(&paulis::z()).unwrap();
        assert_eq!(e.values, vec![-1.0, 1.0]);
        let h = &CMatrix::identity(2).scale(c64(2.0, 0.0)) + &paulis::x();
        let e = eigh(&h).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let m = CMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(eigh(&m), Err(LinalgError::NotHermitian(_))));
    }

    #[test]
    fn eigh_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 3, 5, 8, 16] {
            let h = random_hermitian(&mut rng, n);
            let e = eigh(&h).unwrap();
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            let back = e.reconstruct_with(|x| c64(x, 0.0));
            assert!(back.max_abs_diff(&h) < 1e-9, "n={n}");
            assert!(e.vectors.is_unitary(1e-10));
        }
    }

    #[test]
    fn matexp_closed_forms() {
        let a = random_matrix(&mut ChaCha8Rng::seed_from_u64(3), 3);
        assert_eq!(matexp(&a, c64(0.0, 0.0)).unwrap(), CMatrix::identity(3));

        let r = matexp(&paulis::x(), c64(0.0, -PI / 2.0)).unwrap();
        assert!(r.max_abs_diff(&paulis::x().scale(c64(0.0, -1.0))) < 1e-14);

        // Generic (non-Hermitian scale) path: exp(−1.5·H(1)) has spectrum e^{−4.5}, e^{−1.5}.
        let h = &CMatrix::identity(2).scale(c64(2.0, 0.0)) + &paulis::x();
        let r = matexp(&h, c64(-1.5, 0.0)).unwrap();
        let spectrum = eigh(&r).unwrap().values;
        assert!((spectrum[0] - (-4.5f64).exp()).abs() < 1e-14);
        assert!((spectrum[1] - (-1.5f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn matexp_taylor_agrees_with_spectral_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [2, 4, 8] {
            let h = random_hermitian(&mut rng, n).scale(c64(3.0, 0.0));
            let spectral = expm_hermitian(&h, 0.7).unwrap();
            let taylor = taylor_expm(&h.scale(c64(0.0, -0.7)));
            assert!(spectral.max_abs_diff(&taylor) < 1e-12);
            assert!(spectral.is_unitary(1e-12));
        }
    }

    #[test]
    fn matexp_group_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 4);
            let once = matexp(&a, c64(1.0, 0.0)).unwrap();
            let twice = matexp(&a, c64(2.0, 0.0)).unwrap();
            let sq = &once * &once;
            assert!(sq.max_abs_diff(&twice) < 1e-9 * twice.max_abs().max(1.0));
        }
    }

    #[test]
    fn fidelities() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let ghz2 = CVector::from_vec(vec![c64(s, 0.), c64(0., 0.), c64(0., 0.), c64(s, 0.)]);
        assert!((pure_state_fidelity(&ghz2.outer(), &ghz2).unwrap() - 1.0).abs() < 1e-15);
        let mixed = CMatrix::identity(4).scale(c64(0.25, 0.0));
        assert!((pure_state_fidelity(&mixed, &ghz2).unwrap() - 0.25).abs() < 1e-15);
        let not_rho = CMatrix::identity(4);
        assert!(matches!(pure_state_fidelity(&not_rho, &ghz2), Err(LinalgError::NotDensityMatrix(_))));

        let u = CVector::basis(2, 0);
        let v = CVector::basis(2, 1);
        assert_eq!(vector_fidelity(&u, &u, FidelityConvention::Overlap).unwrap(), 1.0);
        assert_eq!(vector_fidelity(&u, &v, FidelityConvention::OverlapSquared).unwrap(), 0.0);
        assert_eq!(vector_fidelity(&u, &CVector::zeros(2), FidelityConvention::Overlap), Err(LinalgError::ZeroVector));
    }

    #[test]
    fn clipping_keeps_physical_states() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = CVector::from_vec(vec![c64(s, 0.), c64(0., s)]);
        let rho = psi.outer();
        assert!(clip_to_physical(&rho).unwrap().max_abs_diff(&rho) < 1e-14);
        let noisy = CMatrix::from_real(2, 2, &[1.1, 0.0, 0.0, -0.1]);
        let fixed = clip_to_physical(&noisy).unwrap();
        assert!(fixed.max_abs_diff(&CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0])) < 1e-14);
        let spread = clip_to_physical(&CMatrix::from_real(3, 3, &[0.6, 0., 0., 0., 0.5, 0., 0., 0., -0.1])).unwrap();
        assert!((spread[(0, 0)] - 0.55).norm() < 1e-14 && (spread[(1, 1)] - 0.45).norm() < 1e-14);
    }
}
