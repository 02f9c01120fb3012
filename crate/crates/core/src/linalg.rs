//! Dense complex linear algebra for small Hilbert spaces.
//!
//! Everything here works on dense row-major storage and is meant for
//! desk-scale dimensions (tens, not thousands). All tolerance checks use the
//! max-absolute-entry norm `‖A‖_max = max |a_ij|`.

use std::fmt;
use std::ops::{Add, Index, Mul, Sub};

pub use num_complex::Complex64 as C64;
use thiserror::Error;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrices and kets need at least one row and one column")]
    Empty,
    #[error("expected {expected} entries, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix is not Hermitian (residual {residual:e})")]
    NotHermitian { residual: f64 },
    #[error("tolerance `{name}` = {value} is outside [0, 1e-3]")]
    InvalidTolerance { name: &'static str, value: f64 },
    #[error("Hermitian eigensolver did not converge")]
    EigenFailed,
}

pub type Result<T, E = LinalgError> = std::result::Result<T, E>;

/// Numerical tolerances used by every predicate in the crate.
///
/// * `norm` - ket normalization `|⟨ψ|ψ⟩ - 1|`
/// * `herm` - Hermiticity, unitarity and eigenvalue clustering
/// * `proj` - idempotence, orthogonality, completeness and zero-product detection
/// * `comm` - commutator residuals
/// * `cons` - off-diagonal chain-ket overlaps
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    norm: f64,
    herm: f64,
    proj: f64,
    comm: f64,
    cons: f64,
}

pub const DEFAULT_EPSILON: f64 = 1e-9;
const MAX_EPSILON: f64 = 1e-3;

impl Default for Tolerance {
    fn default() -> Self {
        Self::uniform(DEFAULT_EPSILON).expect("default tolerance is valid")
    }
}

impl Tolerance {
    pub fn new(norm: f64, herm: f64, proj: f64, comm: f64, cons: f64) -> Result<Self> {
        let tol = Tolerance {
            norm,
            herm,
            proj,
            comm,
            cons,
        };
        for (name, value) in tol.named() {
            if !(0.0..=MAX_EPSILON).contains(&value) {
                return Err(LinalgError::InvalidTolerance { name, value });
            }
        }
        Ok(tol)
    }

    pub fn uniform(eps: f64) -> Result<Self> {
        Self::new(eps, eps, eps, eps, eps)
    }

    pub fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("eps_norm", self.norm),
            ("eps_herm", self.herm),
            ("eps_proj", self.proj),
            ("eps_comm", self.comm),
            ("eps_cons", self.cons),
        ]
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }
    pub fn herm(&self) -> f64 {
        self.herm
    }
    pub fn proj(&self) -> f64 {
        self.proj
    }
    pub fn comm(&self) -> f64 {
        self.comm
    }
    pub fn cons(&self) -> f64 {
        self.cons
    }
}

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

fn check_finite(data: &[C64]) -> Result<()> {
    match data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        Some(index) => Err(LinalgError::NonFinite { index }),
        None => Ok(()),
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::Empty);
        }
        if data.len() != rows * cols {
            return Err(LinalgError::BadLength {
                expected: rows * cols,
                got: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(ComplexMatrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows; every row must have the same length.
    pub fn from_rows<R: AsRef<[C64]>>(rows: &[R]) -> Result<Self> {
        let ncols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != ncols {
                return Err(LinalgError::BadLength {
                    expected: ncols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), ncols, data)
    }

    /// Real-valued matrix from row-major entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(rows, cols, entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        ComplexMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn diagonal(entries: &[C64]) -> Result<Self> {
        if entries.is_empty() {
            return Err(LinalgError::Empty);
        }
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &z) in entries.iter().enumerate() {
            m.data[i * n + i] = z;
        }
        check_finite(&m.data)?;
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    fn require_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    fn require_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(LinalgError::DimMismatch {
                left: self.shape(),
                right: other.shape(),
            })
        }
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(LinalgError::DimMismatch {
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = vec![ZERO; self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                let orow = &mut out[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: other.cols,
            data: out,
        })
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.require_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.require_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * factor).collect(),
        }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.data[r * self.cols + c].conj());
            }
        }
        ComplexMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols))
            .map(|i| self.data[i * self.cols + i])
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `‖self - other‖_max`; panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, eps: f64) -> bool {
        self.shape() == other.shape() && self.max_abs_diff(other) <= eps
    }

    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut data = vec![ZERO; rows * cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.data[i * self.cols + j];
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        data[(i * other.rows + k) * cols + j * other.cols + l] = a * other.data[k * other.cols + l];
                    }
                }
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    pub fn apply(&self, ket: &Ket) -> Result<Ket> {
        if self.cols != ket.dim() {
            return Err(LinalgError::DimMismatch {
                left: self.shape(),
                right: (ket.dim(), 1),
            });
        }
        let amplitudes = (0..self.rows)
            .map(|r| self.row(r).iter().zip(ket.amplitudes()).map(|(a, b)| a * b).sum())
            .collect();
        Ok(Ket { amplitudes })
    }

    /// `‖A - A†‖_max`, or an error for non-square input.
    pub fn hermitian_residual(&self) -> Result<f64> {
        self.require_square()?;
        Ok(self.max_abs_diff(&self.dagger()))
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        assert!(r < self.rows && c < self.cols, "index out of bounds");
        &self.data[r * self.cols + c]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.checked_mul(rhs).expect("matrix product shape mismatch")
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.checked_add(rhs).expect("matrix sum shape mismatch")
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.checked_sub(rhs).expect("matrix difference shape mismatch")
    }
}

/// A state vector. Not necessarily normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amplitudes: Vec<C64>,
}

impl Ket {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(LinalgError::Empty);
        }
        check_finite(&amplitudes)?;
        Ok(Ket { amplitudes })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zero(dim: usize) -> Self {
        assert!(dim > 0, "empty ket");
        Ket {
            amplitudes: vec![ZERO; dim],
        }
    }

    /// Computational basis vector `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index out of range");
        let mut k = Self::zero(dim);
        k.amplitudes[index] = ONE;
        k
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Ket) -> C64 {
        assert_eq!(self.dim(), other.dim(), "ket dimension mismatch");
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_normalized(&self, tol: &Tolerance) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol.norm()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Ket> {
        let n = self.norm_sqr().sqrt();
        (n > 0.0).then(|| self.scale(C64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, factor: C64) -> Ket {
        Ket {
            amplitudes: self.amplitudes.iter().map(|&z| z * factor).collect(),
        }
    }

    pub fn tensor(&self, other: &Ket) -> Ket {
        let mut amplitudes = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        Ket { amplitudes }
    }

    /// `|ψ⟩⟨ψ|` without normalization.
    pub fn outer(&self) -> ComplexMatrix {
        let n = self.dim();
        let mut data = Vec::with_capacity(n * n);
        for a in &self.amplitudes {
            for b in &self.amplitudes {
                data.push(a * b.conj());
            }
        }
        ComplexMatrix { rows: n, cols: n, data }
    }

    pub fn max_abs_diff(&self, other: &Ket) -> f64 {
        assert_eq!(self.dim(), other.dim(), "ket dimension mismatch");
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
}

pub fn sigma_y() -> ComplexMatrix {
    ComplexMatrix::new(2, 2, vec![ZERO, -I, I, ZERO]).unwrap()
}

pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]).unwrap()
}

/// Kronecker product `a ⊗ b`.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

pub fn dagger(a: &ComplexMatrix) -> ComplexMatrix {
    a.dagger()
}

/// Places `op` on factor `factor` (0-based) of a tensor product space with the
/// given factor dimensions, with identities elsewhere.
pub fn embed_operator(op: &ComplexMatrix, factor: usize, dims: &[usize]) -> Result<ComplexMatrix> {
    let size = op.require_square()?;
    match dims.get(factor) {
        Some(&d) if d == size => {}
        Some(&d) => {
            return Err(LinalgError::DimMismatch {
                left: op.shape(),
                right: (d, d),
            })
        }
        None => return Err(LinalgError::Empty),
    }
    let before: usize = dims[..factor].iter().product();
    let after: usize = dims[factor + 1..].iter().product();
    Ok(ComplexMatrix::identity(before)
        .kron(op)
        .kron(&ComplexMatrix::identity(after)))
}

pub fn is_hermitian(h: &ComplexMatrix, tol: &Tolerance) -> Result<bool> {
    Ok(h.hermitian_residual()? <= tol.herm())
}

/// Hermitian within `eps_herm` and idempotent within `eps_proj`.
pub fn is_projector(p: &ComplexMatrix, tol: &Tolerance) -> Result<bool> {
    if p.hermitian_residual()? > tol.herm() {
        return Ok(false);
    }
    Ok((p * p).max_abs_diff(p) <= tol.proj())
}

pub fn is_unitary(u: &ComplexMatrix, tol: &Tolerance) -> Result<bool> {
    let n = u.require_square()?;
    Ok((&u.dagger() * u).max_abs_diff(&ComplexMatrix::identity(n)) <= tol.herm())
}

/// `ab - ba`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.require_square()?;
    b.require_square()?;
    a.require_same_shape(b)?;
    Ok(&(a * b) - &(b * a))
}

/// One distinct eigenvalue together with the projector onto its eigenspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenprojector {
    pub value: f64,
    pub projector: ComplexMatrix,
}

/// Spectral decomposition of a Hermitian matrix into distinct eigenvalues
/// (ascending) and eigenspace projectors.
///
/// Eigenvalues closer than `eps_herm` to their neighbour are merged into one
/// cluster whose projector is the sum of the member projectors and whose value
/// is the cluster mean.
pub fn hermitian_eigenprojectors(h: &ComplexMatrix, tol: &Tolerance) -> Result<Vec<Eigenprojector>> {
    let n = h.require_square()?;
    let residual = h.hermitian_residual()?;
    if residual > tol.herm() {
        return Err(LinalgError::NotHermitian { residual });
    }
    // exact symmetrization so the solver sees a Hermitian input
    let sym = (h + &h.dagger()).scale(C64::new(0.5, 0.0));
    let m = nalgebra::DMatrix::from_row_slice(n, n, sym.entries());
    let eig = m
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(LinalgError::EigenFailed)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for idx in order {
        let value = eig.eigenvalues[idx];
        match clusters.last_mut() {
            Some(cluster) if value - prev <= tol.herm() => cluster.push(idx),
            _ => clusters.push(vec![idx]),
        }
        prev = value;
    }

    Ok(clusters
        .into_iter()
        .map(|members| {
            let value = members.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / members.len() as f64;
            let mut projector = ComplexMatrix::zeros(n, n);
            for &i in &members {
                let v = Ket {
                    amplitudes: eig.eigenvectors.column(i).iter().copied().collect(),
                };
                projector = &projector + &v.outer();
            }
            Eigenprojector { value, projector }
        })
        .collect())
}
