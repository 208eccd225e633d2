//! Dense linear-algebra kernels shared by every estimator.
//!
//! All routines are deterministic functions of their inputs. Matrices are
//! `nalgebra` dynamic matrices of `f64`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::linalg::{Cholesky, SymmetricEigen};
use nalgebra::{DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative singular-value cutoff for full column rank.
pub const RANK_TOL: f64 = 1e-12;

/// Largest admissible condition estimate for the inner Woodbury solves.
pub const MAX_CONDITION: f64 = 1e14;

pub(crate) fn check_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

/// Fails with `RankDeficient` unless `m` has full column rank.
pub fn check_full_column_rank(m: &Matrix, what: &str) -> Result<()> {
    let cols = m.ncols();
    if cols == 0 {
        return Ok(());
    }
    if m.nrows() < cols {
        return Err(Error::rank(format!(
            "{what}: {} rows cannot support {cols} columns",
            m.nrows()
        )));
    }
    // Column-pivoted QR: |r_jj| is non-increasing and tracks the singular
    // values closely enough for a rank decision.
    let qr = m.clone().col_piv_qr();
    let r = qr.unpack_r();
    let max = r[(0, 0)].abs();
    let min = r[(cols - 1, cols - 1)].abs();
    if !(max > 0.0) || min / max < RANK_TOL {
        return Err(Error::rank(format!(
            "{what}: pivoted R diagonal ratio {:e}",
            if max > 0.0 { min / max } else { 0.0 }
        )));
    }
    Ok(())
}

pub fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_extremes(m: &Matrix) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let ev = m.symmetric_eigenvalues();
    (ev.min(), ev.max())
}

/// Orthonormal basis of the orthogonal complement of the column space of a
/// `T×S` matrix `D`, stored as a `T×(T−S)` matrix `D⊥` with `D⊥ᵀD⊥ = I` and
/// `D⊥D⊥ᵀ = I − D(DᵀD)⁻¹Dᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoComplement {
    source_cols: usize,
    basis: Matrix,
}

impl OrthoComplement {
    /// The trivial complement of an empty `T×0` matrix: `D⊥ = I_T`.
    pub fn identity(t: usize) -> Self {
        OrthoComplement {
            source_cols: 0,
            basis: Matrix::identity(t, t),
        }
    }

    /// Wraps a caller-supplied basis after checking it against `d`.
    pub fn from_basis(d: &Matrix, basis: Matrix) -> Result<Self> {
        let t = d.nrows();
        let s = d.ncols();
        if basis.nrows() != t || basis.ncols() + s != t {
            return Err(Error::dim(format!(
                "complement basis is {}x{}, expected {}x{}",
                basis.nrows(),
                basis.ncols(),
                t,
                t - s
            )));
        }
        let gram = basis.tr_mul(&basis) - Matrix::identity(t - s, t - s);
        let cross = basis.tr_mul(d);
        if gram.amax() > 1e-10 || (s > 0 && cross.amax() > 1e-10 * d.amax().max(1.0)) {
            return Err(Error::dim("basis is not an orthonormal complement of D"));
        }
        Ok(OrthoComplement {
            source_cols: s,
            basis,
        })
    }

    pub fn source_cols(&self) -> usize {
        self.source_cols
    }

    /// `T`, the length of the original series.
    pub fn len(&self) -> usize {
        self.basis.nrows()
    }

    /// `T − S`, the length of the transformed series.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.ncols() == 0
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    /// `D⊥ᵀ z` for each column `z` of `m`.
    pub fn reduce(&self, m: &Matrix) -> Matrix {
        if self.source_cols == 0 {
            return m.clone();
        }
        self.basis.tr_mul(m)
    }

    /// `D⊥ w` for each column `w` of `m`.
    pub fn expand(&self, m: &Matrix) -> Matrix {
        if self.source_cols == 0 {
            return m.clone();
        }
        &self.basis * m
    }

    /// The annihilator `M_D = D⊥D⊥ᵀ`.
    pub fn annihilator(&self) -> Matrix {
        &self.basis * self.basis.transpose()
    }
}

/// Builds a deterministic orthonormal basis of the null space of `Dᵀ`.
///
/// The basis is the trailing `T−S` columns of the full Householder `Q` of
/// `D`; each column is then sign-normalised so that its first entry that is
/// not numerically zero is positive.
pub fn ortho_complement(d: &Matrix) -> Result<OrthoComplement> {
    let t = d.nrows();
    let s = d.ncols();
    if s == 0 {
        return Ok(OrthoComplement::identity(t));
    }
    if s >= t {
        return Err(Error::dim(format!(
            "common regressors have {s} columns but only {t} rows; complement is empty"
        )));
    }
    check_finite(d, "common regressor matrix")?;
    check_full_column_rank(d, "common regressor matrix")?;

    // Householder QR of D, reflectors stored as unit vectors on rows k..t.
    let mut a = d.clone();
    let mut reflectors: Vec<Vector> = Vec::with_capacity(s);
    for k in 0..s {
        let mut v = Vector::zeros(t - k);
        for r in k..t {
            v[r - k] = a[(r, k)];
        }
        let norm = v.norm();
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm = v.norm();
        if vnorm > 0.0 {
            v /= vnorm;
        }
        for c in k..s {
            let mut dot = 0.0;
            for r in k..t {
                dot += v[r - k] * a[(r, c)];
            }
            for r in k..t {
                a[(r, c)] -= 2.0 * v[r - k] * dot;
            }
        }
        reflectors.push(v);
    }

    // Q[:, s..] = H_0 H_1 ... H_{s-1} [0; I].
    let mut basis = Matrix::zeros(t, t - s);
    for j in 0..(t - s) {
        basis[(s + j, j)] = 1.0;
    }
    for (k, v) in reflectors.iter().enumerate().rev() {
        for c in 0..(t - s) {
            let mut dot = 0.0;
            for r in k..t {
                dot += v[r - k] * basis[(r, c)];
            }
            if dot != 0.0 {
                for r in k..t {
                    basis[(r, c)] -= 2.0 * v[r - k] * dot;
                }
            }
        }
    }

    for c in 0..(t - s) {
        let mut col = basis.column_mut(c);
        if let Some(first) = col.iter().copied().find(|x| x.abs() > 1e-12) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }

    Ok(OrthoComplement {
        source_cols: s,
        basis,
    })
}

/// How the `A` block of a Woodbury inversion is stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FullPart {
    Dense,
    /// Only the diagonal of `A` is read.
    Diagonal,
}

/// Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    pub fn new(m: &Matrix, what: &str) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::dim(format!("{what} is not square")));
        }
        Cholesky::new(m.clone())
            .map(|chol| SpdFactor { chol })
            .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// `A⁻¹ b`.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        self.chol.solve(b)
    }

    /// `L⁻¹ b` where `A = LLᵀ`.
    pub fn whiten(&self, b: &Matrix) -> Matrix {
        let mut out = b.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut out);
        out
    }

    pub fn inverse(&self) -> Matrix {
        let mut inv = self.chol.inverse();
        symmetrize(&mut inv);
        inv
    }
}

/// `(BCBᵀ + A)⁻¹` through `A⁻¹ − A⁻¹B(C⁻¹ + BᵀA⁻¹B)⁻¹BᵀA⁻¹`.
///
/// `A` is `n×n` SPD, `B` is `n×m`, `C` is `m×m` SPD. With
/// [`FullPart::Diagonal`] only the diagonal of `A` is used.
pub fn woodbury_inverse(a: &Matrix, b: &Matrix, c: &Matrix, full: FullPart) -> Result<Matrix> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || c.nrows() != m || c.ncols() != m {
        return Err(Error::dim(format!(
            "woodbury shapes A {}x{}, B {}x{}, C {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    let a_inv = match full {
        FullPart::Diagonal => {
            let diag = a.diagonal();
            let (lo, hi) = diag
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            if !(lo > 0.0) || hi / lo > MAX_CONDITION {
                return Err(Error::Singular("diagonal full part".into()));
            }
            Matrix::from_diagonal(&diag.map(|x| 1.0 / x))
        }
        FullPart::Dense => {
            let (lo, hi) = eigen_extremes(a);
            if !(lo > 0.0) || hi / lo > MAX_CONDITION {
                return Err(Error::Singular(format!(
                    "full part condition estimate {:e}",
                    if lo > 0.0 { hi / lo } else { f64::INFINITY }
                )));
            }
            SpdFactor::new(a, "full part")?.inverse()
        }
    };
    if m == 0 {
        return Ok(a_inv);
    }

    let c_factor = SpdFactor::new(c, "low-rank core")?;
    let (clo, chi) = eigen_extremes(c);
    if chi / clo > MAX_CONDITION {
        return Err(Error::Singular("low-rank core is ill-conditioned".into()));
    }
    let a_inv_b = &a_inv * b;
    let mut inner = c_factor.inverse() + b.tr_mul(&a_inv_b);
    symmetrize(&mut inner);
    let (ilo, ihi) = eigen_extremes(&inner);
    if !(ilo > 0.0) || ihi / ilo > MAX_CONDITION {
        return Err(Error::Singular("Woodbury capacitance matrix".into()));
    }
    let inner_factor = SpdFactor::new(&inner, "Woodbury capacitance matrix")?;
    let correction = &a_inv_b * inner_factor.solve(&a_inv_b.transpose());
    let mut out = a_inv - correction;
    symmetrize(&mut out);
    Ok(out)
}

/// Moore–Penrose inverse of `ABAᵀ` for `A` of full column rank `m` and `B`
/// SPD: `A(AᵀA)⁻¹B⁻¹(AᵀA)⁻¹Aᵀ`.
pub fn pinv_sandwich(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let m = a.ncols();
    if b.nrows() != m || b.ncols() != m {
        return Err(Error::dim(format!(
            "sandwich core is {}x{}, expected {m}x{m}",
            b.nrows(),
            b.ncols()
        )));
    }
    check_full_column_rank(a, "sandwich outer factor")?;
    let gram = SpdFactor::new(&a.tr_mul(a), "AᵀA")?;
    let b_inv = SpdFactor::new(b, "sandwich core")?.inverse();
    // A(AᵀA)⁻¹, n×m
    let left = gram.solve(&a.transpose()).transpose();
    let mut out = &left * b_inv * left.transpose();
    symmetrize(&mut out);
    Ok(out)
}

/// Pseudo-inverse of a symmetric matrix from its eigendecomposition, with
/// eigenvalues below `rel_tol·max|λ|` in absolute value dropped.
pub fn pinv_symmetric(m: &Matrix, rel_tol: f64) -> Result<Matrix> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::dim("pseudo-inverse input is not square"));
    }
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    let cutoff = rel_tol * eig.eigenvalues.amax();
    let mut out = Matrix::zeros(n, n);
    for j in 0..n {
        let lambda = eig.eigenvalues[j];
        if lambda.abs() > cutoff && lambda != 0.0 {
            let v = eig.eigenvectors.column(j);
            out += &v * v.transpose() / lambda;
        }
    }
    if !out.iter().all(|v| v.is_finite()) {
        return Err(Error::Singular("pseudo-inverse".into()));
    }
    symmetrize(&mut out);
    Ok(out)
}

/// Least-squares coefficients of `y` on the columns of `x` by normal
/// equations through a Cholesky factor.
pub(crate) fn least_squares(x: &Matrix, y: &Matrix) -> Result<Matrix> {
    let gram = SpdFactor::new(&x.tr_mul(x), "regressor cross-product")
        .map_err(|_| Error::rank("regressor cross-product is singular"))?;
    Ok(gram.solve(&x.tr_mul(y)))
}
