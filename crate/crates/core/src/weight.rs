//! GLS weight matrices.

use alloc::format;

use crate::error::{Error, Result};
use crate::linalg::{eigen_extremes, woodbury_inverse, FullPart, Matrix, SpdFactor};

/// Ratio below which a weight is not treated as positive definite when it is
/// factorized for a GLS solve.
const PD_RATIO: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum WeightKind {
    Identity,
    /// `U·core·Uᵀ + full`.
    Factored {
        lowrank: Matrix,
        core: Matrix,
        full: Matrix,
        full_part: FullPart,
    },
    Dense(Matrix),
}

/// A symmetric positive (semi)definite weight of order `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    dim: usize,
    kind: WeightKind,
    // set once the eigenvalue check has already been done
    checked: bool,
}

impl WeightMatrix {
    pub fn identity(dim: usize) -> Self {
        WeightMatrix {
            dim,
            kind: WeightKind::Identity,
            checked: true,
        }
    }

    pub fn dense(m: Matrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::dim("weight is not square"));
        }
        check_symmetric(&m)?;
        Ok(WeightMatrix {
            dim: m.nrows(),
            kind: WeightKind::Dense(m),
            checked: false,
        })
    }

    pub(crate) fn dense_checked(m: Matrix) -> Self {
        WeightMatrix {
            dim: m.nrows(),
            kind: WeightKind::Dense(m),
            checked: true,
        }
    }

    pub fn factored(lowrank: Matrix, core: Matrix, full: Matrix) -> Result<Self> {
        let dim = full.nrows();
        if full.ncols() != dim
            || lowrank.nrows() != dim
            || core.nrows() != lowrank.ncols()
            || core.ncols() != lowrank.ncols()
        {
            return Err(Error::dim(format!(
                "factored weight shapes U {}x{}, core {}x{}, full {}x{}",
                lowrank.nrows(),
                lowrank.ncols(),
                core.nrows(),
                core.ncols(),
                full.nrows(),
                full.ncols()
            )));
        }
        check_symmetric(&core)?;
        check_symmetric(&full)?;
        let diagonal = (0..dim).all(|r| (0..dim).all(|c| r == c || full[(r, c)] == 0.0));
        Ok(WeightMatrix {
            dim,
            kind: WeightKind::Factored {
                lowrank,
                core,
                full,
                full_part: if diagonal { FullPart::Diagonal } else { FullPart::Dense },
            },
            checked: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, WeightKind::Identity)
    }

    pub fn to_dense(&self) -> Matrix {
        match &self.kind {
            WeightKind::Identity => Matrix::identity(self.dim, self.dim),
            WeightKind::Factored {
                lowrank, core, full, ..
            } => lowrank * core * lowrank.transpose() + full,
            WeightKind::Dense(m) => m.clone(),
        }
    }

    /// Prepares `W⁻¹` for repeated application.
    pub fn solver(&self) -> Result<WeightSolver> {
        match &self.kind {
            WeightKind::Identity => Ok(WeightSolver::Identity),
            WeightKind::Factored {
                lowrank,
                core,
                full,
                full_part,
            } => Ok(WeightSolver::Inverse(woodbury_inverse(
                full, lowrank, core, *full_part,
            )?)),
            WeightKind::Dense(m) => {
                if !self.checked {
                    let (lo, hi) = eigen_extremes(m);
                    if !(lo > self.dim as f64 * PD_RATIO * hi) {
                        return Err(Error::SingularWeight {
                            min_eig: lo,
                            max_eig: hi,
                            step: None,
                        });
                    }
                }
                Ok(WeightSolver::Cholesky(SpdFactor::new(m, "GLS weight")?))
            }
        }
    }
}

fn check_symmetric(m: &Matrix) -> Result<()> {
    let scale = m.amax().max(1.0);
    let n = m.nrows();
    for r in 0..n {
        for c in (r + 1)..n {
            if (m[(r, c)] - m[(c, r)]).abs() > 1e-10 * scale {
                return Err(Error::dim("weight is not symmetric"));
            }
        }
    }
    Ok(())
}

/// A weight ready for GLS: either a Cholesky factor, an explicit inverse,
/// or the identity.
#[derive(Debug, Clone)]
pub enum WeightSolver {
    Identity,
    Cholesky(SpdFactor),
    Inverse(Matrix),
}

impl WeightSolver {
    /// `W⁻¹ m`.
    pub fn apply_inverse(&self, m: &Matrix) -> Matrix {
        match self {
            WeightSolver::Identity => m.clone(),
            WeightSolver::Cholesky(f) => f.solve(m),
            WeightSolver::Inverse(inv) => inv * m,
        }
    }

    /// GLS coefficients `(XᵀW⁻¹X)⁻¹XᵀW⁻¹y` for a single system.
    pub fn gls(&self, x: &Matrix, y: &Matrix) -> Result<Matrix> {
        match self {
            WeightSolver::Identity => crate::linalg::least_squares(x, y),
            WeightSolver::Cholesky(f) => {
                crate::linalg::least_squares(&f.whiten(x), &f.whiten(y))
            }
            WeightSolver::Inverse(inv) => {
                let wx = inv * x;
                let gram = SpdFactor::new(&wx.tr_mul(x), "weighted cross-product")
                    .map_err(|_| Error::rank("weighted regressor cross-product is singular"))?;
                Ok(gram.solve(&wx.tr_mul(y)))
            }
        }
    }
}
