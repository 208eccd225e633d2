//! Coefficient estimators.
//!
//! Every per-unit estimator works on a [`TransformedPanel`] (the system
//! premultiplied by `D⊥ᵀ`) except the joint estimators of `(α_i, β_i)`,
//! which take the untransformed [`PanelData`].
//!
//! The feasible estimators ([`fgls`], [`iterated_fgls`], [`joint_breve`],
//! [`cross_sectional_fgls`]) take no factor count, factors or loadings.
//! Only [`ugls`], [`ugls_joint`] and [`ols_bias_diagnostic`] consume a
//! [`LatentStructure`] or an oracle weight built from one.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{least_squares, pinv_sandwich, pinv_symmetric, eigen_extremes, symmetrize, Matrix, Vector};
use crate::panel::{oracle_weight_full, transform, LatentStructure, PanelData, TransformedPanel};
use crate::weight::{WeightMatrix, WeightSolver};

/// Sample weights whose smallest eigenvalue is at most this fraction of
/// `dim × max eigenvalue` are rejected.
pub const SAMPLE_WEIGHT_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ols,
    Ugls,
    Fgls,
    /// Iterated feasible GLS after the given number of GLS solves.
    FglsIter(usize),
    Breve,
    AlphaTwoStep,
    CrossSection,
    /// Joint GLS with the Moore–Penrose weight; returns `α = 0`, `β = β̂_GLS`.
    MoorePenrose,
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Ols => "ols".into(),
            Method::Ugls => "ugls".into(),
            Method::Fgls => "fgls".into(),
            Method::FglsIter(j) => format!("iter{j}"),
            Method::Breve => "breve".into(),
            Method::AlphaTwoStep => "alpha2".into(),
            Method::CrossSection => "xsec".into(),
            Method::MoorePenrose => "mp".into(),
        }
    }
}

/// Per-unit coefficient estimates.
#[derive(Debug, Clone)]
pub struct EstimateSet {
    pub method: Method,
    /// `K×N`, one column per unit.
    pub beta: Matrix,
    /// `S×N` common-regressor coefficients, for the joint estimators.
    pub alpha: Option<Matrix>,
    /// Transformed (`(T−S)×N`) or untransformed (`T×N`) residuals.
    pub residuals: Matrix,
    pub weight_used: Option<WeightMatrix>,
    pub iterations: usize,
}

impl EstimateSet {
    pub fn n(&self) -> usize {
        self.beta.ncols()
    }

    /// Coefficients of unit `i` stacked as `(α_i, β_i)`.
    pub fn coefficients(&self, i: usize) -> Vector {
        let s = self.alpha.as_ref().map_or(0, |a| a.nrows());
        let k = self.beta.nrows();
        let mut out = Vector::zeros(s + k);
        if let Some(a) = &self.alpha {
            out.rows_mut(0, s).copy_from(&a.column(i));
        }
        out.rows_mut(s, k).copy_from(&self.beta.column(i));
        out
    }
}

/// Options for [`fgls_with`].
#[derive(Debug, Clone, Default)]
pub struct FglsOptions {
    /// Adds `ridge · tr(Ŝ)/dim · I` to the sample weight. Off by default.
    pub ridge: Option<f64>,
    /// Replaces the sample weight altogether.
    pub weight_override: Option<WeightMatrix>,
}

fn residuals_of(tp: &TransformedPanel, beta: &Matrix) -> Matrix {
    let mut res = tp.y().clone();
    for (i, xi) in tp.x().iter().enumerate() {
        let fitted = xi * beta.column(i);
        let mut col = res.column_mut(i);
        col -= fitted;
    }
    res
}

fn check_dim(tp: &TransformedPanel, w: &WeightMatrix) -> Result<()> {
    if w.dim() != tp.dim() {
        return Err(Error::dim(format!(
            "weight has order {}, transformed panel has {} rows",
            w.dim(),
            tp.dim()
        )));
    }
    Ok(())
}

/// Solves every unit's GLS system with one shared factorization.
fn gls_units(solver: &WeightSolver, xs: &[Matrix], y: &Matrix) -> Result<Matrix> {
    let k = xs[0].ncols();
    let n = xs.len();
    let mut beta = Matrix::zeros(k, n);
    match solver {
        WeightSolver::Cholesky(f) => {
            let rows = y.nrows();
            let mut stacked = Matrix::zeros(rows, n * (k + 1));
            for (i, xi) in xs.iter().enumerate() {
                stacked.columns_mut(i * (k + 1), k).copy_from(xi);
                stacked.set_column(i * (k + 1) + k, &y.column(i));
            }
            let white = f.whiten(&stacked);
            for i in 0..n {
                let wx = white.columns(i * (k + 1), k).into_owned();
                let wy = white.columns(i * (k + 1) + k, 1).into_owned();
                let b = least_squares(&wx, &wy).map_err(|e| e.with_unit(i))?;
                beta.set_column(i, &b.column(0));
            }
        }
        _ => {
            for (i, xi) in xs.iter().enumerate() {
                let yi = y.columns(i, 1).into_owned();
                let b = solver.gls(xi, &yi).map_err(|e| e.with_unit(i))?;
                beta.set_column(i, &b.column(0));
            }
        }
    }
    Ok(beta)
}

/// Per-unit OLS on the transformed system.
pub fn ols(tp: &TransformedPanel) -> Result<EstimateSet> {
    let beta = gls_units(&WeightSolver::Identity, tp.x(), tp.y())?;
    let residuals = residuals_of(tp, &beta);
    Ok(EstimateSet {
        method: Method::Ols,
        beta,
        alpha: None,
        residuals,
        weight_used: None,
        iterations: 1,
    })
}

fn gls_with(tp: &TransformedPanel, w: &WeightMatrix, method: Method) -> Result<EstimateSet> {
    check_dim(tp, w)?;
    let solver = w.solver()?;
    let beta = gls_units(&solver, tp.x(), tp.y())?;
    let residuals = residuals_of(tp, &beta);
    Ok(EstimateSet {
        method,
        beta,
        alpha: None,
        residuals,
        weight_used: Some(w.clone()),
        iterations: 1,
    })
}

/// GLS on the transformed system with a known weight, typically the
/// oracle weight from [`crate::panel::oracle_weight`].
pub fn ugls(tp: &TransformedPanel, w: &WeightMatrix) -> Result<EstimateSet> {
    gls_with(tp, w, Method::Ugls)
}

fn weight_from_residuals(residuals: &Matrix, ridge: Option<f64>) -> Result<WeightMatrix> {
    let dim = residuals.nrows();
    let n = residuals.ncols() as f64;
    let mut s = residuals * residuals.transpose() / n;
    symmetrize(&mut s);
    if let Some(lambda) = ridge {
        let shift = lambda * s.trace() / dim as f64;
        for j in 0..dim {
            s[(j, j)] += shift;
        }
    }
    let (lo, hi) = eigen_extremes(&s);
    if !(lo > dim as f64 * SAMPLE_WEIGHT_RATIO * hi) {
        return Err(Error::SingularWeight {
            min_eig: lo,
            max_eig: hi,
            step: None,
        });
    }
    Ok(WeightMatrix::dense_checked(s))
}

/// `Ŝ_N = N⁻¹ Σ û_i û_iᵀ` from OLS residuals on the transformed system.
pub fn sample_weight(tp: &TransformedPanel, ols_result: &EstimateSet) -> Result<WeightMatrix> {
    if ols_result.method != Method::Ols {
        return Err(Error::InvalidSpec("sample weight needs OLS residuals".into()));
    }
    if ols_result.residuals.shape() != tp.y().shape() {
        return Err(Error::dim("OLS residuals do not match the transformed panel"));
    }
    weight_from_residuals(&ols_result.residuals, None)
}

/// Feasible GLS with the sample weight built from OLS residuals.
pub fn fgls(tp: &TransformedPanel) -> Result<EstimateSet> {
    fgls_with(tp, &FglsOptions::default())
}

pub fn fgls_with(tp: &TransformedPanel, options: &FglsOptions) -> Result<EstimateSet> {
    let weight = match &options.weight_override {
        Some(w) => w.clone(),
        None => {
            let first = ols(tp)?;
            weight_from_residuals(&first.residuals, options.ridge)?
        }
    };
    gls_with(tp, &weight, Method::Fgls)
}

/// Iterated feasible GLS: `steps` counts GLS solves, so `steps = 1` is
/// [`fgls`]. Each later step rebuilds the weight from the previous step's
/// residuals.
pub fn iterated_fgls(tp: &TransformedPanel, steps: usize) -> Result<EstimateSet> {
    if steps == 0 {
        return Err(Error::InvalidSpec("iterated GLS needs at least one step".into()));
    }
    let mut est = fgls(tp).map_err(|e| e.with_step(1))?;
    for h in 2..=steps {
        let w = weight_from_residuals(&est.residuals, None).map_err(|e| e.with_step(h))?;
        est = gls_with(tp, &w, Method::Fgls).map_err(|e| e.with_step(h))?;
    }
    est.method = Method::FglsIter(steps);
    est.iterations = steps;
    Ok(est)
}

fn joint_units(panel: &PanelData, solver: &WeightSolver) -> Result<(Matrix, Matrix, Matrix)> {
    let (s, k, n) = (panel.s(), panel.k(), panel.n());
    let zs: Vec<Matrix> = (0..n).map(|i| panel.z(i)).collect();
    let coef = gls_units(solver, &zs, panel.y())?;
    let alpha = coef.rows(0, s).into_owned();
    let beta = coef.rows(s, k).into_owned();
    let mut residuals = panel.y().clone();
    for (i, z) in zs.iter().enumerate() {
        let fitted = z * coef.column(i);
        let mut col = residuals.column_mut(i);
        col -= fitted;
    }
    Ok((alpha, beta, residuals))
}

/// OLS of `y_i` on `Z_i = [D, X_i]`.
pub fn joint_ols(panel: &PanelData) -> Result<EstimateSet> {
    let (alpha, beta, residuals) = joint_units(panel, &WeightSolver::Identity)?;
    Ok(EstimateSet {
        method: Method::Ols,
        beta,
        alpha: Some(alpha),
        residuals,
        weight_used: None,
        iterations: 1,
    })
}

fn joint_gls(panel: &PanelData, w: &WeightMatrix, method: Method) -> Result<EstimateSet> {
    if w.dim() != panel.t() {
        return Err(Error::dim("joint weight must have order T"));
    }
    let solver = w.solver()?;
    let (alpha, beta, residuals) = joint_units(panel, &solver)?;
    Ok(EstimateSet {
        method,
        beta,
        alpha: Some(alpha),
        residuals,
        weight_used: Some(w.clone()),
        iterations: 1,
    })
}

/// Joint `(α_i, β_i)` GLS with the oracle weight `F B_N Fᵀ + Ξ_N` on the
/// untransformed system. Its `β` block equals [`ugls`] on the transformed
/// system.
pub fn ugls_joint(panel: &PanelData, structure: &LatentStructure) -> Result<EstimateSet> {
    let w = oracle_weight_full(structure)?;
    joint_gls(panel, &w, Method::Ugls)
}

/// `S̃_N = N⁻¹ Σ û_iû_iᵀ` from joint OLS residuals (order `T`, rank `T−S`).
pub fn joint_residual_weight(panel: &PanelData) -> Result<Matrix> {
    let jo = joint_ols(panel)?;
    let mut s = &jo.residuals * jo.residuals.transpose() / panel.n() as f64;
    symmetrize(&mut s);
    Ok(s)
}

fn projection(d: &Matrix) -> Result<Matrix> {
    if d.ncols() == 0 {
        return Ok(Matrix::zeros(d.nrows(), d.nrows()));
    }
    let coef = least_squares(d, &Matrix::identity(d.nrows(), d.nrows()))?;
    let mut p = d * coef;
    symmetrize(&mut p);
    Ok(p)
}

/// Joint GLS of `y_i` on `Z_i` with `S̆_N = S̃_N + (tr(S̃_N)/N)·P_D`.
pub fn joint_breve(panel: &PanelData) -> Result<EstimateSet> {
    joint_breve_with(panel, &FglsOptions::default())
}

/// [`joint_breve`] where `weight_override` (order `T`) replaces `S̃_N` and
/// `ridge` adds `ridge · tr(S̃_N)/T · I` to it.
pub fn joint_breve_with(panel: &PanelData, options: &FglsOptions) -> Result<EstimateSet> {
    let mut w = match &options.weight_override {
        Some(w) if w.dim() != panel.t() => {
            return Err(Error::dim("breve weight override must have order T"))
        }
        Some(w) => w.to_dense(),
        None => joint_residual_weight(panel)?,
    };
    if let Some(lambda) = options.ridge {
        let shift = lambda * w.trace() / w.nrows() as f64;
        for j in 0..w.nrows() {
            w[(j, j)] += shift;
        }
    }
    let scale = w.trace() / panel.n() as f64;
    w += projection(panel.d())? * scale;
    let dim = w.nrows();
    let (lo, hi) = eigen_extremes(&w);
    if !(lo > dim as f64 * SAMPLE_WEIGHT_RATIO * hi) {
        return Err(Error::SingularWeight {
            min_eig: lo,
            max_eig: hi,
            step: None,
        });
    }
    joint_gls(panel, &WeightMatrix::dense_checked(w), Method::Breve)
}

/// Joint estimator with the Moore–Penrose weight
/// `S̃_N⁺ = D⊥ Ŝ_N⁻¹ D⊥ᵀ` and a pseudo-inverted normal matrix. The common
/// regressor block cancels: `α = 0` and `β` equals [`fgls`].
pub fn joint_moore_penrose(panel: &PanelData) -> Result<EstimateSet> {
    let tp = transform(panel)?;
    let jo = joint_ols(panel)?;
    let reduced = tp.complement().reduce(&jo.residuals);
    let s_hat = weight_from_residuals(&reduced, None)?.to_dense();
    let w = pinv_sandwich(tp.complement().basis(), &s_hat)?;
    let (s, k, n) = (panel.s(), panel.k(), panel.n());
    let mut alpha = Matrix::zeros(s, n);
    let mut beta = Matrix::zeros(k, n);
    let mut residuals = panel.y().clone();
    for i in 0..n {
        let z = panel.z(i);
        let wz = &w * &z;
        let normal = wz.tr_mul(&z);
        let rhs = wz.tr_mul(&panel.y().column(i));
        let coef = pinv_symmetric(&normal, 1e-10)? * rhs;
        alpha.set_column(i, &coef.rows(0, s));
        beta.set_column(i, &coef.rows(s, k));
        let fitted = &z * &coef;
        let mut col = residuals.column_mut(i);
        col -= fitted;
    }
    Ok(EstimateSet {
        method: Method::MoorePenrose,
        beta,
        alpha: Some(alpha),
        residuals,
        weight_used: None,
        iterations: 1,
    })
}

/// `α̃_i = (DᵀD)⁻¹Dᵀ(y_i − X_iβ̂_i)` given feasible GLS slopes.
///
/// Consistent only when the latent factors are orthogonal to `D`; that
/// restriction is not (and cannot be) checked from observables.
pub fn alpha_two_step(panel: &PanelData, fgls_result: &EstimateSet) -> Result<EstimateSet> {
    if !matches!(fgls_result.method, Method::Fgls | Method::FglsIter(_)) {
        return Err(Error::InvalidSpec(
            "two-step intercepts need a feasible GLS result".into(),
        ));
    }
    project_alpha(panel, &fgls_result.beta, Method::AlphaTwoStep)
}

/// Projects `y_i − X_iβ_i` on `D` for arbitrary slopes.
pub fn project_alpha(panel: &PanelData, beta: &Matrix, method: Method) -> Result<EstimateSet> {
    if beta.shape() != (panel.k(), panel.n()) {
        return Err(Error::dim("slope matrix does not match the panel"));
    }
    let mut partial = panel.y().clone();
    for (i, xi) in panel.x().iter().enumerate() {
        let fitted = xi * beta.column(i);
        let mut col = partial.column_mut(i);
        col -= fitted;
    }
    let alpha = if panel.s() == 0 {
        Matrix::zeros(0, panel.n())
    } else {
        least_squares(panel.d(), &partial)?
    };
    let residuals = partial - panel.d() * &alpha;
    Ok(EstimateSet {
        method,
        beta: beta.clone(),
        alpha: Some(alpha),
        residuals,
        weight_used: None,
        iterations: 1,
    })
}

/// Feasible GLS on the cross-sectional dual (see [`PanelData::dual`]):
/// one coefficient vector per period, weight `Ŝ_T = T⁻¹ Σ û_tû_tᵀ`.
pub fn cross_sectional_fgls(dual: &PanelData) -> Result<EstimateSet> {
    let tp = transform(dual)?;
    let mut est = fgls(&tp)?;
    est.method = Method::CrossSection;
    Ok(est)
}

/// Plug-in OLS bias `(𝓧_iᵀ𝓧_i)⁻¹𝓧_iᵀ𝓕 b_i` using sample moments.
pub fn ols_bias_diagnostic(
    structure: &LatentStructure,
    tp: &TransformedPanel,
    unit: usize,
) -> Result<Vector> {
    if unit >= tp.n() || unit >= structure.n() {
        return Err(Error::dim(format!("unit {unit} out of range")));
    }
    if structure.t() != tp.complement().len() {
        return Err(Error::dim("structure and panel lengths differ"));
    }
    let f = tp.complement().reduce(&structure.f);
    let x = &tp.x()[unit];
    let fb = f * structure.b.column(unit);
    let rhs = x.tr_mul(&Matrix::from_column_slice(fb.nrows(), 1, fb.as_slice()));
    let coef = least_squares_normal(x, &rhs).map_err(|e| e.with_unit(unit))?;
    Ok(coef.column(0).into_owned())
}

fn least_squares_normal(x: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    let gram = crate::linalg::SpdFactor::new(&x.tr_mul(x), "regressor cross-product")
        .map_err(|_| Error::rank("regressor cross-product is singular"))?;
    Ok(gram.solve(rhs))
}
