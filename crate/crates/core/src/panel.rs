//! Observed panel, the complement transform, and the latent structure.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::linalg::{check_finite, check_full_column_rank, ortho_complement, Matrix, OrthoComplement};
use crate::weight::WeightMatrix;

/// A balanced panel `y_i = Dα_i + X_iβ_i + u_i`, `i = 1..N`.
///
/// Outcomes are stored as the columns of a `T×N` matrix; each unit carries
/// its own `T×K` regressor block; the `T×S` common regressors are shared.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    y: Matrix,
    x: Vec<Matrix>,
    d: Matrix,
}

impl PanelData {
    pub fn new(y: Matrix, x: Vec<Matrix>, d: Matrix) -> Result<Self> {
        let t = y.nrows();
        let n = y.ncols();
        if n == 0 {
            return Err(Error::dim("panel has no units"));
        }
        if x.len() != n {
            return Err(Error::dim(format!(
                "{} regressor blocks for {n} units",
                x.len()
            )));
        }
        let k = x[0].ncols();
        if k == 0 {
            return Err(Error::dim("panel has no unit-specific regressors"));
        }
        for (i, xi) in x.iter().enumerate() {
            if xi.nrows() != t || xi.ncols() != k {
                return Err(Error::dim(format!(
                    "unit {i} regressors are {}x{}, expected {t}x{k}",
                    xi.nrows(),
                    xi.ncols()
                )));
            }
        }
        if d.nrows() != t {
            return Err(Error::dim(format!(
                "common regressors have {} rows, expected {t}",
                d.nrows()
            )));
        }
        let s = d.ncols();
        if t <= s + k {
            return Err(Error::dim(format!(
                "T = {t} must exceed S + K = {}",
                s + k
            )));
        }
        check_finite(&y, "outcomes")?;
        check_finite(&d, "common regressors")?;
        check_full_column_rank(&d, "common regressors")?;
        for (i, xi) in x.iter().enumerate() {
            check_finite(xi, "unit regressors")?;
            check_full_column_rank(xi, "unit regressors").map_err(|e| e.with_unit(i))?;
        }
        Ok(PanelData { y, x, d })
    }

    pub fn t(&self) -> usize {
        self.y.nrows()
    }

    pub fn n(&self) -> usize {
        self.y.ncols()
    }

    pub fn s(&self) -> usize {
        self.d.ncols()
    }

    pub fn k(&self) -> usize {
        self.x[0].ncols()
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn x(&self) -> &[Matrix] {
        &self.x
    }

    pub fn d(&self) -> &Matrix {
        &self.d
    }

    /// Index of the first constant nonzero column of `D`, if any.
    pub fn intercept_column(&self) -> Option<usize> {
        intercept_column(&self.d)
    }

    /// `Z_i = [D, X_i]`.
    pub fn z(&self, i: usize) -> Matrix {
        let (t, s, k) = (self.t(), self.s(), self.k());
        let mut z = Matrix::zeros(t, s + k);
        z.columns_mut(0, s).copy_from(&self.d);
        z.columns_mut(s, k).copy_from(&self.x[i]);
        z
    }

    /// The cross-sectional dual: periods become units and units become
    /// observations, with `d_cross` (`N×S'`) as common regressors.
    pub fn dual(&self, d_cross: Matrix) -> Result<PanelData> {
        let (t, n, k) = (self.t(), self.n(), self.k());
        let y = self.y.transpose();
        let x = (0..t)
            .map(|period| Matrix::from_fn(n, k, |i, c| self.x[i][(period, c)]))
            .collect();
        PanelData::new(y, x, d_cross)
    }

    /// Same panel with the common regressors replaced.
    pub fn with_common(&self, d: Matrix) -> Result<PanelData> {
        PanelData::new(self.y.clone(), self.x.clone(), d)
    }

    /// Same panel with new unit regressors.
    pub fn with_regressors(&self, x: Vec<Matrix>) -> Result<PanelData> {
        PanelData::new(self.y.clone(), x, self.d.clone())
    }
}

pub(crate) fn intercept_column(d: &Matrix) -> Option<usize> {
    d.column_iter().position(|col| {
        let first = col[0];
        first != 0.0 && col.iter().all(|v| (v - first).abs() <= 1e-12 * first.abs())
    })
}

/// The panel premultiplied by `D⊥ᵀ`: `𝓎_i = D⊥ᵀy_i`, `𝓧_i = D⊥ᵀX_i`.
#[derive(Debug, Clone)]
pub struct TransformedPanel {
    complement: OrthoComplement,
    y: Matrix,
    x: Vec<Matrix>,
}

impl TransformedPanel {
    pub fn complement(&self) -> &OrthoComplement {
        &self.complement
    }

    /// `(T−S)×N` transformed outcomes.
    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn x(&self) -> &[Matrix] {
        &self.x
    }

    pub fn dim(&self) -> usize {
        self.y.nrows()
    }

    pub fn n(&self) -> usize {
        self.y.ncols()
    }

    pub fn k(&self) -> usize {
        self.x[0].ncols()
    }

    /// Replaces the regressors, keeping outcomes and complement.
    pub fn with_regressors(&self, x: Vec<Matrix>) -> Result<TransformedPanel> {
        if x.len() != self.n() || x.iter().any(|xi| xi.nrows() != self.dim()) {
            return Err(Error::dim("transformed regressor shapes"));
        }
        Ok(TransformedPanel {
            complement: self.complement.clone(),
            y: self.y.clone(),
            x,
        })
    }
}

/// Premultiplies the panel by a deterministic orthonormal complement of `D`.
pub fn transform(panel: &PanelData) -> Result<TransformedPanel> {
    let complement = ortho_complement(panel.d())?;
    transform_with(panel, complement)
}

/// As [`transform`], with a caller-chosen complement of the same `D`.
pub fn transform_with(panel: &PanelData, complement: OrthoComplement) -> Result<TransformedPanel> {
    if complement.len() != panel.t() || complement.source_cols() != panel.s() {
        return Err(Error::dim("complement does not match the panel"));
    }
    if panel.s() > 0 && complement.basis().tr_mul(panel.d()).amax() > 1e-8 * panel.d().amax() {
        return Err(Error::dim("complement is not orthogonal to D"));
    }
    let (t, n, k) = (panel.t(), panel.n(), panel.k());
    let y = complement.reduce(panel.y());

    let mut stacked = Matrix::zeros(t, n * k);
    for (i, xi) in panel.x().iter().enumerate() {
        stacked.columns_mut(i * k, k).copy_from(xi);
    }
    let reduced = complement.reduce(&stacked);
    let x = (0..n)
        .map(|i| reduced.columns(i * k, k).into_owned())
        .collect();
    Ok(TransformedPanel { complement, y, x })
}

/// Per-unit idiosyncratic covariances `Ξ_i`.
#[derive(Debug, Clone, PartialEq)]
pub enum IdiosyncraticCov {
    /// Explicit `T×T` matrices, one per unit.
    Dense(Vec<Matrix>),
    /// Stationary AR(1) processes: `Ξ_i[t,s] = variance_i · rho_i^|t−s|`.
    Ar1 { variance: Vec<f64>, rho: Vec<f64> },
}

impl IdiosyncraticCov {
    pub fn units(&self) -> usize {
        match self {
            IdiosyncraticCov::Dense(m) => m.len(),
            IdiosyncraticCov::Ar1 { variance, .. } => variance.len(),
        }
    }

    pub fn unit(&self, i: usize, t: usize) -> Matrix {
        match self {
            IdiosyncraticCov::Dense(m) => m[i].clone(),
            IdiosyncraticCov::Ar1 { variance, rho } => {
                let acov = ar1_autocov(variance[i], rho[i], t);
                Matrix::from_fn(t, t, |r, c| acov[r.abs_diff(c)])
            }
        }
    }

    /// `Ξ_N = N⁻¹ Σ Ξ_i`.
    pub fn average(&self, t: usize) -> Matrix {
        match self {
            IdiosyncraticCov::Dense(m) => {
                let mut acc = Matrix::zeros(t, t);
                for xi in m {
                    acc += xi;
                }
                acc / m.len() as f64
            }
            IdiosyncraticCov::Ar1 { variance, rho } => {
                let mut acov = alloc::vec![0.0; t];
                for (&v, &r) in variance.iter().zip(rho) {
                    for (lag, a) in ar1_autocov(v, r, t).into_iter().enumerate() {
                        acov[lag] += a;
                    }
                }
                let n = variance.len() as f64;
                Matrix::from_fn(t, t, |r, c| acov[r.abs_diff(c)] / n)
            }
        }
    }
}

fn ar1_autocov(variance: f64, rho: f64, t: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(t);
    let mut p = variance;
    for _ in 0..t {
        out.push(p);
        p *= rho;
    }
    out
}

/// Unobserved components of a simulated panel:
/// `u_i = F b_i + ε_i` and `X_i = DΔ_i + FΓ_i + V_i`.
///
/// Only simulation code and the oracle estimators take this type.
#[derive(Debug, Clone)]
pub struct LatentStructure {
    /// `T×M` latent factors.
    pub f: Matrix,
    /// `M×N` residual loadings, one column per unit.
    pub b: Matrix,
    /// `M×K` regressor loadings per unit.
    pub gamma: Vec<Matrix>,
    /// `S×K` loadings on the common regressors per unit.
    pub delta: Vec<Matrix>,
    /// `T×K` idiosyncratic regressor components per unit.
    pub v: Vec<Matrix>,
    pub xi: IdiosyncraticCov,
    /// `T×N` idiosyncratic residuals.
    pub eps: Matrix,
}

impl LatentStructure {
    pub fn t(&self) -> usize {
        self.f.nrows()
    }

    pub fn n(&self) -> usize {
        self.b.ncols()
    }

    /// `F b_i + ε_i`.
    pub fn residual(&self, i: usize) -> Matrix {
        let col = &self.f * self.b.column(i) + self.eps.column(i);
        Matrix::from_column_slice(col.nrows(), 1, col.as_slice())
    }

    /// `DΔ_i + FΓ_i + V_i`.
    pub fn regressors(&self, d: &Matrix, i: usize) -> Matrix {
        d * &self.delta[i] + &self.f * &self.gamma[i] + &self.v[i]
    }

    /// `B_N = N⁻¹ Σ b_i b_iᵀ`.
    pub fn loading_moment(&self) -> Matrix {
        self.b.clone() * self.b.transpose() / self.n() as f64
    }

    /// Factors spanning the residual factor component, `F Q` where `Q`
    /// collects the eigenvectors of `B_N` with non-negligible eigenvalues,
    /// together with those eigenvalues.
    pub fn residual_factors(&self) -> (Matrix, Matrix) {
        let bn = self.loading_moment();
        let m = bn.nrows();
        if m == 0 {
            return (Matrix::zeros(self.t(), 0), Matrix::zeros(0, 0));
        }
        let eig = SymmetricEigen::new(bn);
        let max = eig.eigenvalues.amax();
        let keep: Vec<usize> = (0..m)
            .filter(|&j| max > 0.0 && eig.eigenvalues[j] > 1e-12 * max)
            .collect();
        let mut q = Matrix::zeros(m, keep.len());
        let mut core = Matrix::zeros(keep.len(), keep.len());
        for (c, &j) in keep.iter().enumerate() {
            q.set_column(c, &eig.eigenvectors.column(j));
            core[(c, c)] = eig.eigenvalues[j];
        }
        (&self.f * q, core)
    }
}

/// Oracle weight `D⊥ᵀ(F B_N Fᵀ + Ξ_N)D⊥`, kept in factored form.
pub fn oracle_weight(structure: &LatentStructure, complement: &OrthoComplement) -> Result<WeightMatrix> {
    let t = structure.t();
    if complement.len() != t {
        return Err(Error::dim(format!(
            "complement has {} rows, structure has T = {t}",
            complement.len()
        )));
    }
    if structure.n() == 0 || structure.xi.units() != structure.n() {
        return Err(Error::dim("structure needs N >= 1 units with matching covariances"));
    }
    let (factors, core) = structure.residual_factors();
    let lowrank = complement.reduce(&factors);
    let xi = structure.xi.average(t);
    let full = if complement.source_cols() == 0 {
        xi
    } else {
        complement.basis().tr_mul(&(xi * complement.basis()))
    };
    WeightMatrix::factored(lowrank, core, full)
}

/// Oracle weight on the untransformed `T×T` scale, `F B_N Fᵀ + Ξ_N`.
pub fn oracle_weight_full(structure: &LatentStructure) -> Result<WeightMatrix> {
    oracle_weight(structure, &OrthoComplement::identity(structure.t()))
}

/// `‖W⁻¹ F‖²` (Frobenius) for the oracle weight on the untransformed scale,
/// with `F` the factors that load on the residuals.
pub fn orthogonality_statistic(structure: &LatentStructure) -> Result<f64> {
    let w = oracle_weight_full(structure)?;
    let (factors, _) = structure.residual_factors();
    let solved = w.solver()?.apply_inverse(&factors);
    Ok(solved.norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn small_panel() -> PanelData {
        panel_of(12, 3)
    }

    fn panel_of(t: usize, n: usize) -> PanelData {
        let d = Matrix::from_fn(t, 2, |r, c| if c == 0 { 1.0 } else { r as f64 });
        let x = (0..n)
            .map(|i| Matrix::from_fn(t, 2, |r, c| ((r * 7 + c * 3 + i * 5) % 11) as f64 + 0.1 * (r as f64).cos()))
            .collect();
        let y = Matrix::from_fn(t, n, |r, c| (r as f64 * 0.3 + c as f64).sin());
        PanelData::new(y, x, d).unwrap()
    }

    #[test]
    fn transform_demeans_with_ones() {
        let y = Matrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let x = vec![Matrix::from_column_slice(4, 1, &[1.0, 0.0, 2.0, 5.0])];
        let d = Matrix::from_element(4, 1, 1.0);
        let tp = transform(&PanelData::new(y, x, d).unwrap()).unwrap();
        assert_eq!(tp.dim(), 3);
        assert!((tp.y().norm_squared() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn transform_without_common_regressors_is_identity() {
        let p = small_panel();
        let p0 = p.with_common(Matrix::zeros(p.t(), 0)).unwrap();
        let tp = transform(&p0).unwrap();
        assert_eq!(tp.y(), p0.y());
        for (a, b) in tp.x().iter().zip(p0.x()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn transform_reconstructs_annihilated_regressors() {
        let p = small_panel();
        let tp = transform(&p).unwrap();
        let dtd_inv = p.d().tr_mul(p.d()).try_inverse().unwrap();
        let md = Matrix::identity(p.t(), p.t()) - p.d() * dtd_inv * p.d().transpose();
        for (xt, x) in tp.x().iter().zip(p.x()) {
            let back = tp.complement().expand(xt);
            assert!((back - &md * x).amax() <= 1e-10);
        }
        let back = tp.complement().expand(tp.y());
        assert!((back - &md * p.y()).amax() <= 1e-10);
    }

    #[test]
    fn panel_rejects_short_series() {
        let y = Matrix::zeros(3, 2);
        let x = vec![Matrix::from_element(3, 2, 1.0); 2];
        let d = Matrix::from_element(3, 1, 1.0);
        assert!(matches!(PanelData::new(y, x, d), Err(Error::Dimension(_))));
    }

    #[test]
    fn panel_rejects_collinear_unit() {
        let t = 6;
        let y = Matrix::zeros(t, 2);
        let good = Matrix::from_fn(t, 1, |r, _| r as f64);
        let bad = Matrix::zeros(t, 1);
        let d = Matrix::from_element(t, 1, 1.0);
        let err = PanelData::new(y, vec![good, bad], d).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { unit: Some(1), .. }));
    }

    #[test]
    fn dual_swaps_roles() {
        let p = panel_of(12, 8);
        let dual = p.dual(Matrix::from_element(p.n(), 1, 1.0)).unwrap();
        assert_eq!(dual.t(), p.n());
        assert_eq!(dual.n(), p.t());
        assert_eq!(dual.x()[4][(2, 1)], p.x()[2][(4, 1)]);
        assert_eq!(dual.y()[(1, 7)], p.y()[(7, 1)]);
    }

    #[test]
    fn intercept_detection() {
        let p = small_panel();
        assert_eq!(p.intercept_column(), Some(0));
        let q = p.with_common(Matrix::from_fn(p.t(), 1, |r, _| r as f64 + 1.0)).unwrap();
        assert_eq!(q.intercept_column(), None);
    }

    fn structure(t: usize, b: Matrix, xi: IdiosyncraticCov, f: Matrix) -> LatentStructure {
        let n = b.ncols();
        let m = b.nrows();
        LatentStructure {
            f,
            b,
            gamma: vec![Matrix::zeros(m, 1); n],
            delta: vec![Matrix::zeros(1, 1); n],
            v: vec![Matrix::zeros(t, 1); n],
            xi,
            eps: Matrix::zeros(t, n),
        }
    }

    #[test]
    fn oracle_weight_without_factors_is_identity() {
        let t = 6;
        let n = 4;
        let s = structure(
            t,
            Matrix::zeros(1, n),
            IdiosyncraticCov::Dense(vec![Matrix::identity(t, t); n]),
            Matrix::from_element(t, 1, 1.0),
        );
        let comp = ortho_complement(&Matrix::from_element(t, 1, 1.0)).unwrap();
        let w = oracle_weight(&s, &comp).unwrap().to_dense();
        assert!((w - Matrix::identity(t - 1, t - 1)).amax() < 1e-12);
    }

    #[test]
    fn oracle_weight_rank_one() {
        let t = 5;
        let n = 3;
        let s = structure(
            t,
            Matrix::from_element(1, n, 1.0),
            IdiosyncraticCov::Dense(vec![Matrix::zeros(t, t); n]),
            Matrix::from_element(t, 1, 1.0),
        );
        let w = oracle_weight(&s, &OrthoComplement::identity(t)).unwrap().to_dense();
        assert!((w - Matrix::from_element(t, t, 1.0)).amax() < 1e-12);
    }

    #[test]
    fn ar1_average_matches_dense_average() {
        let t = 7;
        let variance = vec![0.5, 1.2, 0.9];
        let rho = vec![0.1, 0.8, 0.5];
        let ar = IdiosyncraticCov::Ar1 {
            variance: variance.clone(),
            rho: rho.clone(),
        };
        let dense = IdiosyncraticCov::Dense((0..3).map(|i| ar.unit(i, t)).collect());
        assert!((ar.average(t) - dense.average(t)).amax() < 1e-14);
        assert!((ar.unit(1, t)[(2, 5)] - 1.2 * 0.8f64.powi(3)).abs() < 1e-14);
    }
}
