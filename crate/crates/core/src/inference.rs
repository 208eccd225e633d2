//! Bartlett-kernel HAC covariances and Wald statistics.
//!
//! For unit `i` with regressors `X`, weighted regressors `X̂ = W⁻¹X`,
//! residuals `û` and `T` rows the covariance is the sandwich
//!
//! ```text
//! G⁻¹ [Â₀ + Σ_{h=1}^{n} (1 − h/(n+1)) (Â_h + Â_hᵀ)] G⁻¹,
//! G   = XᵀX̂ / T,
//! Â_h = T⁻¹ Σ_{t>h} û_t û_{t−h} x̂_t x̂_{t−h}ᵀ,
//! ```
//!
//! scaled so that the t-ratio of coefficient `k` is `θ_k / √(cov_kk / T)`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimators::{EstimateSet, Method};
use crate::linalg::{symmetrize, Matrix, SpdFactor, Vector};
use crate::panel::{PanelData, TransformedPanel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HacMode {
    /// Scores built from `W⁻¹X` with the weight recorded in the estimate.
    WeightedRegressors,
    /// Scores built from `X` (OLS).
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HacSpec {
    pub bandwidth: usize,
    pub mode: HacMode,
}

impl HacSpec {
    pub fn new(bandwidth: usize, mode: HacMode) -> Self {
        HacSpec { bandwidth, mode }
    }

    /// Newey–West rule of thumb `floor(4 (T/100)^{2/9})`.
    pub fn default_bandwidth(t: usize) -> usize {
        libm::floor(4.0 * libm::pow(t as f64 / 100.0, 2.0 / 9.0)) as usize
    }
}

/// Bartlett weight of lag `h` for bandwidth `n`.
pub fn bartlett_weight(h: usize, n: usize) -> f64 {
    if h > n {
        0.0
    } else {
        1.0 - h as f64 / (n as f64 + 1.0)
    }
}

/// Per-unit covariance estimates and t-ratios.
#[derive(Debug, Clone)]
pub struct InferenceSet {
    /// One `P×P` matrix per unit, `P = alpha_len + K`.
    pub cov: Vec<Matrix>,
    /// `P×N`.
    pub tstats: Matrix,
    /// Number of leading coefficients that are common-regressor coefficients.
    pub alpha_len: usize,
    /// Rows used in the sandwich (the `T` of the scaling).
    pub sample_len: usize,
    pub bandwidth: usize,
}

impl InferenceSet {
    pub fn std_errors(&self, i: usize) -> Vector {
        let t = self.sample_len as f64;
        self.cov[i].diagonal().map(|v| libm::sqrt(v / t))
    }
}

/// The HAC middle matrix `Â₀ + Σ w_h (Â_h + Â_hᵀ)` of `T` score rows
/// `s_t = û_t x̂_t`.
pub fn hac_middle(scores: &Matrix, bandwidth: usize) -> Matrix {
    let (t, p) = scores.shape();
    let mut middle = scores.tr_mul(scores);
    for h in 1..=bandwidth.min(t.saturating_sub(1)) {
        let w = bartlett_weight(h, bandwidth);
        let lead = scores.rows(h, t - h);
        let lag = scores.rows(0, t - h);
        let a = lead.tr_mul(&lag);
        middle += (&a + a.transpose()) * w;
    }
    let mut middle = middle / t as f64;
    debug_assert_eq!(middle.nrows(), p);
    symmetrize(&mut middle);
    middle
}

fn sandwich(x: &Matrix, xhat: &Matrix, residuals: &Vector, bandwidth: usize) -> Result<Matrix> {
    let t = x.nrows() as f64;
    let bread = SpdFactor::new(&(x.tr_mul(xhat) / t), "HAC bread")
        .map_err(|_| Error::Singular("HAC bread matrix".into()))?;
    let mut scores = xhat.clone();
    for (mut row, u) in scores.row_iter_mut().zip(residuals.iter()) {
        row *= *u;
    }
    let middle = hac_middle(&scores, bandwidth);
    let left = bread.solve(&middle);
    let mut cov = bread.solve(&left.transpose());
    symmetrize(&mut cov);
    Ok(cov)
}

fn assemble(
    covs: Vec<Matrix>,
    coefs: impl Fn(usize) -> Vector,
    alpha_len: usize,
    sample_len: usize,
    bandwidth: usize,
) -> InferenceSet {
    let p = covs.first().map_or(0, |c| c.nrows());
    let n = covs.len();
    let t = sample_len as f64;
    let mut tstats = Matrix::zeros(p, n);
    for (i, cov) in covs.iter().enumerate() {
        let theta = coefs(i);
        for k in 0..p {
            tstats[(k, i)] = theta[k] / libm::sqrt(cov[(k, k)] / t);
        }
    }
    InferenceSet {
        cov: covs,
        tstats,
        alpha_len,
        sample_len,
        bandwidth,
    }
}

/// HAC covariance of per-unit slopes on the transformed system.
pub fn hac_cov_fgls(tp: &TransformedPanel, est: &EstimateSet, spec: &HacSpec) -> Result<InferenceSet> {
    let rows = tp.dim();
    if spec.bandwidth >= rows {
        return Err(Error::Bandwidth {
            bandwidth: spec.bandwidth,
            len: rows,
        });
    }
    if est.residuals.shape() != tp.y().shape() || est.beta.ncols() != tp.n() {
        return Err(Error::dim("estimate does not match the transformed panel"));
    }
    let solver = match spec.mode {
        HacMode::Plain => None,
        HacMode::WeightedRegressors => {
            let w = est.weight_used.as_ref().ok_or_else(|| {
                Error::InvalidSpec("weighted HAC needs the weight used by the estimator".into())
            })?;
            if w.dim() != rows {
                return Err(Error::dim("weight order differs from the transformed panel"));
            }
            Some(w.solver()?)
        }
    };
    let mut covs = Vec::with_capacity(tp.n());
    for (i, x) in tp.x().iter().enumerate() {
        let xhat = match &solver {
            Some(s) => s.apply_inverse(x),
            None => x.clone(),
        };
        let u = est.residuals.column(i).into_owned();
        covs.push(sandwich(x, &xhat, &u, spec.bandwidth).map_err(|e| e.with_unit(i))?);
    }
    Ok(assemble(covs, |i| est.beta.column(i).into_owned(), 0, rows, spec.bandwidth))
}

/// HAC covariance of the joint `(α_i, β_i)` estimates from
/// [`crate::estimators::joint_breve`].
pub fn hac_cov_breve(panel: &PanelData, est: &EstimateSet, spec: &HacSpec) -> Result<InferenceSet> {
    if est.method != Method::Breve {
        return Err(Error::InvalidSpec("expected a breve estimate".into()));
    }
    let rows = panel.t();
    if spec.bandwidth >= rows {
        return Err(Error::Bandwidth {
            bandwidth: spec.bandwidth,
            len: rows,
        });
    }
    if est.residuals.shape() != panel.y().shape() {
        return Err(Error::dim("estimate does not match the panel"));
    }
    let solver = match spec.mode {
        HacMode::Plain => None,
        HacMode::WeightedRegressors => Some(
            est.weight_used
                .as_ref()
                .ok_or_else(|| Error::InvalidSpec("breve estimate carries no weight".into()))?
                .solver()?,
        ),
    };
    let mut covs = Vec::with_capacity(panel.n());
    for i in 0..panel.n() {
        let z = panel.z(i);
        let zhat = match &solver {
            Some(s) => s.apply_inverse(&z),
            None => z.clone(),
        };
        let u = est.residuals.column(i).into_owned();
        covs.push(sandwich(&z, &zhat, &u, spec.bandwidth).map_err(|e| e.with_unit(i))?);
    }
    Ok(assemble(covs, |i| est.coefficients(i), panel.s(), rows, spec.bandwidth))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wald {
    pub stat: f64,
    pub df: usize,
}

/// Per-unit statistics for the common-regressor slopes, the unit-specific
/// slopes and their union. A block that is empty or not covered by the
/// covariance is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WaldStats {
    pub gamma: Option<Wald>,
    pub beta: Option<Wald>,
    pub joint: Option<Wald>,
}

/// Coefficient index sets, relative to the stacked `(α, β)` vector of an
/// [`InferenceSet`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WaldBlocks {
    pub gamma: Vec<usize>,
    pub beta: Vec<usize>,
    pub joint: Vec<usize>,
}

impl WaldBlocks {
    /// `γ` = common-regressor coefficients except the intercept column,
    /// `β` = unit-specific slopes, and their union.
    pub fn standard(inf: &InferenceSet, intercept: Option<usize>) -> Self {
        let p = inf.cov.first().map_or(0, |c| c.nrows());
        let gamma: Vec<usize> = (0..inf.alpha_len).filter(|&j| Some(j) != intercept).collect();
        let beta: Vec<usize> = (inf.alpha_len..p).collect();
        let joint = gamma.iter().chain(beta.iter()).copied().collect();
        WaldBlocks { gamma, beta, joint }
    }
}

/// `θ̂_bᵀ(V̂_b/T)⁻¹θ̂_b` for a single block.
pub fn wald_statistic(theta: &Vector, cov: &Matrix, sample_len: usize, block: &[usize]) -> Result<Wald> {
    let m = block.len();
    let sub = Matrix::from_fn(m, m, |r, c| cov[(block[r], block[c])] / sample_len as f64);
    let th = Matrix::from_fn(m, 1, |r, _| theta[block[r]]);
    let factor = SpdFactor::new(&sub, "Wald block covariance")
        .map_err(|_| Error::Singular(format!("Wald block {block:?} covariance")))?;
    let stat = (th.transpose() * factor.solve(&th))[(0, 0)];
    Ok(Wald { stat, df: m })
}

pub fn wald_tests(est: &EstimateSet, inf: &InferenceSet, blocks: &WaldBlocks) -> Result<Vec<WaldStats>> {
    if inf.cov.len() != est.n() {
        return Err(Error::dim("inference and estimates cover different units"));
    }
    let run = |theta: &Vector, cov: &Matrix, block: &[usize]| -> Result<Option<Wald>> {
        if block.is_empty() {
            return Ok(None);
        }
        if block.iter().any(|&j| j >= cov.nrows()) {
            return Err(Error::dim("Wald block index outside the covariance"));
        }
        wald_statistic(theta, cov, inf.sample_len, block).map(Some)
    };
    (0..est.n())
        .map(|i| {
            let theta = inference_coefficients(est, inf, i);
            let cov = &inf.cov[i];
            Ok(WaldStats {
                gamma: run(&theta, cov, &blocks.gamma)?,
                beta: run(&theta, cov, &blocks.beta)?,
                joint: run(&theta, cov, &blocks.joint)?,
            })
        })
        .collect()
}

/// The coefficient vector an [`InferenceSet`] refers to for unit `i`.
pub fn inference_coefficients(est: &EstimateSet, inf: &InferenceSet, i: usize) -> Vector {
    if inf.alpha_len == 0 {
        est.beta.column(i).into_owned()
    } else {
        est.coefficients(i)
    }
}
