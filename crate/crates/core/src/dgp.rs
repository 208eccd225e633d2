//! Simulated panels with interactive fixed effects.
//!
//! ```text
//! y_it = α + β_i x_it + b_i1 f_1t + b_i2 f_2t + ε_it
//! x_it = c + δ_i1 f_1t + δ_i3 f_3t + v_it
//! f_jt = a f_j,t−1 + η_jt
//! ```
//!
//! with stationary AR(1) idiosyncratic terms whose unconditional variances
//! are `σ_i²` (for `ε`) and one (for `v`). All processes start from an
//! exact stationary draw.
//!
//! Random numbers come from ChaCha8 seeded with the configured seed. Each group of
//! variates uses its own stream of that generator: 0 factors, 1 loadings and
//! per-unit parameters, 2 `ε`, 3 `v`, 4 the extra regressor factors of the
//! distinct-factor variant.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::panel::{IdiosyncraticCov, LatentStructure, PanelData};

/// A normal law given by mean and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal {
    pub mean: f64,
    pub var: f64,
}

impl Normal {
    pub const fn new(mean: f64, var: f64) -> Self {
        Normal { mean, var }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    pub n: usize,
    pub t: usize,
    pub seed: u64,
    pub factor_ar: f64,
    pub factor_innov_var: f64,
    pub b1: Normal,
    pub b2: Normal,
    pub delta1: Normal,
    pub delta3: Normal,
    pub rho_eps_range: (f64, f64),
    pub rho_v_range: (f64, f64),
    pub sigma2_range: (f64, f64),
    pub alpha0: f64,
    pub x_intercept: f64,
    /// Slope of units `1..N/2`.
    pub beta_low: f64,
    /// Slope of units `N/2+1..N`.
    pub beta_high: f64,
    /// When set, `x` loads on its own factors `g_j = c f_j + √(1−c²) h_j`
    /// (with `h_j` independent copies of the factor process) instead of
    /// `f_1, f_3`.
    pub distinct_factor_corr: Option<f64>,
}

impl Default for DgpSpec {
    fn default() -> Self {
        DgpSpec {
            n: 200,
            t: 100,
            seed: 0,
            factor_ar: 0.5,
            factor_innov_var: 0.5,
            b1: Normal::new(1.0, 0.2),
            b2: Normal::new(0.0, 0.2),
            delta1: Normal::new(0.5, 0.5),
            delta3: Normal::new(0.0, 0.5),
            rho_eps_range: (0.05, 0.95),
            rho_v_range: (0.05, 0.95),
            sigma2_range: (0.5, 1.5),
            alpha0: 1.0,
            x_intercept: 0.5,
            beta_low: 1.0,
            beta_high: 3.0,
            distinct_factor_corr: None,
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), min: f64, max: f64, open: bool) -> Result<()> {
    let inside = |v: f64| if open { v > min && v < max } else { v >= min && v < max };
    if !(lo.is_finite() && hi.is_finite() && lo <= hi && inside(lo) && inside(hi)) {
        return Err(Error::InvalidSpec(format!("{name} = ({lo}, {hi}) is not a valid range")));
    }
    Ok(())
}

impl DgpSpec {
    pub fn with_size(n: usize, t: usize, seed: u64) -> Self {
        DgpSpec {
            n,
            t,
            seed,
            ..DgpSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n % 2 != 0 {
            return Err(Error::InvalidSpec(format!("N = {} must be positive and even", self.n)));
        }
        if self.t < 3 {
            return Err(Error::InvalidSpec(format!("T = {} is too short", self.t)));
        }
        if !(self.factor_ar.abs() < 1.0) {
            return Err(Error::InvalidSpec(format!("factor_ar = {} is not stationary", self.factor_ar)));
        }
        if !(self.factor_innov_var >= 0.0 && self.factor_innov_var.is_finite()) {
            return Err(Error::InvalidSpec("factor_innov_var must be non-negative".into()));
        }
        for (name, law) in [("b1", self.b1), ("b2", self.b2), ("delta1", self.delta1), ("delta3", self.delta3)] {
            if !(law.mean.is_finite() && law.var >= 0.0 && law.var.is_finite()) {
                return Err(Error::InvalidSpec(format!("{name} needs a finite mean and variance >= 0")));
            }
        }
        check_range("rho_eps_range", self.rho_eps_range, 0.0, 1.0, false)?;
        check_range("rho_v_range", self.rho_v_range, 0.0, 1.0, false)?;
        check_range("sigma2_range", self.sigma2_range, 0.0, f64::INFINITY, false)?;
        if let Some(c) = self.distinct_factor_corr {
            if !(c.abs() <= 1.0) {
                return Err(Error::InvalidSpec(format!("distinct_factor_corr = {c} outside [-1, 1]")));
            }
        }
        let finite = [self.alpha0, self.x_intercept, self.beta_low, self.beta_high];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("coefficients must be finite".into()));
        }
        Ok(())
    }

    /// Replication `r`: same design, seed `seed ⊕ r`.
    pub fn replication(&self, r: u64) -> DgpSpec {
        DgpSpec {
            seed: self.seed ^ r,
            ..self.clone()
        }
    }
}

/// True coefficients of a simulated panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    /// `S×N`.
    pub alpha: Matrix,
    /// `K×N`.
    pub beta: Matrix,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normal<R: Rng>(rng: &mut R, law: Normal) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    law.mean + libm::sqrt(law.var) * z
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Stationary AR(1) path with unconditional variance `variance`.
fn ar1_path<R: Rng>(rng: &mut R, rho: f64, variance: f64, t: usize) -> impl Iterator<Item = f64> + '_ {
    let innov = libm::sqrt(variance * (1.0 - rho * rho));
    let mut prev: Option<f64> = None;
    let sd0 = libm::sqrt(variance);
    (0..t).map(move |_| {
        let z: f64 = rng.sample(StandardNormal);
        let next = match prev {
            None => sd0 * z,
            Some(p) => rho * p + innov * z,
        };
        prev = Some(next);
        next
    })
}

fn factor_block<R: Rng>(rng: &mut R, spec: &DgpSpec, m: usize) -> Matrix {
    let a = spec.factor_ar;
    let var = spec.factor_innov_var / (1.0 - a * a);
    let mut f = Matrix::zeros(spec.t, m);
    for j in 0..m {
        for (r, v) in ar1_path(rng, a, var, spec.t).enumerate() {
            f[(r, j)] = v;
        }
    }
    f
}

/// Draws one panel together with its latent structure and true coefficients.
pub fn simulate(spec: &DgpSpec) -> Result<(PanelData, LatentStructure, Truth)> {
    spec.validate()?;
    let (n, t) = (spec.n, spec.t);

    let f = factor_block(&mut stream(spec.seed, 0), spec, 3);
    // Columns of the regressor factors inside the full factor matrix.
    let (factors, x_cols) = match spec.distinct_factor_corr {
        None => (f, [0usize, 2usize]),
        Some(c) => {
            let h = factor_block(&mut stream(spec.seed, 4), spec, 2);
            let s = libm::sqrt(1.0 - c * c);
            let mut all = Matrix::zeros(t, 5);
            all.columns_mut(0, 3).copy_from(&f);
            for (j, src) in [0usize, 2].into_iter().enumerate() {
                let g = f.column(src) * c + h.column(j) * s;
                all.set_column(3 + j, &g);
            }
            (all, [3usize, 4usize])
        }
    };
    let m = factors.ncols();

    let mut params = stream(spec.seed, 1);
    let mut b = Matrix::zeros(m, n);
    let mut gamma = Vec::with_capacity(n);
    let mut sigma2 = Vec::with_capacity(n);
    let mut rho_eps = Vec::with_capacity(n);
    let mut rho_v = Vec::with_capacity(n);
    for i in 0..n {
        b[(0, i)] = normal(&mut params, spec.b1);
        b[(1, i)] = normal(&mut params, spec.b2);
        let mut g = Matrix::zeros(m, 1);
        g[(x_cols[0], 0)] = normal(&mut params, spec.delta1);
        g[(x_cols[1], 0)] = normal(&mut params, spec.delta3);
        gamma.push(g);
        rho_eps.push(uniform(&mut params, spec.rho_eps_range));
        sigma2.push(uniform(&mut params, spec.sigma2_range));
        rho_v.push(uniform(&mut params, spec.rho_v_range));
    }

    let mut eps_rng = stream(spec.seed, 2);
    let mut eps = Matrix::zeros(t, n);
    for i in 0..n {
        for (r, e) in ar1_path(&mut eps_rng, rho_eps[i], sigma2[i], t).enumerate() {
            eps[(r, i)] = e;
        }
    }
    let mut v_rng = stream(spec.seed, 3);
    let v: Vec<Matrix> = (0..n)
        .map(|i| Matrix::from_iterator(t, 1, ar1_path(&mut v_rng, rho_v[i], 1.0, t)))
        .collect();

    let d = Matrix::from_element(t, 1, 1.0);
    let delta: Vec<Matrix> = (0..n).map(|_| Matrix::from_element(1, 1, spec.x_intercept)).collect();
    let beta = Matrix::from_fn(1, n, |_, i| if i < n / 2 { spec.beta_low } else { spec.beta_high });
    let alpha = Matrix::from_element(1, n, spec.alpha0);

    let structure = LatentStructure {
        f: factors,
        b,
        gamma,
        delta,
        v,
        xi: IdiosyncraticCov::Ar1 {
            variance: sigma2,
            rho: rho_eps,
        },
        eps,
    };
    let x: Vec<Matrix> = (0..n).map(|i| structure.regressors(&d, i)).collect();
    let mut y = Matrix::zeros(t, n);
    for i in 0..n {
        let col = &d * alpha.column(i) + &x[i] * beta.column(i) + structure.residual(i);
        y.set_column(i, &col.column(0));
    }
    let panel = PanelData::new(y, x, d)?;
    Ok((panel, structure, Truth { alpha, beta }))
}
