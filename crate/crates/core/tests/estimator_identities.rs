mod common;

use common::{gaussian, random_panel, rel_err, rng};
use panelgls_core::dgp::{simulate, DgpSpec, Normal};
use panelgls_core::estimators::{
    alpha_two_step, cross_sectional_fgls, fgls, fgls_with, iterated_fgls, joint_breve, joint_breve_with,
    joint_moore_penrose, joint_ols, ols, ols_bias_diagnostic, sample_weight, ugls, ugls_joint, FglsOptions,
};
use panelgls_core::linalg::{ortho_complement, OrthoComplement};
use panelgls_core::panel::{oracle_weight, orthogonality_statistic, transform, transform_with, IdiosyncraticCov};
use panelgls_core::{EstimateSet, LatentStructure, Matrix, Method, PanelData, Result, TransformedPanel, WeightMatrix};

fn random_orthogonal(seed: u64, n: usize) -> Matrix {
    let mut g = rng(seed);
    gaussian(&mut g, n, n).qr().q()
}

#[test]
fn feasible_estimators_take_no_latent_inputs() {
    let _: fn(&TransformedPanel) -> Result<EstimateSet> = fgls;
    let _: fn(&TransformedPanel, usize) -> Result<EstimateSet> = iterated_fgls;
    let _: fn(&PanelData) -> Result<EstimateSet> = joint_breve;
    let _: fn(&PanelData) -> Result<EstimateSet> = cross_sectional_fgls;
    let _: fn(&PanelData, &EstimateSet) -> Result<EstimateSet> = alpha_two_step;
    let _: fn(&PanelData, &LatentStructure) -> Result<EstimateSet> = ugls_joint;
    let _: fn(&LatentStructure, &TransformedPanel, usize) -> Result<_> = ols_bias_diagnostic;
}

#[test]
fn complement_basis_does_not_matter() {
    let (p, _, _) = simulate(&DgpSpec::with_size(60, 25, 17)).unwrap();
    let base = ortho_complement(p.d()).unwrap();
    let q = random_orthogonal(4, base.dim());
    let rotated = OrthoComplement::from_basis(p.d(), base.basis() * q).unwrap();
    let a = transform_with(&p, base).unwrap();
    let b = transform_with(&p, rotated).unwrap();
    for (x, y) in [
        (ols(&a).unwrap().beta, ols(&b).unwrap().beta),
        (fgls(&a).unwrap().beta, fgls(&b).unwrap().beta),
        (iterated_fgls(&a, 3).unwrap().beta, iterated_fgls(&b, 3).unwrap().beta),
    ] {
        assert!(rel_err(&x, &y) <= 1e-8, "{}", rel_err(&x, &y));
    }
}

#[test]
fn ugls_is_basis_invariant() {
    let (p, s, _) = simulate(&DgpSpec::with_size(20, 15, 5)).unwrap();
    let base = ortho_complement(p.d()).unwrap();
    let q = random_orthogonal(9, base.dim());
    let rotated = OrthoComplement::from_basis(p.d(), base.basis() * q).unwrap();
    let wa = oracle_weight(&s, &base).unwrap();
    let wb = oracle_weight(&s, &rotated).unwrap();
    let a = ugls(&transform_with(&p, base).unwrap(), &wa).unwrap();
    let b = ugls(&transform_with(&p, rotated).unwrap(), &wb).unwrap();
    assert!(rel_err(&a.beta, &b.beta) <= 1e-8);
}

#[test]
fn factored_and_dense_oracle_weights_agree() {
    let (p, s, _) = simulate(&DgpSpec::with_size(8, 10, 2)).unwrap();
    let tp = transform(&p).unwrap();
    let w = oracle_weight(&s, tp.complement()).unwrap();
    // dense construction of D⊥ᵀ(F B_N Fᵀ + N⁻¹ΣΞ_i)D⊥
    let t = p.t();
    let bn = &s.b * s.b.transpose() / s.n() as f64;
    let mut xi = Matrix::zeros(t, t);
    for i in 0..s.n() {
        xi += s.xi.unit(i, t);
    }
    let full = &s.f * bn * s.f.transpose() + xi / s.n() as f64;
    let dense = tp.complement().basis().tr_mul(&(full * tp.complement().basis()));
    assert!((w.to_dense() - &dense).amax() <= 1e-10);
    let a = ugls(&tp, &w).unwrap();
    let b = ugls(&tp, &WeightMatrix::dense(dense).unwrap()).unwrap();
    assert!(rel_err(&a.beta, &b.beta) <= 1e-9);
}

#[test]
fn ugls_joint_slopes_match_transformed_ugls() {
    let (p, s, _) = simulate(&DgpSpec::with_size(30, 20, 6)).unwrap();
    let tp = transform(&p).unwrap();
    let a = ugls(&tp, &oracle_weight(&s, tp.complement()).unwrap()).unwrap();
    let b = ugls_joint(&p, &s).unwrap();
    assert!(rel_err(&a.beta, &b.beta) <= 1e-8);
}

#[test]
fn rescaled_regressors_rescale_slopes() {
    let (p, s, _) = simulate(&DgpSpec::with_size(40, 20, 21)).unwrap();
    let c = 7.5;
    let scaled = p.with_regressors(p.x().iter().map(|x| x * c).collect()).unwrap();
    let (tp, ts) = (transform(&p).unwrap(), transform(&scaled).unwrap());
    let w = oracle_weight(&s, tp.complement()).unwrap();
    let pairs = [
        (ols(&tp).unwrap().beta, ols(&ts).unwrap().beta),
        (ugls(&tp, &w).unwrap().beta, ugls(&ts, &w).unwrap().beta),
        (fgls(&tp).unwrap().beta, fgls(&ts).unwrap().beta),
        (iterated_fgls(&tp, 4).unwrap().beta, iterated_fgls(&ts, 4).unwrap().beta),
        (joint_breve(&p).unwrap().beta, joint_breve(&scaled).unwrap().beta),
    ];
    for (k, (b, bs)) in pairs.iter().enumerate() {
        assert!(rel_err(&(bs * c), b) <= 1e-9, "estimator {k}: {}", rel_err(&(bs * c), b));
    }
}

#[test]
fn breve_slopes_ignore_scale_of_common_regressors() {
    let (p, _, _) = simulate(&DgpSpec::with_size(40, 20, 3)).unwrap();
    let scaled = p.with_common(p.d() * 10.0).unwrap();
    let a = joint_breve(&p).unwrap();
    let b = joint_breve(&scaled).unwrap();
    assert!(rel_err(&a.beta, &b.beta) <= 1e-8);
}

#[test]
fn moore_penrose_weight_cancels_common_regressors() {
    for seed in 0..10 {
        let (p, _, _) = simulate(&DgpSpec::with_size(40, 30, 100 + seed)).unwrap();
        let mp = joint_moore_penrose(&p).unwrap();
        let f = fgls(&transform(&p).unwrap()).unwrap();
        let alpha = mp.alpha.unwrap();
        for i in 0..p.n() {
            let b = f.beta.column(i).norm();
            assert!(alpha.column(i).norm() <= 1e-8 * b.max(1.0));
            assert!((mp.beta.column(i) - f.beta.column(i)).norm() <= 1e-8 * b);
        }
    }
}

#[test]
fn sample_weight_matches_naive_accumulation() {
    let (p, _, _) = simulate(&DgpSpec::with_size(200, 30, 77)).unwrap();
    let tp = transform(&p).unwrap();
    let o = ols(&tp).unwrap();
    let w = sample_weight(&tp, &o).unwrap().to_dense();
    let dim = tp.dim();
    let mut acc = Matrix::zeros(dim, dim);
    for i in 0..p.n() {
        for r in 0..dim {
            for c in 0..dim {
                acc[(r, c)] += o.residuals[(r, i)] * o.residuals[(c, i)];
            }
        }
    }
    acc /= p.n() as f64;
    assert!((&w - &acc).amax() <= 1e-12);
    assert!(w.symmetric_eigenvalues().min() > 0.0);
}

#[test]
fn dual_uses_the_same_code_path() {
    let (p, _, _) = simulate(&DgpSpec::with_size(12, 40, 8)).unwrap();
    let dual = p.dual(Matrix::from_element(p.n(), 1, 1.0)).unwrap();
    let a = cross_sectional_fgls(&dual).unwrap();
    let b = fgls(&transform(&dual).unwrap()).unwrap();
    assert_eq!(a.method, Method::CrossSection);
    assert!((a.beta - b.beta).amax() <= 1e-10);
}

#[test]
fn dual_matches_direct_formula() {
    // N = 30 cross-section units, T = 200 periods.
    let (p, _, _) = random_panel(12, 200, 30, 1, 2, 1.0);
    let d_cross = Matrix::from_element(p.n(), 1, 1.0);
    let dual = p.dual(d_cross.clone()).unwrap();
    let est = cross_sectional_fgls(&dual).unwrap();

    // Direct route: annihilator, OLS residuals, spectral pseudo-inverse.
    let n = p.n();
    let m = Matrix::identity(n, n) - Matrix::from_element(n, n, 1.0 / n as f64);
    let periods = p.t();
    let mut resid = Matrix::zeros(n, periods);
    let xs: Vec<Matrix> = (0..periods).map(|t| &m * &dual.x()[t]).collect();
    let ys: Vec<Matrix> = (0..periods).map(|t| &m * dual.y().columns(t, 1)).collect();
    for t in 0..periods {
        let b = (xs[t].tr_mul(&xs[t])).try_inverse().unwrap() * xs[t].tr_mul(&ys[t]);
        resid.set_column(t, &(&ys[t] - &xs[t] * b).column(0));
    }
    let s = &resid * resid.transpose() / periods as f64;
    let eig = s.clone().symmetric_eigen();
    let cut = 1e-10 * eig.eigenvalues.amax();
    let mut s_pinv = Matrix::zeros(n, n);
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        if l > cut {
            let v = eig.eigenvectors.column(j);
            s_pinv += &v * v.transpose() / l;
        }
    }
    for t in 0..periods {
        let b = (xs[t].tr_mul(&(&s_pinv * &xs[t]))).try_inverse().unwrap() * xs[t].tr_mul(&(&s_pinv * &ys[t]));
        let got = est.beta.column(t);
        assert!((got - b.column(0)).amax() <= 1e-9 * b.amax().max(1.0), "period {t}");
    }
}

#[test]
fn dual_with_constant_outcome_has_zero_slopes() {
    let (p, _, _) = random_panel(3, 40, 10, 1, 1, 1.0);
    let y = Matrix::from_fn(p.t(), p.n(), |r, _| r as f64);
    let flat = PanelData::new(y, p.x().to_vec(), p.d().clone()).unwrap();
    let dual = flat.dual(Matrix::from_element(flat.n(), 1, 1.0)).unwrap();
    let tp = transform(&dual).unwrap();
    let est = fgls_with(
        &tp,
        &FglsOptions {
            weight_override: Some(WeightMatrix::identity(tp.dim())),
            ..Default::default()
        },
    )
    .unwrap();
    assert!(est.beta.amax() <= 1e-12);
    let alpha = panelgls_core::estimators::project_alpha(&dual, &est.beta, Method::AlphaTwoStep).unwrap();
    for t in 0..flat.t() {
        assert!((alpha.alpha.as_ref().unwrap()[(0, t)] - t as f64).abs() <= 1e-12);
    }
}

#[test]
fn ols_bias_vanishes_without_factor_channel() {
    let no_b = DgpSpec {
        b1: Normal::new(0.0, 0.0),
        b2: Normal::new(0.0, 0.0),
        ..DgpSpec::with_size(4, 50, 1)
    };
    let (p, s, _) = simulate(&no_b).unwrap();
    let tp = transform(&p).unwrap();
    for i in 0..p.n() {
        assert_eq!(ols_bias_diagnostic(&s, &tp, i).unwrap().amax(), 0.0);
    }
}

#[test]
fn ols_bias_vanishes_with_zero_regressor_loadings_exactly() {
    // Γ_i = 0 and V_i orthogonal to the factors in sample: bias is exactly 0.
    let t = 8;
    let f = Matrix::from_fn(t, 1, |r, _| if r % 2 == 0 { 1.0 } else { -1.0 });
    let v = Matrix::from_fn(t, 1, |r, _| if r < t / 2 { 1.0 } else { -1.0 } + 0.1 * r as f64);
    let v = &v - &f * (f.tr_mul(&v)[(0, 0)] / f.norm_squared());
    let d = Matrix::zeros(t, 0);
    let s = LatentStructure {
        f: f.clone(),
        b: Matrix::from_element(1, 1, 2.0),
        gamma: vec![Matrix::zeros(1, 1)],
        delta: vec![Matrix::zeros(0, 1)],
        v: vec![v.clone()],
        xi: IdiosyncraticCov::Dense(vec![Matrix::identity(t, t)]),
        eps: Matrix::zeros(t, 1),
    };
    let x = s.regressors(&d, 0);
    let p = PanelData::new(s.residual(0), vec![x], d).unwrap();
    let tp = transform(&p).unwrap();
    assert!(ols_bias_diagnostic(&s, &tp, 0).unwrap().amax() <= 1e-15);
}

#[test]
fn ols_bias_tracks_long_sample_error() {
    let spec = DgpSpec::with_size(2, 10_000, 2024);
    let (p, s, truth) = simulate(&spec).unwrap();
    let tp = transform(&p).unwrap();
    let o = ols(&tp).unwrap();
    for i in 0..p.n() {
        let tau = ols_bias_diagnostic(&s, &tp, i).unwrap()[0];
        let err = o.beta[(0, i)] - truth.beta[(0, i)];
        assert!((err - tau).abs() <= 0.02, "unit {i}: {err} vs {tau}");
    }
}

#[test]
fn two_step_recovers_noiseless_intercepts() {
    let (p, alpha, beta) = random_panel(5, 20, 6, 2, 2, 0.0);
    let est = EstimateSet {
        method: Method::Fgls,
        beta: beta.clone(),
        alpha: None,
        residuals: Matrix::zeros(18, 6),
        weight_used: None,
        iterations: 1,
    };
    let a = alpha_two_step(&p, &est).unwrap();
    assert!((a.alpha.unwrap() - alpha).amax() <= 1e-10);
}

#[test]
fn two_step_intercepts_unbiased_with_true_slopes() {
    let reps = 400;
    let mut errs = Vec::with_capacity(reps);
    for r in 0..reps {
        let (p, alpha, beta) = random_panel(1000 + r as u64, 30, 4, 1, 1, 1.0);
        let est = EstimateSet {
            method: Method::Fgls,
            beta,
            alpha: None,
            residuals: Matrix::zeros(29, 4),
            weight_used: None,
            iterations: 1,
        };
        let a = alpha_two_step(&p, &est).unwrap().alpha.unwrap();
        errs.extend((a - alpha).iter().copied());
    }
    let n = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / n;
    let sd = (errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() < 3.0 * sd / n.sqrt(), "mean {mean}, se {}", sd / n.sqrt());
}

fn noiseless_design() -> (PanelData, Matrix, Matrix, LatentStructure) {
    let spec = DgpSpec {
        b1: Normal::new(0.0, 0.0),
        b2: Normal::new(0.0, 0.0),
        sigma2_range: (0.0, 0.0),
        ..DgpSpec::with_size(40, 20, 31)
    };
    let (p, _, truth) = simulate(&spec).unwrap();
    // An arbitrary positive definite weight for the oracle route.
    let s = LatentStructure {
        f: Matrix::from_fn(p.t(), 1, |r, _| (r as f64).sin()),
        b: Matrix::from_element(1, p.n(), 0.5),
        gamma: vec![Matrix::zeros(1, 1); p.n()],
        delta: vec![Matrix::zeros(1, 1); p.n()],
        v: vec![Matrix::zeros(p.t(), 1); p.n()],
        xi: IdiosyncraticCov::Ar1 {
            variance: vec![1.0; p.n()],
            rho: vec![0.4; p.n()],
        },
        eps: Matrix::zeros(p.t(), p.n()),
    };
    (p, truth.alpha, truth.beta, s)
}

#[test]
fn noiseless_panels_are_recovered_exactly() {
    let (p, alpha, beta, s) = noiseless_design();
    let tp = transform(&p).unwrap();
    let check = |b: &Matrix| assert!((b - &beta).amax() <= 1e-10, "{}", (b - &beta).amax());
    let o = ols(&tp).unwrap();
    check(&o.beta);
    assert!(o.residuals.amax() <= 1e-10);
    check(&ugls(&tp, &oracle_weight(&s, tp.complement()).unwrap()).unwrap().beta);
    let hook = FglsOptions {
        weight_override: Some(WeightMatrix::identity(tp.dim())),
        ..Default::default()
    };
    let f = fgls_with(&tp, &hook).unwrap();
    check(&f.beta);
    let a2 = alpha_two_step(&p, &f).unwrap();
    assert!((a2.alpha.unwrap() - &alpha).amax() <= 1e-10);
    let breve = joint_breve_with(
        &p,
        &FglsOptions {
            weight_override: Some(WeightMatrix::identity(p.t())),
            ..Default::default()
        },
    )
    .unwrap();
    check(&breve.beta);
    assert!((breve.alpha.unwrap() - &alpha).amax() <= 1e-10);
    let u = ugls_joint(&p, &s).unwrap();
    check(&u.beta);
    assert!((u.alpha.unwrap() - &alpha).amax() <= 1e-10);
    let jo = joint_ols(&p).unwrap();
    assert!((jo.alpha.unwrap() - &alpha).amax() <= 1e-10);
}

#[test]
fn orthogonality_statistic_decays() {
    let mut ratios = Vec::new();
    for seed in 0..5 {
        let q = |t: usize| {
            let (_, s, _) = simulate(&DgpSpec::with_size(50, t, 500 + seed)).unwrap();
            orthogonality_statistic(&s).unwrap()
        };
        ratios.push(q(128) / q(64));
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((0.3..=0.8).contains(&mean), "{mean}");
}
